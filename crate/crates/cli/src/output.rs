//! CSV and SVG emission. Files are assembled in memory and written once.

use std::fmt::Write as _;

use crate::config::RunConfig;

/// Floating point in 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Table {
    header: &'static str,
    meta: Vec<(String, String)>,
    rows: Vec<String>,
}

impl Table {
    pub fn new(header: &'static str) -> Self {
        Self {
            header,
            meta: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn row(&mut self, fields: &[String]) {
        self.rows.push(fields.join(","));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Comment block (tool, version, command, resolved config, results), header, rows.
    pub fn render(&self, command: &str, config: &RunConfig) -> String {
        let mut out = String::new();
        writeln!(out, "# brillouin-cool {}", brillouin_cooling::VERSION).unwrap();
        writeln!(out, "# command = {command}").unwrap();
        for (k, v) in config.echo() {
            writeln!(out, "# config {k} = {v}").unwrap();
        }
        for (k, v) in &self.meta {
            writeln!(out, "# result {k} = {v}").unwrap();
        }
        writeln!(out, "{}", self.header).unwrap();
        for r in &self.rows {
            writeln!(out, "{r}").unwrap();
        }
        out
    }
}

fn finite_range(values: &[f64]) -> (f64, f64) {
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        (lo - pad, hi + pad)
    }
}

/// Single-polyline plot with axis labels and extreme tick values.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const LEFT: f64 = 90.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 60.0;
    let (x0, x1) = finite_range(xs);
    let (y0, y1) = finite_range(ys);
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);
    let points: Vec<String> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{title}</text>"#, W / 2.0).unwrap();
    writeln!(
        s,
        r#"<path d="M{LEFT},{TOP} V{} H{}" fill="none" stroke="black"/>"#,
        H - BOTTOM,
        W - RIGHT
    )
    .unwrap();
    let tick = |v: f64| format!("{v:.4e}");
    writeln!(s, r#"<text x="{LEFT}" y="{}" font-size="11" text-anchor="start">{}</text>"#, H - BOTTOM + 16.0, tick(x0)).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#, W - RIGHT, H - BOTTOM + 16.0, tick(x1)).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#, LEFT - 4.0, H - BOTTOM, tick(y0)).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#, LEFT - 4.0, TOP + 10.0, tick(y1)).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{x_label}</text>"#, (LEFT + W - RIGHT) / 2.0, H - 16.0).unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">{y_label}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0
    )
    .unwrap();
    writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#, points.join(" ")).unwrap();
    writeln!(s, "</svg>").unwrap();
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(826.0), "8.2600000000000000e2");
        let v = 0.1 + 0.2;
        assert_eq!(num(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn svg_has_one_polyline() {
        let s = svg_plot("t", "x", "y", &[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]);
        assert_eq!(s.matches("<polyline").count(), 1);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
    }
}
