//! Run configuration: one `key = value` per line, `#` comments, no sections.
//!
//! Every key is optional; missing keys take the defaults in [`KEYS`].

use std::collections::HashMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use brillouin_cooling::langevin::{MAX_DT_FACTOR, MIN_T_END_FACTOR};
use brillouin_cooling::spectrum::{MIN_POINTS, MIN_SPAN_FACTOR};
use brillouin_cooling::{Detuning, RatesConvention, SystemParams};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("line {line}, column {column}: key `{key}`: {message}")]
    Key {
        line: usize,
        column: usize,
        key: String,
        message: String,
    },
}

/// Known keys and their defaults, in echo order.
pub const KEYS: &[(&str, &str)] = &[
    ("brillouin_frequency_hz", "7.38e9"),
    ("gamma_m_hz", "46.8e6"),
    ("gamma_o_hz", "364e6"),
    ("brillouin_gain_per_w_m", "164"),
    ("intrinsic_gain_m_per_w", "1.32e-9"),
    ("length_m", "0.5"),
    ("refractive_index", "2.5"),
    ("temperature_k", "293"),
    ("rates_convention", "as_given"),
    ("pump_power_w", "0.1"),
    // defaults to minus the Brillouin frequency
    ("delta_l_hz", ""),
    ("delta1_hz", "0"),
    ("delta2_hz", "0"),
    ("sweep_start_w", "0"),
    ("sweep_stop_w", "0.3"),
    ("sweep_count", "31"),
    ("sweep_scale", "linear"),
    ("langevin_count", "1000"),
    ("langevin_dt_factor", "0.05"),
    ("langevin_t_end_factor", "20"),
    ("langevin_base_seed", "1"),
    ("spectrum_points", "4096"),
    ("spectrum_span_factor", "20"),
    ("depletion_seed_w", "1e-9"),
    ("depletion_fraction", "0.01"),
    ("depletion_max_power_w", "10"),
    ("depletion_steps", "2000"),
    ("loss_per_m", "0"),
    ("dynamics_t_end_factor", "20"),
    ("dynamics_tol", "1e-10"),
    ("dynamics_samples", "201"),
    ("output_dir", "."),
    ("svg", "false"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepScale {
    Linear,
    Log,
}

impl FromStr for SweepScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linear" => Ok(SweepScale::Linear),
            "log" => Ok(SweepScale::Log),
            other => Err(format!("expected `linear` or `log`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub scale: SweepScale,
}

impl SweepSpec {
    pub fn powers(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let t = i as f64 / last;
                match self.scale {
                    SweepScale::Linear => self.start + (self.stop - self.start) * t,
                    SweepScale::Log => self.start * (self.stop / self.start).powf(t),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinSpec {
    pub count: usize,
    pub dt_factor: f64,
    pub t_end_factor: f64,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    pub points: usize,
    pub span_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepletionSpec {
    pub seed: f64,
    pub fraction: f64,
    pub max_power: f64,
    pub steps: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSpec {
    /// Duration in units of 1/Γ_m.
    pub t_end_factor: f64,
    pub tol: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    pub pump_power: f64,
    /// Δ_L in Hz; carried for the record, the coupling does not depend on it.
    pub delta_l_hz: f64,
    pub delta1_hz: f64,
    pub delta2_hz: f64,
    pub sweep: SweepSpec,
    pub langevin: LangevinSpec,
    pub spectrum: SpectrumSpec,
    pub depletion: DepletionSpec,
    pub dynamics: DynamicsSpec,
    pub output_dir: PathBuf,
    pub svg: bool,
    echo: Vec<(&'static str, String)>,
}

impl RunConfig {
    pub fn detuning(&self) -> Detuning {
        Detuning::from_hz(self.delta1_hz, self.delta2_hz, self.params.rates_convention)
    }

    /// Resolved `key = value` pairs, one per known key.
    pub fn echo(&self) -> &[(&'static str, String)] {
        &self.echo
    }

    pub fn set_output_dir(&mut self, dir: PathBuf) {
        self.echo_set("output_dir", dir.display().to_string());
        self.output_dir = dir;
    }

    pub fn set_svg(&mut self, svg: bool) {
        self.echo_set("svg", svg.to_string());
        self.svg = svg;
    }

    fn echo_set(&mut self, key: &str, value: String) {
        if let Some(entry) = self.echo.iter_mut().find(|(k, _)| *k == key) {
            entry.1 = value;
        }
    }
}

struct Entry {
    value: String,
    line: usize,
    key_column: usize,
    value_column: usize,
}

struct Entries {
    set: HashMap<String, Entry>,
    echo: Vec<(&'static str, String)>,
}

impl Entries {
    fn raw(&self, key: &'static str) -> (&str, Option<&Entry>) {
        match self.set.get(key) {
            Some(e) => (e.value.as_str(), Some(e)),
            None => (default_of(key), None),
        }
    }

    fn get<T: FromStr>(&mut self, key: &'static str) -> Result<T, ConfigError>
    where
        T::Err: Display,
    {
        let (raw, entry) = self.raw(key);
        let parsed = raw.parse::<T>().map_err(|e| {
            let (line, column) = entry.map_or((0, 0), |e| (e.line, e.value_column));
            ConfigError::Key {
                line,
                column,
                key: key.into(),
                message: format!("cannot parse `{raw}`: {e}"),
            }
        })?;
        let shown = raw.to_string();
        self.echo.push((key, shown));
        Ok(parsed)
    }

    fn number(&mut self, key: &'static str) -> Result<f64, ConfigError> {
        let v: f64 = self.get(key)?;
        if !v.is_finite() {
            return Err(self.error(key, "must be a finite number"));
        }
        Ok(v)
    }

    fn flag(&mut self, key: &'static str) -> Result<bool, ConfigError> {
        match self.raw(key).0 {
            "true" | "false" => self.get(key),
            other => Err(self.error(key, format!("expected `true` or `false`, got `{other}`"))),
        }
    }

    fn error(&self, key: &'static str, message: impl Into<String>) -> ConfigError {
        let (line, column) = self.set.get(key).map_or((0, 0), |e| (e.line, e.key_column));
        ConfigError::Key {
            line,
            column,
            key: key.into(),
            message: message.into(),
        }
    }

    /// Whichever of `keys` appears last in the file, for cross-key errors.
    fn latest(&self, keys: &[&'static str]) -> &'static str {
        keys.iter()
            .copied()
            .max_by_key(|k| self.set.get(*k).map_or(0, |e| e.line))
            .unwrap_or(keys[0])
    }
}

fn default_of(key: &str) -> &'static str {
    KEYS.iter().find(|(k, _)| *k == key).map_or("", |(_, d)| d)
}

fn valid_key(key: &str) -> bool {
    let mut chars = key.chars();
    matches!(chars.next(), Some('a'..='z')) && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

fn tokenize(text: &str) -> Result<HashMap<String, Entry>, ConfigError> {
    let mut set: HashMap<String, Entry> = HashMap::new();
    for (index, full) in text.lines().enumerate() {
        let line = index + 1;
        let content = full.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let key_column = content.chars().take_while(|c| c.is_whitespace()).count() + 1;
        let Some((lhs, rhs)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                column: key_column,
                message: "expected `key = value`".into(),
            });
        };
        let key = lhs.trim();
        if !valid_key(key) {
            return Err(ConfigError::Syntax {
                line,
                column: key_column,
                message: format!("invalid key `{key}`: keys are lowercase snake_case"),
            });
        }
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(ConfigError::Key {
                line,
                column: key_column,
                key: key.into(),
                message: "unknown key".into(),
            });
        }
        let value_offset = lhs.chars().count() + 1;
        let value_column = value_offset + rhs.chars().take_while(|c| c.is_whitespace()).count() + 1;
        let mut value = rhs.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if value.is_empty() {
            return Err(ConfigError::Key {
                line,
                column: value_column,
                key: key.into(),
                message: "missing value".into(),
            });
        }
        if let Some(first) = set.get(key) {
            return Err(ConfigError::Key {
                line,
                column: key_column,
                key: key.into(),
                message: format!("duplicate key, first set on line {}", first.line),
            });
        }
        set.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
                key_column,
                value_column,
            },
        );
    }
    Ok(set)
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text)
}

/// Parses and validates a configuration.
pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let mut e = Entries {
        set: tokenize(text)?,
        echo: Vec::with_capacity(KEYS.len()),
    };

    let omega_b_hz = e.number("brillouin_frequency_hz")?;
    let gamma_m_hz = e.number("gamma_m_hz")?;
    let gamma_o_hz = e.number("gamma_o_hz")?;
    let gain_total = e.number("brillouin_gain_per_w_m")?;
    let gain_intrinsic = e.number("intrinsic_gain_m_per_w")?;
    let length = e.number("length_m")?;
    let refractive_index = e.number("refractive_index")?;
    let temperature = e.number("temperature_k")?;
    let rates_convention: RatesConvention = e.get("rates_convention")?;
    let params = SystemParams {
        omega_b_hz,
        gamma_m_hz,
        gamma_o_hz,
        gain_total,
        gain_intrinsic: Some(gain_intrinsic),
        length,
        refractive_index,
        temperature,
        rates_convention,
    };
    let param_keys: [(&str, &'static str); 8] = [
        ("omega_b_hz", "brillouin_frequency_hz"),
        ("gamma_m_hz", "gamma_m_hz"),
        ("gamma_o_hz", "gamma_o_hz"),
        ("gain_total", "brillouin_gain_per_w_m"),
        ("gain_intrinsic", "intrinsic_gain_m_per_w"),
        ("length", "length_m"),
        ("refractive_index", "refractive_index"),
        ("temperature", "temperature_k"),
    ];
    if let Err(brillouin_cooling::Error::InvalidParameter { name, reason }) = params.validate() {
        let key = param_keys.iter().find(|(n, _)| *n == name).map_or("gamma_m_hz", |(_, k)| k);
        return Err(e.error(key, reason));
    }

    let pump_power = e.number("pump_power_w")?;
    if pump_power < 0.0 {
        return Err(e.error("pump_power_w", "must be >= 0"));
    }
    let delta_l_hz = if e.set.contains_key("delta_l_hz") {
        e.number("delta_l_hz")?
    } else {
        e.echo.push(("delta_l_hz", (-omega_b_hz).to_string()));
        -omega_b_hz
    };
    let delta1_hz = e.number("delta1_hz")?;
    let delta2_hz = e.number("delta2_hz")?;

    let sweep = SweepSpec {
        start: e.number("sweep_start_w")?,
        stop: e.number("sweep_stop_w")?,
        count: e.get("sweep_count")?,
        scale: e.get("sweep_scale")?,
    };
    if sweep.start < 0.0 {
        return Err(e.error("sweep_start_w", "must be >= 0"));
    }
    if sweep.count == 0 {
        return Err(e.error("sweep_count", "must be >= 1"));
    }
    if sweep.count > 1 && sweep.stop <= sweep.start {
        return Err(e.error(
            e.latest(&["sweep_start_w", "sweep_stop_w"]),
            "sweep_stop_w must exceed sweep_start_w",
        ));
    }
    if sweep.scale == SweepScale::Log && sweep.start <= 0.0 {
        return Err(e.error(e.latest(&["sweep_start_w", "sweep_scale"]), "log sweep needs sweep_start_w > 0"));
    }

    let langevin = LangevinSpec {
        count: e.get("langevin_count")?,
        dt_factor: e.number("langevin_dt_factor")?,
        t_end_factor: e.number("langevin_t_end_factor")?,
        base_seed: e.get("langevin_base_seed")?,
    };
    if langevin.count < 2 {
        return Err(e.error("langevin_count", "must be >= 2"));
    }
    if !(langevin.dt_factor > 0.0 && langevin.dt_factor <= MAX_DT_FACTOR) {
        return Err(e.error("langevin_dt_factor", format!("must lie in (0, {MAX_DT_FACTOR}]")));
    }
    if langevin.t_end_factor < MIN_T_END_FACTOR {
        return Err(e.error("langevin_t_end_factor", format!("must be >= {MIN_T_END_FACTOR}")));
    }

    let spectrum = SpectrumSpec {
        points: e.get("spectrum_points")?,
        span_factor: e.number("spectrum_span_factor")?,
    };
    if spectrum.points < MIN_POINTS {
        return Err(e.error("spectrum_points", format!("must be >= {MIN_POINTS}")));
    }
    if spectrum.span_factor < MIN_SPAN_FACTOR {
        return Err(e.error("spectrum_span_factor", format!("must be >= {MIN_SPAN_FACTOR}")));
    }

    let depletion = DepletionSpec {
        seed: e.number("depletion_seed_w")?,
        fraction: e.number("depletion_fraction")?,
        max_power: e.number("depletion_max_power_w")?,
        steps: e.get("depletion_steps")?,
        loss: e.number("loss_per_m")?,
    };
    if depletion.seed <= 0.0 {
        return Err(e.error("depletion_seed_w", "must be > 0"));
    }
    if !(depletion.fraction > 0.0 && depletion.fraction < 0.5) {
        return Err(e.error("depletion_fraction", "must lie in (0, 0.5)"));
    }
    if depletion.max_power <= 0.0 {
        return Err(e.error("depletion_max_power_w", "must be > 0"));
    }
    if depletion.steps < 2 {
        return Err(e.error("depletion_steps", "must be >= 2"));
    }
    if depletion.loss < 0.0 {
        return Err(e.error("loss_per_m", "must be >= 0"));
    }

    let dynamics = DynamicsSpec {
        t_end_factor: e.number("dynamics_t_end_factor")?,
        tol: e.number("dynamics_tol")?,
        samples: e.get("dynamics_samples")?,
    };
    if dynamics.t_end_factor <= 0.0 {
        return Err(e.error("dynamics_t_end_factor", "must be > 0"));
    }
    if !(dynamics.tol > 1e-14 && dynamics.tol < 1e-2) {
        return Err(e.error("dynamics_tol", "must lie in (1e-14, 1e-2)"));
    }
    if dynamics.samples < 2 {
        return Err(e.error("dynamics_samples", "must be >= 2"));
    }

    let output_dir = PathBuf::from(e.get::<String>("output_dir")?);
    let svg = e.flag("svg")?;

    // echo in table order regardless of evaluation order
    let mut echo = std::mem::take(&mut e.echo);
    echo.sort_by_key(|(k, _)| KEYS.iter().position(|(known, _)| known == k));

    Ok(RunConfig {
        params,
        pump_power,
        delta_l_hz,
        delta1_hz,
        delta2_hz,
        sweep,
        langevin,
        spectrum,
        depletion,
        dynamics,
        output_dir,
        svg,
        echo,
    })
}
