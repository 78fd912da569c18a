use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_brillouin-cool");

fn setup(config: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, config).unwrap();
    (dir, path)
}

fn invoke(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(BIN)
        .arg(command)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect()
}

fn header(csv: &str) -> &str {
    csv.lines().find(|l| !l.starts_with('#')).unwrap()
}

fn meta(csv: &str, key: &str) -> String {
    let prefix = format!("# result {key} = ");
    csv.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {key} in metadata"))
        .to_string()
}

#[test]
fn minimal_config_uses_defaults() {
    let (dir, cfg) = setup("pump_power_w = 0.1\n");
    let o = invoke("steady", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("steady.csv")).unwrap();
    for line in [
        "# config brillouin_frequency_hz = 7.38e9",
        "# config gamma_m_hz = 46.8e6",
        "# config gamma_o_hz = 364e6",
        "# config brillouin_gain_per_w_m = 164",
        "# config length_m = 0.5",
        "# config refractive_index = 2.5",
        "# config temperature_k = 293",
        "# config pump_power_w = 0.1",
    ] {
        assert!(csv.contains(line), "missing {line}");
    }
    assert!(csv.starts_with(&format!("# brillouin-cool {}\n", env!("CARGO_PKG_VERSION"))));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 1);
    assert!((rows[0][2] - 292.1017).abs() < 1e-3);
}

#[test]
fn sweep_has_documented_shape() {
    let (dir, cfg) = setup("sweep_start_w = 0\nsweep_stop_w = 0.3\nsweep_count = 31\n");
    let o = invoke("sweep", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(header(&csv), "power_w,g_om,n_b_ss,t_eff_k,gamma_eff_hz,cooling_rate");
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 31);
    let first = &rows[0];
    assert_eq!(first[0], 0.0);
    assert_eq!(first[1], 0.0);
    assert!((first[2] - 826.7534).abs() < 1e-3);
    assert!((first[3] - 293.0).abs() < 1e-9);
    assert!((first[4] - 46.8e6).abs() < 1e-3);
    assert!((first[5] - 1.0).abs() < 1e-12);
    // every float carries 17 significant digits
    let line = csv.lines().last().unwrap();
    assert!(line.split(',').all(|f| f.split('e').next().unwrap().trim_start_matches('-').len() == 18));
}

#[test]
fn schemas() {
    let (dir, cfg) = setup("langevin_count = 20\nsweep_count = 4\n");
    let expect = [
        ("dynamics", "dynamics.csv", "t_s,n_a,n_b,re_coherence,im_coherence"),
        ("spectrum", "spectrum.csv", "offset_hz,psd"),
        ("langevin", "langevin.csv", "power_w,n_b_mean,n_b_stderr,count"),
        ("depletion", "depletion.csv", "z_m,pump_w,stokes_w"),
    ];
    for (command, file, head) in expect {
        let o = invoke(command, &cfg, dir.path(), &[]);
        assert_eq!(o.status.code(), Some(0), "{command}: {}", stderr(&o));
        let csv = fs::read_to_string(dir.path().join(file)).unwrap();
        assert_eq!(header(&csv), head);
        assert!(!data_rows(&csv).is_empty());
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (dir, cfg) = setup("langevin_count = 200\nlangevin_base_seed = 99\nsweep_count = 5\n");
    for command in ["steady", "sweep", "dynamics", "langevin", "spectrum", "depletion", "report"] {
        let a = dir.path().join(format!("{command}-a"));
        let b = dir.path().join(format!("{command}-b"));
        assert_eq!(invoke(command, &cfg, &a, &[]).status.code(), Some(0));
        assert_eq!(invoke(command, &cfg, &b, &[]).status.code(), Some(0));
        let mut files: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        files.sort();
        assert!(!files.is_empty());
        for f in files {
            let x = fs::read(a.join(&f)).unwrap();
            let y = fs::read(b.join(&f)).unwrap();
            // the echoed output directory differs between the two runs
            let strip = |v: Vec<u8>| {
                String::from_utf8(v)
                    .unwrap()
                    .lines()
                    .filter(|l| !l.starts_with("# config output_dir"))
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            assert_eq!(strip(x), strip(y), "{command}/{f:?}");
        }
    }
}

#[test]
fn same_output_dir_rerun_is_identical() {
    let (dir, cfg) = setup("langevin_count = 100\n");
    let out = dir.path().join("o");
    assert_eq!(invoke("langevin", &cfg, &out, &[]).status.code(), Some(0));
    let first = fs::read(out.join("langevin.csv")).unwrap();
    assert_eq!(invoke("langevin", &cfg, &out, &[]).status.code(), Some(0));
    assert_eq!(first, fs::read(out.join("langevin.csv")).unwrap());
}

#[test]
fn svg_only_on_request() {
    let (dir, cfg) = setup("");
    let plain = dir.path().join("plain");
    let plotted = dir.path().join("plotted");
    assert_eq!(invoke("sweep", &cfg, &plain, &[]).status.code(), Some(0));
    assert_eq!(invoke("sweep", &cfg, &plotted, &["--svg"]).status.code(), Some(0));
    assert!(!plain.join("sweep.svg").exists());
    let svg = fs::read_to_string(plotted.join("sweep.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
}

#[test]
fn config_errors_exit_two() {
    let cases = [
        ("gamma_m_hz = -46.8e6\n", "gamma_m_hz", "line 1"),
        ("svg = true\nsvg = false\n", "svg", "line 2"),
        ("pump_power_w = 0.1\n  pump = 3\n", "pump", "line 2, column 3"),
        ("sweep_count = many\n", "sweep_count", "line 1, column 15"),
    ];
    for (text, key, location) in cases {
        let (dir, cfg) = setup(text);
        let o = invoke("steady", &cfg, dir.path(), &[]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        let err = stderr(&o);
        assert!(err.contains(&format!("`{key}`")), "{err}");
        assert!(err.contains(location), "{err}");
        assert!(!dir.path().join("steady.csv").exists());
    }
    let dir = tempfile::tempdir().unwrap();
    let o = invoke("steady", &dir.path().join("absent.cfg"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    let o = Command::new(BIN).args(["cool", "--config", "x"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(BIN).arg("steady").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_three() {
    // no pump power up to 1 mW can deplete 40% of the pump
    let (dir, cfg) = setup("depletion_fraction = 0.4\ndepletion_max_power_w = 0.001\n");
    let o = invoke("depletion", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("depletion"), "{err}");
    assert!(err.contains("depletion_fraction = 0.4"), "{err}");
}

#[test]
fn spectrum_metadata() {
    let (dir, cfg) = setup("pump_power_w = 0.1\n");
    assert_eq!(invoke("spectrum", &cfg, dir.path(), &[]).status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let closed: f64 = meta(&csv, "closed_form_gamma_eff_hz").parse().unwrap();
    assert!((closed - 132.46e6).abs() < 0.01e6);
    let n: f64 = meta(&csv, "n_b_ss").parse().unwrap();
    let integral: f64 = meta(&csv, "integrated_occupation").parse().unwrap();
    assert!(((integral - n) / n).abs() < 5e-3);
    // at 0.1 W the phonon spectrum is far from Lorentzian and the fit is much broader
    let fitted: f64 = meta(&csv, "fitted_fwhm_hz").parse().unwrap();
    assert!(fitted > 1.5 * closed);

    let (dir, cfg) = setup("pump_power_w = 0.001\n");
    assert_eq!(invoke("spectrum", &cfg, dir.path(), &[]).status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let closed: f64 = meta(&csv, "closed_form_gamma_eff_hz").parse().unwrap();
    let fitted: f64 = meta(&csv, "fitted_fwhm_hz").parse().unwrap();
    assert!(((fitted - closed) / closed).abs() < 0.02);
}

#[test]
fn report_scoreboard() {
    let (dir, cfg) = setup("");
    let o = invoke("report", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("11 of 11 rows pass"), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(header(&csv), "quantity,value,lower,upper,status");
    let row = csv.lines().find(|l| l.starts_with("thermal_occupation,")).unwrap();
    assert!(row.ends_with(",PASS"));
    let power = csv.lines().find(|l| l.starts_with("power_for_212_phonons_w,")).unwrap();
    let value: f64 = power.split(',').nth(1).unwrap().parse().unwrap();
    assert!((value - 0.1932).abs() < 1e-3);
}

#[test]
fn depletion_cooling_curve() {
    let (dir, cfg) = setup("sweep_start_w = 0\nsweep_stop_w = 0.4\nsweep_count = 9\n");
    assert_eq!(invoke("depletion", &cfg, dir.path(), &[]).status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("depletion_cooling.csv")).unwrap();
    assert_eq!(header(&csv), "power_w,mean_pump_w,n_b_ss_input,n_b_ss_depleted");
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 9);
    for r in &rows[1..] {
        assert!(r[1] < r[0]);
        assert!(r[3] > r[2]);
    }
    let profile = data_rows(&fs::read_to_string(dir.path().join("depletion.csv")).unwrap());
    let c0 = profile[0][1] - profile[0][2];
    assert!(profile.iter().all(|r| ((r[1] - r[2]) - c0).abs() < 1e-9 * 0.1));
}
