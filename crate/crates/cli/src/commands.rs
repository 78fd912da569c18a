use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use brillouin_cooling::depletion::{
    depletion_threshold, propagate, seed_for_threshold, small_signal_gain, PropagationOptions,
};
use brillouin_cooling::langevin::{run_ensemble, NoiseSpec, TimeGrid};
use brillouin_cooling::moments::{integrate, settle, MomentState};
use brillouin_cooling::spectrum::{acoustic_psd, anti_stokes_peak_height, fit_lorentzian, FrequencyGrid};
use brillouin_cooling::steady::{
    cooling_rate_limit, effective_linewidth, linewidth_limit, occupation_floor, phonon_occupation_detuned,
    phonon_occupation_phase_matched, power_for_occupation, power_sweep, SweepResult,
};
use brillouin_cooling::{coupling_for_power, effective_temperature, Error as ModelError};
use clap::ValueEnum;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::output::{num, svg_plot, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{command} failed ({context}): {source}")]
    Model {
        command: &'static str,
        context: String,
        #[source]
        source: ModelError,
    },

    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for bad input, 3 for a numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model { source, .. } if source.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Steady,
    Sweep,
    Dynamics,
    Langevin,
    Spectrum,
    Depletion,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Steady => "steady",
            Command::Sweep => "sweep",
            Command::Dynamics => "dynamics",
            Command::Langevin => "langevin",
            Command::Spectrum => "spectrum",
            Command::Depletion => "depletion",
            Command::Report => "report",
        }
    }
}

/// Files to write and text for stdout.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub summary: String,
}

impl Outcome {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let io = |path: &Path, source| CliError::Io {
            path: path.display().to_string(),
            source,
        };
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut written = Vec::new();
        for (name, contents) in &self.files {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

struct Run<'a> {
    command: Command,
    config: &'a RunConfig,
    out: Outcome,
}

impl<'a> Run<'a> {
    fn fail(&self, context: String) -> impl FnOnce(ModelError) -> CliError + 'a {
        let command = self.command.name();
        move |source| CliError::Model {
            command,
            context,
            source,
        }
    }

    fn operating_point(&self) -> String {
        let c = self.config;
        format!(
            "pump_power_w = {}, delta1_hz = {}, delta2_hz = {}",
            c.pump_power, c.delta1_hz, c.delta2_hz
        )
    }

    fn emit(&mut self, stem: &str, table: &Table, plot: Option<(&str, &str, &[f64], &[f64])>) {
        self.out
            .files
            .push((format!("{stem}.csv"), table.render(self.command.name(), self.config)));
        if let (true, Some((x_label, y_label, xs, ys))) = (self.config.svg, plot) {
            self.out.files.push((format!("{stem}.svg"), svg_plot(stem, x_label, y_label, xs, ys)));
        }
    }

    fn say(&mut self, line: impl AsRef<str>) {
        self.out.summary.push_str(line.as_ref());
        self.out.summary.push('\n');
    }
}

const SWEEP_HEADER: &str = "power_w,g_om,n_b_ss,t_eff_k,gamma_eff_hz,cooling_rate";

fn sweep_table(config: &RunConfig, result: &SweepResult) -> Table {
    let mut t = Table::new(SWEEP_HEADER);
    for r in &result.rows {
        let o = &r.observables;
        t.row(&[
            num(r.power),
            num(r.g_om),
            num(o.n_b_ss),
            num(o.t_eff),
            num(config.params.rate_to_hz(o.gamma_eff)),
            num(o.cooling_rate),
        ]);
    }
    t
}

pub fn run(command: Command, config: &RunConfig) -> Result<Outcome, CliError> {
    let mut run = Run {
        command,
        config,
        out: Outcome::default(),
    };
    match command {
        Command::Steady => steady(&mut run)?,
        Command::Sweep => sweep(&mut run)?,
        Command::Dynamics => dynamics(&mut run)?,
        Command::Langevin => langevin(&mut run)?,
        Command::Spectrum => spectrum(&mut run)?,
        Command::Depletion => depletion(&mut run)?,
        Command::Report => report(&mut run)?,
    }
    Ok(run.out)
}

fn steady(run: &mut Run) -> Result<(), CliError> {
    let c = run.config;
    let det = c.detuning();
    let result = power_sweep(&c.params, &[c.pump_power], &det).map_err(run.fail(run.operating_point()))?;
    let moments = settle(&c.params, result.rows[0].g_om, &det).map_err(run.fail(run.operating_point()))?;
    let mut table = sweep_table(c, &result);
    table.meta("n_th", num(c.params.thermal_occupation()));
    table.meta("n_a_ss", num(moments.n_a));
    let row = result.rows[0];
    let o = row.observables;
    run.say(format!("pump power      {} W", c.pump_power));
    run.say(format!("g_om            {:.6e} /s", row.g_om));
    run.say(format!("n_th            {:.4}", c.params.thermal_occupation()));
    run.say(format!("N_b             {:.4}", o.n_b_ss));
    run.say(format!("N_a             {:.6e}", moments.n_a));
    run.say(format!("T_eff           {:.4} K", o.t_eff));
    run.say(format!("Gamma_eff       {:.6e} Hz", c.params.rate_to_hz(o.gamma_eff)));
    run.say(format!("cooling rate    {:.6}", o.cooling_rate));
    run.emit("steady", &table, None);
    Ok(())
}

fn sweep(run: &mut Run) -> Result<(), CliError> {
    let c = run.config;
    let powers = c.sweep.powers();
    let result = power_sweep(&c.params, &powers, &c.detuning()).map_err(run.fail(format!(
        "sweep {} to {} W, {} points",
        c.sweep.start, c.sweep.stop, c.sweep.count
    )))?;
    let table = sweep_table(c, &result);
    let n: Vec<f64> = result.rows.iter().map(|r| r.observables.n_b_ss).collect();
    run.say(format!("{} rows, N_b from {:.4} to {:.4}", table.len(), n[0], n[n.len() - 1]));
    run.emit("sweep", &table, Some(("pump power (W)", "phonon occupation", &powers, &n)));
    Ok(())
}

fn dynamics(run: &mut Run) -> Result<(), CliError> {
    let c = run.config;
    let det = c.detuning();
    let g = coupling_for_power(&c.params, c.pump_power);
    let t_end = c.dynamics.t_end_factor / c.params.gamma_m();
    let traj = integrate(&MomentState::thermal(&c.params), &c.params, g, &det, t_end, c.dynamics.tol)
        .map_err(run.fail(run.operating_point()))?;
    let mut table = Table::new("t_s,n_a,n_b,re_coherence,im_coherence");
    let samples = traj.thinned(c.dynamics.samples);
    for (t, s) in &samples {
        table.row(&[num(*t), num(s.n_a), num(s.n_b), num(s.coherence.re), num(s.coherence.im)]);
    }
    let closed = phonon_occupation_detuned(&c.params, g, &det);
    let last = traj.final_state();
    table.meta("method", traj.meta.method);
    table.meta("accepted_steps", traj.meta.accepted_steps);
    table.meta("rejected_steps", traj.meta.rejected_steps);
    table.meta("converged", traj.meta.converged);
    table.meta("n_b_closed_form", num(closed));
    run.say(format!(
        "t_end {:.4e} s, final N_b {:.6} (closed form {:.6}), converged {}",
        t_end, last.n_b, closed, traj.meta.converged
    ));
    let ts: Vec<f64> = samples.iter().map(|(t, _)| *t).collect();
    let nb: Vec<f64> = samples.iter().map(|(_, s)| s.n_b).collect();
    run.emit("dynamics", &table, Some(("time (s)", "phonon occupation", &ts, &nb)));
    Ok(())
}

fn langevin(run: &mut Run) -> Result<(), CliError> {
    let c = run.config;
    let det = c.detuning();
    let g = coupling_for_power(&c.params, c.pump_power);
    let spec = &c.langevin;
    let grid = TimeGrid::scaled(&c.params, g, &det, spec.dt_factor, spec.t_end_factor);
    let noise = NoiseSpec::thermal(&c.params);
    let ens = run_ensemble(&c.params, g, &det, &noise, &grid, spec.count, spec.base_seed).map_err(run.fail(
        format!("{}, count = {}, base_seed = {}", run.operating_point(), spec.count, spec.base_seed),
    ))?;
    let closed = phonon_occupation_detuned(&c.params, g, &det);
    let mut table = Table::new("power_w,n_b_mean,n_b_stderr,count");
    table.row(&[
        num(c.pump_power),
        num(ens.phonons.mean),
        num(ens.phonons.std_error),
        ens.count.to_string(),
    ]);
    table.meta("dt_s", num(grid.dt));
    table.meta("t_end_s", num(grid.t_end));
    table.meta("n_a_mean", num(ens.photons.mean));
    table.meta("n_a_stderr", num(ens.photons.std_error));
    table.meta("n_b_closed_form", num(closed));
    table.meta("z_score", num(ens.phonons.z_score(closed)));
    run.say(format!(
        "N_b = {:.4} ± {:.4} over {} trajectories (closed form {:.4}, {:.2} standard errors)",
        ens.phonons.mean,
        ens.phonons.std_error,
        ens.count,
        closed,
        ens.phonons.z_score(closed)
    ));
    let (x, y) = ([c.pump_power], [ens.phonons.mean]);
    run.emit("langevin", &table, Some(("pump power (W)", "phonon occupation", &x, &y)));
    Ok(())
}

fn spectrum(run: &mut Run) -> Result<(), CliError> {
    let c = run.config;
    let p = &c.params;
    let det = c.detuning();
    let g = coupling_for_power(p, c.pump_power);
    let grid = FrequencyGrid::scaled(p, g, &det, c.spectrum.span_factor, c.spectrum.points);
    let trace = acoustic_psd(p, g, &det, &grid).map_err(run.fail(run.operating_point()))?;
    let fit = fit_lorentzian(&trace).map_err(run.fail(format!("Lorentzian fit at {}", run.operating_point())))?;
    let closed = effective_linewidth(p, g);
    let n_b = phonon_occupation_detuned(p, g, &det);

    let mut table = Table::new("offset_hz,psd");
    let offsets_hz: Vec<f64> = trace.offsets.iter().map(|&w| p.rate_to_hz(w)).collect();
    for (w, s) in offsets_hz.iter().zip(&trace.psd) {
        table.row(&[num(*w), num(*s)]);
    }
    table.meta("psd_units", "quanta per unit rate; integral over rate divided by 2 pi gives the occupation");
    table.meta("fitted_fwhm_hz", num(p.rate_to_hz(fit.fwhm)));
    table.meta("fitted_center_hz", num(p.rate_to_hz(fit.center)));
    table.meta("fit_relative_residual", num(fit.relative_residual));
    table.meta("closed_form_gamma_eff_hz", num(p.rate_to_hz(closed)));
    table.meta("integrated_occupation", num(trace.integrated_occupation()));
    table.meta("n_b_ss", num(n_b));
    if det.mismatch() == 0.0 {
        table.meta("peak_height", num(anti_stokes_peak_height(p, g)));
    }
    run.say(format!(
        "fitted FWHM {:.4} MHz (closed-form linewidth {:.4} MHz, residual {:.2e}); integral {:.4} vs N_b {:.4}",
        p.rate_to_hz(fit.fwhm) / 1e6,
        p.rate_to_hz(closed) / 1e6,
        fit.relative_residual,
        trace.integrated_occupation(),
        n_b
    ));
    run.emit("spectrum", &table, Some(("offset (Hz)", "spectral density", &offsets_hz, &trace.psd)));
    Ok(())
}

fn depletion(run: &mut Run) -> Result<(), CliError> {
    let c = run.config;
    let p = &c.params;
    let d = &c.depletion;
    let opts = PropagationOptions {
        steps: d.steps,
        loss: d.loss,
    };
    let profile = propagate(p, c.pump_power, d.seed, &opts).map_err(run.fail(format!(
        "pump_power_w = {}, depletion_seed_w = {}",
        c.pump_power, d.seed
    )))?;
    let threshold = depletion_threshold(p, d.seed, d.fraction, d.max_power, &opts).map_err(run.fail(format!(
        "threshold for depletion_seed_w = {}, depletion_fraction = {}, depletion_max_power_w = {}",
        d.seed, d.fraction, d.max_power
    )))?;

    let mut table = Table::new("z_m,pump_w,stokes_w");
    for ((z, pw), s) in profile.z.iter().zip(&profile.pump).zip(&profile.stokes) {
        table.row(&[num(*z), num(*pw), num(*s)]);
    }
    table.meta("depletion_fraction", num(profile.depletion_fraction()));
    table.meta("stokes_log_gain", num(profile.stokes_log_gain()));
    table.meta("small_signal_gain", num(small_signal_gain(p, c.pump_power)));
    table.meta("conservation_defect", num(profile.conservation_defect()));
    table.meta("shooting_iterations", profile.iterations);
    table.meta("boundary_residual", num(profile.residual));
    table.meta("mean_pump_w", num(profile.mean_pump_power()));
    table.meta("threshold_w", num(threshold));
    table.meta("threshold_exponent", num(small_signal_gain(p, threshold)));
    run.say(format!(
        "pump {} W: depletion {:.4e}, Stokes gain {:.4} (small signal {:.4}); threshold {:.6} W",
        c.pump_power,
        profile.depletion_fraction(),
        profile.stokes_log_gain(),
        small_signal_gain(p, c.pump_power),
        threshold
    ));
    run.emit(
        "depletion",
        &table,
        Some(("position (m)", "pump power (W)", &profile.z, &profile.pump)),
    );

    // cooling driven by the length-averaged pump instead of the input pump
    let powers = c.sweep.powers();
    let mut cooling = Table::new("power_w,mean_pump_w,n_b_ss_input,n_b_ss_depleted");
    let mut depleted = Vec::with_capacity(powers.len());
    for &power in &powers {
        let mean = if power > 0.0 {
            propagate(p, power, d.seed, &opts)
                .map_err(run.fail(format!("pump_power_w = {power}, depletion_seed_w = {}", d.seed)))?
                .mean_pump_power()
        } else {
            0.0
        };
        let n_in = phonon_occupation_phase_matched(p, coupling_for_power(p, power));
        let n_mean = phonon_occupation_phase_matched(p, coupling_for_power(p, mean));
        depleted.push(n_mean);
        cooling.row(&[num(power), num(mean), num(n_in), num(n_mean)]);
    }
    cooling.meta("depletion_seed_w", num(d.seed));
    run.emit(
        "depletion_cooling",
        &cooling,
        Some(("pump power (W)", "phonon occupation", &powers, &depleted)),
    );
    Ok(())
}

struct ScoreRow {
    quantity: &'static str,
    value: f64,
    lower: f64,
    upper: f64,
}

impl ScoreRow {
    fn pass(&self) -> bool {
        self.value >= self.lower && self.value <= self.upper
    }
}

fn report(run: &mut Run) -> Result<(), CliError> {
    let c = run.config;
    let p = &c.params;
    let to_model = |context: &str| run.fail(context.to_string());
    let exact = |v: f64| (v * (1.0 - 1e-12), v * (1.0 + 1e-12));

    let n_th = p.thermal_occupation();
    let floor = occupation_floor(p);
    let floor_t = effective_temperature(floor, p.omega_b_hz).map_err(to_model("floor temperature"))?;
    let power_212 = power_for_occupation(p, 212.0).map_err(to_model("inverse solve for 212 phonons"))?;
    let t_212 = effective_temperature(212.0, p.omega_b_hz).map_err(to_model("temperature at 212 phonons"))?;
    let seed = seed_for_threshold(p, 20.0, c.depletion.fraction).map_err(to_model("seed for threshold exponent 20"))?;
    let opts = PropagationOptions {
        steps: c.depletion.steps,
        loss: c.depletion.loss,
    };
    let threshold = depletion_threshold(p, seed, c.depletion.fraction, c.depletion.max_power, &opts)
        .map_err(to_model("depletion threshold"))?;
    let (gm_lo, gm_hi) = exact(46.8e6);
    let (lim_lo, lim_hi) = exact(410.8e6);

    let rows = [
        ScoreRow { quantity: "thermal_occupation", value: n_th, lower: 821.7, upper: 838.3 },
        ScoreRow { quantity: "floor_occupation", value: floor, lower: 90.0, upper: 105.0 },
        ScoreRow { quantity: "floor_temperature_k", value: floor_t, lower: 33.0, upper: 37.0 },
        ScoreRow { quantity: "cooling_rate_floor", value: cooling_rate_limit(p), lower: 0.110, upper: 0.118 },
        ScoreRow {
            quantity: "gamma_eff_zero_power_hz",
            value: p.rate_to_hz(effective_linewidth(p, 0.0)),
            lower: gm_lo,
            upper: gm_hi,
        },
        ScoreRow { quantity: "gamma_eff_limit_hz", value: p.rate_to_hz(linewidth_limit(p)), lower: lim_lo, upper: lim_hi },
        ScoreRow { quantity: "power_for_212_phonons_w", value: power_212, lower: 0.19, upper: 0.20 },
        ScoreRow { quantity: "temperature_at_212_phonons_k", value: t_212, lower: 73.0, upper: 77.0 },
        ScoreRow { quantity: "cooling_depth_k", value: p.temperature - t_212, lower: 216.0, upper: 220.0 },
        ScoreRow { quantity: "depletion_threshold_w", value: threshold, lower: 0.23, upper: 0.26 },
        ScoreRow { quantity: "threshold_exponent", value: small_signal_gain(p, threshold), lower: 19.0, upper: 21.0 },
    ];

    let mut table = Table::new("quantity,value,lower,upper,status");
    let mut text = String::new();
    writeln!(text, "{:<30} {:>16} {:>27}  status", "quantity", "value", "band").unwrap();
    let mut passed = 0;
    for r in &rows {
        let status = if r.pass() { "PASS" } else { "FAIL" };
        passed += r.pass() as usize;
        table.row(&[r.quantity.to_string(), num(r.value), num(r.lower), num(r.upper), status.to_string()]);
        writeln!(
            text,
            "{:<30} {:>16.6} {:>27}  {status}",
            r.quantity,
            r.value,
            format!("[{}, {}]", short(r.lower), short(r.upper))
        )
        .unwrap();
    }
    writeln!(text, "{passed} of {} rows pass; threshold seed {seed:.4e} W", rows.len()).unwrap();
    table.meta("threshold_seed_w", num(seed));
    table.meta("passed", format!("{passed}/{}", rows.len()));
    run.say(text.trim_end());
    run.emit("report", &table, None);
    Ok(())
}

fn short(v: f64) -> String {
    if v.abs() >= 1e5 {
        format!("{v:.6e}")
    } else {
        format!("{v}")
    }
}
