//! Brute-force stochastic oracle: Euler–Maruyama ensembles of the linearized
//! Langevin equations in the frame rotating at Ω_B,
//!
//! ```text
//! da = (-iΔ1 - γ/2) a dt - i g b dt
//! db = (-iΔ2 - Γ/2) b dt - i g a dt + sqrt(Γ) dW_b,   ⟨|dW_b|²⟩ = n_th dt
//! ```
//!
//! Optical vacuum noise contributes nothing to normally ordered moments, so the
//! anti-Stokes field carries no noise term. Each trajectory starts with a = 0 and
//! b drawn from the thermal distribution.
//!
//! Trajectory `i` of an ensemble is seeded with
//! `splitmix64(base_seed ^ splitmix64(i))` and draws from ChaCha8. Per-trajectory
//! results are reduced in index order with compensated summation, so a given
//! `(base_seed, count, dt)` yields bit-identical summaries on any thread count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Detuning, SystemParams};

const MODULE: &str = "langevin-oracle";

/// Largest admissible dt in units of 1/(Γ_m + γ_o + 4g + |Δ1| + |Δ2|).
pub const MAX_DT_FACTOR: f64 = 0.05;
/// Shortest admissible run in units of 1/Γ_m.
pub const MIN_T_END_FACTOR: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Thermal occupation sourcing the acoustic noise.
    pub n_th: f64,
}

impl NoiseSpec {
    /// Optical noise is vacuum; zero in normal order.
    pub const OPTICAL_NOISE_OCCUPATION: f64 = 0.0;

    pub fn new(n_th: f64) -> Result<Self> {
        if !(n_th.is_finite() && n_th >= 0.0) {
            return Err(Error::invalid("n_th", format!("must be >= 0, got {n_th}")));
        }
        Ok(Self { n_th })
    }

    pub fn thermal(params: &SystemParams) -> Self {
        Self {
            n_th: params.thermal_occupation(),
        }
    }
}

/// Step size and duration for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub t_end: f64,
}

impl TimeGrid {
    /// dt = `dt_factor`/(Γ_m + γ_o + 4g + |Δ1| + |Δ2|), t_end = `t_end_factor`/Γ_m.
    pub fn scaled(params: &SystemParams, g_om: f64, det: &Detuning, dt_factor: f64, t_end_factor: f64) -> Self {
        Self {
            dt: dt_factor / fastest_rate(params, g_om, det),
            t_end: t_end_factor / params.gamma_m(),
        }
    }

    /// The coarsest admissible grid.
    pub fn default_for(params: &SystemParams, g_om: f64, det: &Detuning) -> Self {
        Self::scaled(params, g_om, det, MAX_DT_FACTOR, MIN_T_END_FACTOR)
    }

    fn steps(&self) -> usize {
        (self.t_end / self.dt).ceil() as usize
    }
}

fn fastest_rate(params: &SystemParams, g_om: f64, det: &Detuning) -> f64 {
    params.total_linewidth() + 4.0 * g_om + det.delta1.abs() + det.delta2.abs()
}

fn check_grid(params: &SystemParams, g_om: f64, det: &Detuning, grid: &TimeGrid) -> Result<()> {
    let dt_max = MAX_DT_FACTOR / fastest_rate(params, g_om, det);
    if !(grid.dt > 0.0 && grid.dt <= dt_max * (1.0 + 1e-12)) {
        return Err(Error::invalid("dt", format!("must lie in (0, {dt_max:e}], got {:e}", grid.dt)));
    }
    let t_min = MIN_T_END_FACTOR / params.gamma_m();
    if !(grid.t_end >= t_min * (1.0 - 1e-12)) {
        return Err(Error::invalid("t_end", format!("must be >= {t_min:e}, got {:e}", grid.t_end)));
    }
    Ok(())
}

/// Outcome of a single trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub a: Complex64,
    pub b: Complex64,
    /// Time average of |b|² over the second half of the run.
    pub mean_phonons: f64,
    /// Time average of |a|² over the second half of the run.
    pub mean_photons: f64,
}

/// Mixing function used to derive per-trajectory seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn trajectory_seed(base_seed: u64, index: usize) -> u64 {
    splitmix64(base_seed ^ splitmix64(index as u64))
}

#[derive(Clone, Copy)]
struct Stepper {
    decay_a: Complex64,
    decay_b: Complex64,
    coupling: Complex64,
    noise_amp: f64,
    bound: f64,
}

impl Stepper {
    fn new(params: &SystemParams, g_om: f64, det: &Detuning, noise: &NoiseSpec, dt: f64) -> Self {
        Self {
            decay_a: Complex64::new(-0.5 * params.gamma_o(), -det.delta1) * dt,
            decay_b: Complex64::new(-0.5 * params.gamma_m(), -det.delta2) * dt,
            coupling: Complex64::new(0.0, -g_om * dt),
            // sqrt(Γ) times a complex increment with ⟨|dW|²⟩ = n_th dt
            noise_amp: (params.gamma_m() * noise.n_th * dt / 2.0).sqrt(),
            bound: 1e6 * (noise.n_th + 1.0).sqrt(),
        }
    }

    #[inline]
    fn step(&self, a: Complex64, b: Complex64, dw: Complex64) -> (Complex64, Complex64) {
        (
            a + self.decay_a * a + self.coupling * b,
            b + self.decay_b * b + self.coupling * a + dw * self.noise_amp,
        )
    }
}

#[inline]
fn gaussian_pair(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn thermal_start(rng: &mut ChaCha8Rng, noise: &NoiseSpec) -> Complex64 {
    gaussian_pair(rng) * (noise.n_th / 2.0).sqrt()
}

fn unstable(step: usize, a: Complex64, b: Complex64) -> Error {
    Error::numerical(
        MODULE,
        format!("amplitude blow-up at step {step}: |a| = {:e}, |b| = {:e}", a.norm(), b.norm()),
    )
}

/// Integrates one trajectory with Euler–Maruyama.
pub fn simulate_trajectory(
    params: &SystemParams,
    g_om: f64,
    det: &Detuning,
    noise: &NoiseSpec,
    grid: &TimeGrid,
    seed: u64,
) -> Result<TrajectorySample> {
    params.validate()?;
    check_grid(params, g_om, det, grid)?;
    let stepper = Stepper::new(params, g_om, det, noise, grid.dt);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = grid.steps();
    let burn_in = steps / 2;

    let mut a = Complex64::new(0.0, 0.0);
    let mut b = thermal_start(&mut rng, noise);
    let (mut sum_b, mut sum_a) = (0.0, 0.0);
    for k in 1..=steps {
        let dw = gaussian_pair(&mut rng);
        (a, b) = stepper.step(a, b, dw);
        if k > burn_in {
            sum_b += b.norm_sqr();
            sum_a += a.norm_sqr();
        }
        if !(a.norm() <= stepper.bound && b.norm() <= stepper.bound) {
            return Err(unstable(k, a, b));
        }
    }
    let samples = (steps - burn_in) as f64;
    Ok(TrajectorySample {
        a,
        b,
        mean_phonons: sum_b / samples,
        mean_photons: sum_a / samples,
    })
}

/// Mean and standard error of a set of estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation divided by sqrt(count).
    pub std_error: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = neumaier_sum(values.iter().copied()) / n;
        let var = neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
        Self {
            mean,
            std_error: (var / n).sqrt(),
        }
    }

    /// |mean − expected| in units of the standard error.
    pub fn z_score(&self, expected: f64) -> f64 {
        (self.mean - expected).abs() / self.std_error
    }
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub count: usize,
    pub base_seed: u64,
    pub grid: TimeGrid,
    pub samples: Vec<TrajectorySample>,
    /// Phonon-number estimator over the per-trajectory time averages.
    pub phonons: Summary,
    pub photons: Summary,
}

impl TrajectoryEnsemble {
    fn from_samples(samples: Vec<TrajectorySample>, base_seed: u64, grid: TimeGrid) -> Self {
        let phonons: Vec<f64> = samples.iter().map(|s| s.mean_phonons).collect();
        let photons: Vec<f64> = samples.iter().map(|s| s.mean_photons).collect();
        Self {
            count: samples.len(),
            base_seed,
            grid,
            phonons: Summary::of(&phonons),
            photons: Summary::of(&photons),
            samples,
        }
    }
}

fn collect_indexed<T: Send>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Trajectory {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

fn check_count(count: usize) -> Result<()> {
    if count < 2 {
        return Err(Error::invalid("count", format!("need at least 2 trajectories, got {count}")));
    }
    Ok(())
}

/// Runs `count` independent trajectories in parallel.
pub fn run_ensemble(
    params: &SystemParams,
    g_om: f64,
    det: &Detuning,
    noise: &NoiseSpec,
    grid: &TimeGrid,
    count: usize,
    base_seed: u64,
) -> Result<TrajectoryEnsemble> {
    check_count(count)?;
    params.validate()?;
    check_grid(params, g_om, det, grid)?;
    let results: Vec<Result<TrajectorySample>> = (0..count)
        .into_par_iter()
        .map(|i| simulate_trajectory(params, g_om, det, noise, grid, trajectory_seed(base_seed, i)))
        .collect();
    let samples = collect_indexed(results)?;
    Ok(TrajectoryEnsemble::from_samples(samples, base_seed, *grid))
}

/// Coarse (dt) and fine (dt/2) ensembles driven by the same Brownian paths:
/// each coarse increment is the sum of the two fine increments it spans.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementPair {
    pub coarse: TrajectoryEnsemble,
    pub fine: TrajectoryEnsemble,
}

impl RefinementPair {
    /// Fine-minus-coarse mean phonon number.
    pub fn shift(&self) -> f64 {
        self.fine.phonons.mean - self.coarse.phonons.mean
    }
}

fn simulate_coupled_pair(
    params: &SystemParams,
    g_om: f64,
    det: &Detuning,
    noise: &NoiseSpec,
    grid: &TimeGrid,
    seed: u64,
) -> Result<(TrajectorySample, TrajectorySample)> {
    let half_dt = grid.dt / 2.0;
    let coarse_step = Stepper::new(params, g_om, det, noise, grid.dt);
    let fine_step = Stepper::new(params, g_om, det, noise, half_dt);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = grid.steps();
    let burn_in = steps / 2;

    let start = thermal_start(&mut rng, noise);
    let zero = Complex64::new(0.0, 0.0);
    let (mut ac, mut bc) = (zero, start);
    let (mut af, mut bf) = (zero, start);
    let (mut sum_bc, mut sum_ac, mut sum_bf, mut sum_af) = (0.0, 0.0, 0.0, 0.0);
    for k in 1..=steps {
        let w1 = gaussian_pair(&mut rng);
        let w2 = gaussian_pair(&mut rng);
        let (a1, b1) = fine_step.step(af, bf, w1);
        let mid_b = b1.norm_sqr();
        let mid_a = a1.norm_sqr();
        (af, bf) = fine_step.step(a1, b1, w2);
        // the fine increments carry variance n_th dt/2 each; their sum has n_th dt
        (ac, bc) = coarse_step.step(ac, bc, (w1 + w2) / 2f64.sqrt());
        if k > burn_in {
            sum_bc += bc.norm_sqr();
            sum_ac += ac.norm_sqr();
            sum_bf += 0.5 * (mid_b + bf.norm_sqr());
            sum_af += 0.5 * (mid_a + af.norm_sqr());
        }
        if !(bc.norm() <= coarse_step.bound && bf.norm() <= fine_step.bound) {
            return Err(unstable(k, ac, bc));
        }
    }
    let n = (steps - burn_in) as f64;
    Ok((
        TrajectorySample {
            a: ac,
            b: bc,
            mean_phonons: sum_bc / n,
            mean_photons: sum_ac / n,
        },
        TrajectorySample {
            a: af,
            b: bf,
            mean_phonons: sum_bf / n,
            mean_photons: sum_af / n,
        },
    ))
}

/// Step-size convergence check on coupled Brownian paths.
pub fn run_refinement_pair(
    params: &SystemParams,
    g_om: f64,
    det: &Detuning,
    noise: &NoiseSpec,
    grid: &TimeGrid,
    count: usize,
    base_seed: u64,
) -> Result<RefinementPair> {
    check_count(count)?;
    params.validate()?;
    check_grid(params, g_om, det, grid)?;
    let results: Vec<Result<(TrajectorySample, TrajectorySample)>> = (0..count)
        .into_par_iter()
        .map(|i| simulate_coupled_pair(params, g_om, det, noise, grid, trajectory_seed(base_seed, i)))
        .collect();
    let (coarse, fine): (Vec<_>, Vec<_>) = collect_indexed(results)?.into_iter().unzip();
    let fine_grid = TimeGrid {
        dt: grid.dt / 2.0,
        t_end: grid.t_end,
    };
    Ok(RefinementPair {
        coarse: TrajectoryEnsemble::from_samples(coarse, base_seed, *grid),
        fine: TrajectoryEnsemble::from_samples(fine, base_seed, fine_grid),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_uncoupled_decay_is_exponential() {
        let p = SystemParams::tapered_fiber();
        let det = Detuning::PHASE_MATCHED;
        let grid = TimeGrid::default_for(&p, 0.0, &det);
        let quiet = NoiseSpec::new(0.0).unwrap();
        // start from a thermal draw, then switch the bath off
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b0 = thermal_start(&mut rng, &NoiseSpec::thermal(&p));
        let stepper = Stepper::new(&p, 0.0, &det, &quiet, grid.dt);
        let (mut a, mut b) = (Complex64::new(0.0, 0.0), b0);
        // two intrinsic lifetimes
        let steps = (2.0 / (p.gamma_m() * grid.dt)).round() as usize;
        for _ in 0..steps {
            (a, b) = stepper.step(a, b, gaussian_pair(&mut rng));
        }
        let t = steps as f64 * grid.dt;
        // Euler amplification factor of the decay, per step
        let per_step = (1.0 - 0.5 * p.gamma_m() * grid.dt).powi(2);
        let expected = b0.norm_sqr() * per_step.powi(steps as i32);
        assert!(((b.norm_sqr() - expected) / expected).abs() < 1e-10);
        let exact = b0.norm_sqr() * (-p.gamma_m() * t).exp();
        assert!(((b.norm_sqr() - exact) / exact).abs() < 0.01);
        assert_eq!(a, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn zero_temperature_ensemble_is_empty() {
        let p = SystemParams::tapered_fiber();
        let det = Detuning::PHASE_MATCHED;
        let g = 0.5 * p.gamma_m();
        let grid = TimeGrid::default_for(&p, g, &det);
        let e = run_ensemble(&p, g, &det, &NoiseSpec::new(0.0).unwrap(), &grid, 16, 3).unwrap();
        assert_eq!(e.phonons.mean, 0.0);
        assert_eq!(e.photons.mean, 0.0);
    }

    #[test]
    fn ensemble_is_deterministic() {
        let p = SystemParams::tapered_fiber();
        let det = Detuning::new(p.gamma_m(), 0.0);
        let g = p.gamma_m();
        let grid = TimeGrid::default_for(&p, g, &det);
        let noise = NoiseSpec::thermal(&p);
        let a = run_ensemble(&p, g, &det, &noise, &grid, 64, 11).unwrap();
        let b = run_ensemble(&p, g, &det, &noise, &grid, 64, 11).unwrap();
        assert_eq!(a, b);
        let c = run_ensemble(&p, g, &det, &noise, &grid, 64, 12).unwrap();
        assert_ne!(a.phonons.mean, c.phonons.mean);
        // a single trajectory reproduces the ensemble member
        let one = simulate_trajectory(&p, g, &det, &noise, &grid, trajectory_seed(11, 5)).unwrap();
        assert_eq!(one, a.samples[5]);
    }

    #[test]
    fn grid_preconditions() {
        let p = SystemParams::tapered_fiber();
        let det = Detuning::PHASE_MATCHED;
        let noise = NoiseSpec::thermal(&p);
        let ok = TimeGrid::default_for(&p, 0.0, &det);
        let coarse = TimeGrid { dt: ok.dt * 2.0, ..ok };
        assert!(simulate_trajectory(&p, 0.0, &det, &noise, &coarse, 1).is_err());
        let short = TimeGrid { t_end: ok.t_end / 2.0, ..ok };
        assert!(simulate_trajectory(&p, 0.0, &det, &noise, &short, 1).is_err());
        assert!(run_ensemble(&p, 0.0, &det, &noise, &ok, 1, 1).is_err());
        assert!(NoiseSpec::new(-1.0).is_err());
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        let std = (5.0f64 / 3.0).sqrt();
        assert!((s.std_error - std / 2.0).abs() < 1e-15);
        assert!((s.z_score(2.5 + s.std_error) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seeds_differ_per_index() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| trajectory_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn failure_reports_index() {
        let err = collect_indexed::<u8>(vec![Ok(1), Err(Error::numerical(MODULE, "boom"))]).unwrap_err();
        assert!(matches!(err, Error::Trajectory { index: 1, .. }));
        assert!(err.is_numerical());
    }
}
