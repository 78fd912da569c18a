//! Second-order moment dynamics of the coupled anti-Stokes/acoustic pair.
//!
//! The state is (N_a, N_b, ⟨a†b⟩). The noise correlators are already folded in,
//! leaving the deterministic system
//!
//! ```text
//! dN_a/dt = -γ N_a - i g (c - c*)
//! dN_b/dt = -Γ N_b + i g (c - c*) + Γ n_th
//! dc/dt   = -(i(Δ1 - Δ2) + (γ + Γ)/2) c - i g N_a + i g N_b
//! ```
//!
//! with γ the optical loss and Γ the acoustic dissipation. Integration runs in
//! time scaled by 1/(Γ + γ); the public API uses seconds.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Detuning, SystemParams};

const MODULE: &str = "moment-dynamics";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentState {
    /// Mean anti-Stokes photon number.
    pub n_a: f64,
    /// Mean phonon number.
    pub n_b: f64,
    /// Cross-coherence ⟨a†b⟩.
    pub coherence: Complex64,
}

impl MomentState {
    pub fn new(n_a: f64, n_b: f64, coherence: Complex64) -> Self {
        Self { n_a, n_b, coherence }
    }

    /// Uncoupled thermal state (0, n_th, 0).
    pub fn thermal(params: &SystemParams) -> Self {
        Self::new(0.0, params.thermal_occupation(), Complex64::new(0.0, 0.0))
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.n_a, self.n_b, self.coherence.re, self.coherence.im]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], Complex64::new(v[2], v[3]))
    }

    /// |⟨a†b⟩|² − N_a (N_b + 1); non-positive for any physical state.
    pub fn cauchy_schwarz_excess(&self) -> f64 {
        self.coherence.norm_sqr() - self.n_a * (self.n_b + 1.0)
    }

    fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Time derivative of the moments.
pub fn moment_derivative(
    state: &MomentState,
    params: &SystemParams,
    g_om: f64,
    det: &Detuning,
) -> MomentState {
    let rates = Rates::new(params, g_om, det);
    MomentState::from_array(rates.derivative(&state.to_array()))
}

#[derive(Debug, Clone, Copy)]
struct Rates {
    gamma_o: f64,
    gamma_m: f64,
    g: f64,
    mismatch: f64,
    source: f64,
}

impl Rates {
    fn new(params: &SystemParams, g_om: f64, det: &Detuning) -> Self {
        Self {
            gamma_o: params.gamma_o(),
            gamma_m: params.gamma_m(),
            g: g_om,
            mismatch: det.mismatch(),
            source: params.gamma_m() * params.thermal_occupation(),
        }
    }

    fn scaled(self, s: f64) -> Self {
        Self {
            gamma_o: self.gamma_o * s,
            gamma_m: self.gamma_m * s,
            g: self.g * s,
            mismatch: self.mismatch * s,
            source: self.source * s,
        }
    }

    /// Flat real form; -i g (c - c*) = 2 g Im c.
    #[inline]
    fn derivative(&self, y: &[f64; 4]) -> [f64; 4] {
        let [n_a, n_b, re, im] = *y;
        let half = 0.5 * (self.gamma_o + self.gamma_m);
        let flux = 2.0 * self.g * im;
        [
            -self.gamma_o * n_a + flux,
            -self.gamma_m * n_b - flux + self.source,
            -half * re + self.mismatch * im,
            -self.mismatch * re - half * im - self.g * (n_a - n_b),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub method: &'static str,
    /// Largest step the controller may take, s.
    pub max_step: f64,
    /// Step size in use at the end of the run, s.
    pub final_step: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Whether the final state is stationary to within the tolerance.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// (time in s, state), strictly increasing in time.
    pub samples: Vec<(f64, MomentState)>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn final_state(&self) -> MomentState {
        self.samples.last().map(|s| s.1).unwrap_or_default()
    }

    pub fn final_time(&self) -> f64 {
        self.samples.last().map(|s| s.0).unwrap_or(0.0)
    }

    /// At most `count` samples spread evenly over the run, always keeping both ends.
    pub fn thinned(&self, count: usize) -> Vec<(f64, MomentState)> {
        let n = self.samples.len();
        if count >= n || n < 2 {
            return self.samples.clone();
        }
        let count = count.max(2);
        let mut out: Vec<(f64, MomentState)> = (0..count)
            .map(|k| self.samples[k * (n - 1) / (count - 1)])
            .collect();
        out.dedup_by(|a, b| a.0 == b.0);
        out
    }
}

fn rk4_step(rates: &Rates, y: &[f64; 4], h: f64) -> [f64; 4] {
    let add = |a: &[f64; 4], b: &[f64; 4], s: f64| {
        [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]]
    };
    let k1 = rates.derivative(y);
    let k2 = rates.derivative(&add(y, &k1, 0.5 * h));
    let k3 = rates.derivative(&add(y, &k2, 0.5 * h));
    let k4 = rates.derivative(&add(y, &k3, h));
    let mut out = *y;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn inf_norm(v: &[f64; 4]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Integrates the moment equations from `initial` to `t_end` seconds.
///
/// Classical RK4. Each step is compared against two half steps; the step is
/// accepted when their difference is within `tol` relative to the state and
/// never exceeds 0.1/(Γ_m + γ_o + 4 g_om).
pub fn integrate(
    initial: &MomentState,
    params: &SystemParams,
    g_om: f64,
    det: &Detuning,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory> {
    params.validate()?;
    det.validate()?;
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::invalid("t_end", format!("must be > 0, got {t_end}")));
    }
    if !(tol > 1e-14 && tol < 1e-2) {
        return Err(Error::invalid("tol", format!("must lie in (1e-14, 1e-2), got {tol}")));
    }
    if !(g_om.is_finite() && g_om >= 0.0) {
        return Err(Error::invalid("g_om", format!("must be >= 0, got {g_om}")));
    }
    if initial.n_a < 0.0 || initial.n_b < 0.0 || initial.cauchy_schwarz_excess() > 0.0 {
        return Err(Error::Domain(format!("unphysical initial moments {initial:?}")));
    }

    let total = params.total_linewidth();
    let time_unit = 1.0 / total;
    let rates = Rates::new(params, g_om, det).scaled(time_unit);
    let tau_end = t_end / time_unit;
    let h_max = 0.1 * total / (total + 4.0 * g_om);
    let h_min = 1e-14 * tau_end.max(1.0);

    let mut y = initial.to_array();
    let mut tau = 0.0;
    let mut h = h_max;
    let mut samples = vec![(0.0, *initial)];
    let (mut accepted, mut rejected) = (0usize, 0usize);

    while tau < tau_end {
        let last = tau + h >= tau_end;
        let step = if last { tau_end - tau } else { h };
        let full = rk4_step(&rates, &y, step);
        let mid = rk4_step(&rates, &y, 0.5 * step);
        let fine = rk4_step(&rates, &mid, 0.5 * step);
        let diff = [fine[0] - full[0], fine[1] - full[1], fine[2] - full[2], fine[3] - full[3]];
        let scale = inf_norm(&fine).max(1.0);
        let err = inf_norm(&diff) / 15.0 / (tol * scale);

        if !err.is_finite() {
            return Err(Error::numerical(MODULE, format!("non-finite state at t = {:e} s", tau * time_unit)));
        }
        if err <= 1.0 {
            tau = if last { tau_end } else { tau + step };
            y = fine;
            accepted += 1;
            let state = MomentState::from_array(y);
            check_invariants(&state, tol, tau * time_unit)?;
            samples.push((tau * time_unit, state));
        } else {
            rejected += 1;
        }
        let grow = if err == 0.0 { 2.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 2.0) };
        if !last || err > 1.0 {
            h = (step * grow).min(h_max);
        }
        if h < h_min {
            return Err(Error::numerical(
                MODULE,
                format!("step size underflow (h = {:e} s) at t = {:e} s", h * time_unit, tau * time_unit),
            ));
        }
    }

    let final_state = MomentState::from_array(y);
    let residual = inf_norm(&rates.derivative(&y));
    let converged = residual <= tol * final_state.max_abs().max(1.0);
    Ok(Trajectory {
        samples,
        meta: TrajectoryMeta {
            method: "rk4-step-halving",
            max_step: h_max * time_unit,
            final_step: h * time_unit,
            accepted_steps: accepted,
            rejected_steps: rejected,
            converged,
        },
    })
}

fn check_invariants(state: &MomentState, tol: f64, t: f64) -> Result<()> {
    let scale = state.max_abs().max(1.0);
    let eps = 10.0 * tol * scale;
    if state.n_a < -eps || state.n_b < -eps {
        return Err(Error::numerical(
            MODULE,
            format!("negative occupation at t = {t:e} s: {state:?}"),
        ));
    }
    if state.cauchy_schwarz_excess() > eps * scale {
        return Err(Error::numerical(
            MODULE,
            format!("Cauchy-Schwarz bound violated at t = {t:e} s: {state:?}"),
        ));
    }
    Ok(())
}

/// Stationary moments from a direct solve of the 4×4 real linear system.
pub fn settle(params: &SystemParams, g_om: f64, det: &Detuning) -> Result<MomentState> {
    let rates = Rates::new(params, g_om, det);
    if !(rates.gamma_m > 0.0 && rates.gamma_o > 0.0) {
        return Err(Error::Singular(MODULE));
    }
    let half = 0.5 * (rates.gamma_o + rates.gamma_m);
    let (g, d) = (rates.g, rates.mismatch);
    // rows: dN_a, dN_b, dRe c, dIm c; unknowns N_a, N_b, Re c, Im c
    let a = [
        [-rates.gamma_o, 0.0, 0.0, 2.0 * g],
        [0.0, -rates.gamma_m, 0.0, -2.0 * g],
        [0.0, 0.0, -half, d],
        [-g, g, -d, -half],
    ];
    let b = [0.0, -rates.source, 0.0, 0.0];
    let x = linalg::solve(a, b).ok_or(Error::Singular(MODULE))?;
    Ok(MomentState::from_array(x))
}
