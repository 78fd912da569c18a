//! Steady-state backward Brillouin propagation of pump and Stokes along the waveguide.
//!
//! The pump enters at z = 0 and travels toward +z; the Stokes is seeded at z = L
//! and travels toward −z, growing as it goes. With equal photon energies and no
//! loss,
//!
//! ```text
//! dP_p/dz = −G P_p P_s
//! dP_s/dz = −G P_p P_s
//! ```
//!
//! so P_p − P_s is constant along z. The unknown Stokes output P_s(0) is found
//! by shooting.

use crate::error::{Error, Result};
use crate::model::SystemParams;

pub const DEFAULT_STEPS: usize = 2000;
pub const DEFAULT_SEED: f64 = 1e-9;
pub const DEFAULT_FRACTION: f64 = 0.01;
pub const DEFAULT_MAX_POWER: f64 = 10.0;

const MAX_BISECTIONS: usize = 200;
const BOUNDARY_TOLERANCE: f64 = 1e-10;
const THRESHOLD_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    /// RK4 steps over the length.
    pub steps: usize,
    /// Uniform power loss coefficient, 1/m.
    pub loss: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            loss: 0.0,
        }
    }
}

impl PropagationOptions {
    fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::invalid("steps", format!("need at least 2, got {}", self.steps)));
        }
        if !(self.loss.is_finite() && self.loss >= 0.0) {
            return Err(Error::invalid("loss", format!("must be finite and >= 0, got {}", self.loss)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationProfile {
    pub z: Vec<f64>,
    pub pump: Vec<f64>,
    pub stokes: Vec<f64>,
    pub pump_in: f64,
    pub stokes_seed: f64,
    /// Bisection steps taken by the shooting solve.
    pub iterations: usize,
    /// |P_p(0) − pump_in| / pump_in.
    pub residual: f64,
}

impl PropagationProfile {
    pub fn stokes_output(&self) -> f64 {
        self.stokes[0]
    }

    pub fn pump_output(&self) -> f64 {
        *self.pump.last().expect("profile has samples")
    }

    /// Fraction of the input pump drained by the Stokes.
    pub fn depletion_fraction(&self) -> f64 {
        1.0 - self.pump_output() / self.pump_in
    }

    /// ln(P_s(0) / P_s(L)).
    pub fn stokes_log_gain(&self) -> f64 {
        (self.stokes_output() / self.stokes.last().expect("profile has samples")).ln()
    }

    /// Largest drift of P_p − P_s from its value at z = 0, relative to the input pump.
    pub fn conservation_defect(&self) -> f64 {
        let c0 = self.pump[0] - self.stokes[0];
        self.pump
            .iter()
            .zip(&self.stokes)
            .map(|(p, s)| ((p - s) - c0).abs())
            .fold(0.0, f64::max)
            / self.pump_in
    }

    /// Pump power averaged over the length (trapezoid rule).
    pub fn mean_pump_power(&self) -> f64 {
        let length = self.z.last().expect("profile has samples") - self.z[0];
        let area: f64 = self
            .z
            .windows(2)
            .zip(self.pump.windows(2))
            .map(|(z, p)| 0.5 * (z[1] - z[0]) * (p[0] + p[1]))
            .sum();
        area / length
    }
}

/// Undepleted log-gain G_B·P·L of the Stokes seed.
pub fn small_signal_gain(params: &SystemParams, pump_in: f64) -> f64 {
    params.gain_total * pump_in * params.length
}

#[inline]
fn slope(gain: f64, loss: f64, p: f64, s: f64) -> (f64, f64) {
    let coupling = gain * p * s;
    (-coupling - loss * p, -coupling + loss * s)
}

/// RK4 march from z = L back to z = 0; returns (pump, stokes) ordered by
/// increasing z.
fn march(gain: f64, loss: f64, length: f64, steps: usize, pump_end: f64, seed: f64) -> (Vec<f64>, Vec<f64>) {
    let h = -length / steps as f64;
    let mut pump = Vec::with_capacity(steps + 1);
    let mut stokes = Vec::with_capacity(steps + 1);
    let (mut p, mut s) = (pump_end, seed);
    pump.push(p);
    stokes.push(s);
    for _ in 0..steps {
        (p, s) = rk4_step(gain, loss, h, p, s);
        pump.push(p);
        stokes.push(s);
    }
    pump.reverse();
    stokes.reverse();
    (pump, stokes)
}

#[inline]
fn rk4_step(gain: f64, loss: f64, h: f64, p: f64, s: f64) -> (f64, f64) {
    let k1 = slope(gain, loss, p, s);
    let k2 = slope(gain, loss, p + 0.5 * h * k1.0, s + 0.5 * h * k1.1);
    let k3 = slope(gain, loss, p + 0.5 * h * k2.0, s + 0.5 * h * k2.1);
    let k4 = slope(gain, loss, p + h * k3.0, s + h * k3.1);
    (
        p + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        s + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

fn entry_pump(gain: f64, loss: f64, length: f64, steps: usize, pump_end: f64, seed: f64) -> f64 {
    let h = -length / steps as f64;
    let (mut p, mut s) = (pump_end, seed);
    for _ in 0..steps {
        (p, s) = rk4_step(gain, loss, h, p, s);
    }
    p
}

/// Solves the two-point problem for pump `pump_in` at z = 0 and Stokes
/// `stokes_seed` at z = L.
///
/// Shoots from z = L, where the Stokes is known, bisecting the exit pump in
/// log space. Without loss this is bisection on the conserved P_p − P_s; it
/// stays well conditioned when the exit pump is far below the seed.
pub fn propagate(
    params: &SystemParams,
    pump_in: f64,
    stokes_seed: f64,
    options: &PropagationOptions,
) -> Result<PropagationProfile> {
    params.validate()?;
    options.validate()?;
    if !(pump_in.is_finite() && pump_in > 0.0) {
        return Err(Error::invalid("pump_in", format!("must be > 0, got {pump_in}")));
    }
    if !(stokes_seed.is_finite() && stokes_seed > 0.0) {
        return Err(Error::invalid("stokes_seed", format!("must be > 0, got {stokes_seed}")));
    }
    let (gain, loss, length, steps) = (params.gain_total, options.loss, params.length, options.steps);
    // a blow-up before z = 0 means the exit pump is too large
    let residual = |p_end: f64| {
        let r = (entry_pump(gain, loss, length, steps, p_end, stokes_seed) - pump_in) / pump_in;
        if r.is_nan() {
            f64::INFINITY
        } else {
            r
        }
    };

    let mut lo = pump_in * 1e-200;
    let mut hi = pump_in;
    let (r_lo, r_hi) = (residual(lo), residual(hi));
    if !(r_lo <= 0.0 && r_hi >= 0.0) {
        return Err(Error::Bracket {
            lo,
            hi,
            detail: format!("exit pump not bracketed for pump {pump_in:e} W, seed {stokes_seed:e} W"),
        });
    }
    let mut iterations = 0;
    let mut best = if r_hi.abs() < r_lo.abs() { (r_hi.abs(), hi) } else { (r_lo.abs(), lo) };
    while iterations < MAX_BISECTIONS && best.0 >= BOUNDARY_TOLERANCE {
        iterations += 1;
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let r = residual(mid);
        if r.abs() < best.0 {
            best = (r.abs(), mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (res, p_end) = best;
    if !(res < BOUNDARY_TOLERANCE) {
        return Err(Error::numerical(
            "depletion",
            format!(
                "shooting stalled at pump {pump_in:e} W, seed {stokes_seed:e} W: residual {res:e} on [{lo:e}, {hi:e}]"
            ),
        ));
    }
    let (pump, stokes) = march(gain, loss, length, steps, p_end, stokes_seed);
    let z = (0..=steps).map(|i| length * i as f64 / steps as f64).collect();
    Ok(PropagationProfile {
        z,
        pump,
        stokes,
        pump_in,
        stokes_seed,
        iterations,
        residual: res,
    })
}

/// Input pump at which the pump is depleted by `fraction`, by log bisection
/// on (0, `max_power`].
pub fn depletion_threshold(
    params: &SystemParams,
    seed: f64,
    fraction: f64,
    max_power: f64,
    options: &PropagationOptions,
) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 0.5) {
        return Err(Error::invalid("depletion_fraction", format!("must lie in (0, 0.5), got {fraction}")));
    }
    if !(max_power.is_finite() && max_power > 0.0) {
        return Err(Error::invalid("max_power", format!("must be > 0, got {max_power}")));
    }
    let depleted = |p: f64| propagate(params, p, seed, options).map(|prof| prof.depletion_fraction());
    let mut lo = max_power * 1e-12;
    let mut hi = max_power;
    if depleted(lo)? >= fraction || depleted(hi)? < fraction {
        return Err(Error::Bracket {
            lo,
            hi,
            detail: format!("depletion fraction {fraction} not reached inside the power range"),
        });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        if depleted(mid)? < fraction {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < THRESHOLD_TOLERANCE {
            return Ok((lo * hi).sqrt());
        }
    }
    Err(Error::Bracket {
        lo,
        hi,
        detail: "threshold bisection did not converge".into(),
    })
}

/// Exact lossless solution for given boundary data: (P_s(0), P_p(L)).
///
/// With C = P_p − P_s, u = 1/P_s obeys du/dz = G(1 + C u), so
/// u(0) = u(L) e^{−GCL} + (e^{−GCL} − 1)/C.
pub fn lossless_boundary_values(params: &SystemParams, pump_in: f64, stokes_seed: f64) -> (f64, f64) {
    let gl = params.gain_total * params.length;
    let entry = |p_end: f64| {
        let c = p_end - stokes_seed;
        let x = -gl * c;
        let growth = if c == 0.0 { -gl } else { x.exp_m1() / c };
        let u0 = x.exp() / stokes_seed + growth;
        if u0 <= 0.0 {
            f64::INFINITY
        } else {
            1.0 / u0 + c
        }
    };
    // entry pump increases with exit pump
    let (mut lo, mut hi) = (pump_in * 1e-200, pump_in);
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if entry(mid) < pump_in {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p_end = (lo * hi).sqrt();
    (pump_in - p_end + stokes_seed, p_end)
}

/// Stokes seed for which the lossless threshold at depletion `fraction`
/// sits at log-gain `exponent`.
pub fn seed_for_threshold(params: &SystemParams, exponent: f64, fraction: f64) -> Result<f64> {
    params.validate()?;
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::invalid("exponent", format!("must be > 0, got {exponent}")));
    }
    if !(fraction > 0.0 && fraction < 0.5) {
        return Err(Error::invalid("depletion_fraction", format!("must lie in (0, 0.5), got {fraction}")));
    }
    if params.gain_total == 0.0 {
        return Err(Error::Domain("no threshold without Brillouin gain".into()));
    }
    let pump = exponent / (params.gain_total * params.length);
    let depleted = |seed: f64| 1.0 - lossless_boundary_values(params, pump, seed).1 / pump;
    let (mut lo, mut hi) = (pump * 1e-30, pump);
    if depleted(lo) >= fraction || depleted(hi) < fraction {
        return Err(Error::Bracket {
            lo,
            hi,
            detail: "seed not bracketed".into(),
        });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        if depleted(mid) < fraction {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < THRESHOLD_TOLERANCE {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn no_gain_means_flat_profile() {
        let p = SystemParams {
            gain_total: 0.0,
            ..SystemParams::tapered_fiber()
        };
        let prof = propagate(&p, 0.3, 1e-6, &PropagationOptions::default()).unwrap();
        assert!(prof.pump.iter().all(|&v| v == 0.3));
        assert!(prof.stokes.iter().all(|&v| rel(v, 1e-6) < 1e-10));
    }

    #[test]
    fn low_power_is_undepleted() {
        let p = SystemParams::tapered_fiber();
        let prof = propagate(&p, 0.1, 1e-9, &PropagationOptions::default()).unwrap();
        assert!(prof.depletion_fraction() < 0.01);
        assert!(prof.depletion_fraction() > 0.0);
        assert!(prof.residual < 1e-10);
        assert!(prof.conservation_defect() < 1e-9);
        assert!(rel(prof.stokes_log_gain(), small_signal_gain(&p, 0.1)) < 0.005);
    }

    #[test]
    fn matches_exact_solution() {
        let p = SystemParams::tapered_fiber();
        for &(pump, seed) in &[(0.05, 1e-9), (0.2, 1e-9), (0.3, 1e-9), (0.25, 1e-6), (1.0, 1e-3)] {
            let prof = propagate(&p, pump, seed, &PropagationOptions::default()).unwrap();
            let (s0, p_l) = lossless_boundary_values(&p, pump, seed);
            assert!(rel(prof.stokes_output(), s0) < 1e-8, "P={pump}: {} vs {s0}", prof.stokes_output());
            assert!(rel(prof.pump_output(), p_l) < 1e-8);
        }
    }

    #[test]
    fn grid_refinement_is_converged() {
        let p = SystemParams::tapered_fiber();
        for &pump in &[0.1, 0.25, 0.5] {
            let coarse = propagate(&p, pump, 1e-9, &PropagationOptions::default()).unwrap();
            let fine = propagate(
                &p,
                pump,
                1e-9,
                &PropagationOptions {
                    steps: 2 * DEFAULT_STEPS,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(rel(coarse.stokes_output(), fine.stokes_output()) < 1e-6);
        }
    }

    #[test]
    fn small_signal_examples() {
        let p = SystemParams::tapered_fiber();
        assert_eq!(small_signal_gain(&p, 0.0), 0.0);
        assert!((small_signal_gain(&p, 0.24) - 19.68).abs() < 1e-9);
        assert_eq!(small_signal_gain(&p, 0.4), 2.0 * small_signal_gain(&p, 0.2));
    }

    #[test]
    fn threshold_decreases_with_seed() {
        let p = SystemParams::tapered_fiber();
        let opts = PropagationOptions::default();
        let weak = depletion_threshold(&p, 1e-12, 0.01, 10.0, &opts).unwrap();
        let strong = depletion_threshold(&p, 1e-6, 0.01, 10.0, &opts).unwrap();
        assert!(strong < weak);
    }

    #[test]
    fn threshold_consistent_with_seed_choice() {
        let p = SystemParams::tapered_fiber();
        let seed = seed_for_threshold(&p, 20.0, 0.01).unwrap();
        let th = depletion_threshold(&p, seed, 0.01, 10.0, &PropagationOptions::default()).unwrap();
        assert!(rel(th, 20.0 / 82.0) < 1e-6, "{th}");
        let exponent = small_signal_gain(&p, th);
        assert!((19.0..=21.0).contains(&exponent));
    }

    #[test]
    fn threshold_vanishes_with_fraction() {
        let p = SystemParams::tapered_fiber();
        let seed = 1e-6;
        let floor = seed * p.gain_total * p.length;
        let opts = PropagationOptions::default();
        let mut last = f64::INFINITY;
        for &f in &[0.1, 0.03, 0.01, 3e-3, 1e-3, 3e-4, 1e-4] {
            assert!(f > floor);
            let th = depletion_threshold(&p, seed, f, 10.0, &opts).unwrap();
            assert!(th < last);
            last = th;
        }
        // just above the zero-power depletion the threshold collapses
        let near = depletion_threshold(&p, seed, floor * 1.001, 10.0, &opts).unwrap();
        assert!(near < 1e-3, "{near}");
        assert!(matches!(
            depletion_threshold(&p, seed, floor * 0.5, 10.0, &opts),
            Err(Error::Bracket { .. })
        ));
    }

    #[test]
    fn unreachable_fraction_is_bracket_error() {
        let p = SystemParams::tapered_fiber();
        let err = depletion_threshold(&p, 1e-12, 0.4, 0.01, &PropagationOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn loss_attenuates_pump() {
        let p = SystemParams {
            gain_total: 0.0,
            ..SystemParams::tapered_fiber()
        };
        let opts = PropagationOptions { loss: 0.2, ..Default::default() };
        let prof = propagate(&p, 0.1, 1e-9, &opts).unwrap();
        assert!(rel(prof.pump_output(), 0.1 * (-0.1f64).exp()) < 1e-9);
        assert!(rel(prof.stokes_output(), 1e-9 * (-0.1f64).exp()) < 1e-9);
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = SystemParams::tapered_fiber();
        let opts = PropagationOptions::default();
        assert!(propagate(&p, 0.0, 1e-9, &opts).is_err());
        assert!(propagate(&p, 0.1, 0.0, &opts).is_err());
        assert!(depletion_threshold(&p, 1e-9, 0.5, 10.0, &opts).is_err());
        assert!(depletion_threshold(&p, 1e-9, 0.0, 10.0, &opts).is_err());
    }

    #[test]
    fn mean_pump_below_input() {
        let p = SystemParams::tapered_fiber();
        let prof = propagate(&p, 0.3, 1e-9, &PropagationOptions::default()).unwrap();
        let mean = prof.mean_pump_power();
        assert!(mean < 0.3 && mean > prof.pump_output());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn profile_invariants(pump in 1e-3f64..1.0, log_seed in -12.0f64..-3.0) {
            let p = SystemParams::tapered_fiber();
            let prof = propagate(&p, pump, 10f64.powf(log_seed), &PropagationOptions::default()).unwrap();
            prop_assert!(prof.conservation_defect() < 1e-9);
            prop_assert!(prof.pump.iter().chain(&prof.stokes).all(|&v| v >= 0.0));
            prop_assert!(prof.pump.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(prof.stokes.windows(2).all(|w| w[1] <= w[0]));
        }

        #[test]
        fn weak_depletion_follows_exponential(pump in 1e-3f64..0.15) {
            let p = SystemParams::tapered_fiber();
            let prof = propagate(&p, pump, 1e-12, &PropagationOptions::default()).unwrap();
            prop_assume!(prof.depletion_fraction() < 1e-3);
            let ratio = prof.stokes_output() / prof.stokes_seed;
            prop_assert!(rel(ratio, small_signal_gain(&p, pump).exp()) < 0.005);
        }
    }
}
