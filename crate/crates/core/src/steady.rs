//! Closed-form steady state of the cooled acoustic mode.
//!
//! All functions take the coupling `g_om` in rate units. The occupation formulas
//! come from the stationary point of the second-order moment equations; the
//! effective linewidth is defined through Γ_m/Γ_eff = N_b/n_th.

use crate::error::{Error, Result};
use crate::model::{coupling_for_power, effective_temperature, Detuning, SystemParams};

/// Occupations below this report an effective temperature of exactly 0 K.
pub const MIN_OCCUPATION_FOR_TEMPERATURE: f64 = 1e-12;

/// Steady-state phonon number for phase-matched modes:
/// N_b = [4g² + γ(γ+Γ)] / [4g² + γΓ] · Γ/(γ+Γ) · n_th.
pub fn phonon_occupation_phase_matched(params: &SystemParams, g_om: f64) -> f64 {
    let (gm, go) = (params.gamma_m(), params.gamma_o());
    let g2 = 4.0 * g_om * g_om;
    (g2 + go * (go + gm)) / (g2 + go * gm) * gm / (go + gm) * params.thermal_occupation()
}

/// Steady-state phonon number with wavenumber-induced shifts; depends on the
/// detuning only through (Δ1 − Δ2)².
pub fn phonon_occupation_detuned(params: &SystemParams, g_om: f64, det: &Detuning) -> f64 {
    let (gm, go) = (params.gamma_m(), params.gamma_o());
    let total = gm + go;
    let g2 = 4.0 * g_om * g_om;
    let d2 = 4.0 * det.mismatch().powi(2);
    let numerator = g2 * total + go * total * total + go * d2;
    let denominator = g2 * total + go * gm * total + go * gm * d2 / total;
    numerator / denominator * gm / total * params.thermal_occupation()
}

/// Optically enhanced damping Γ_eff = Γ_m + 4g²γ_o / (4g² + γ_o(Γ_m + γ_o)).
pub fn effective_linewidth(params: &SystemParams, g_om: f64) -> f64 {
    let (gm, go) = (params.gamma_m(), params.gamma_o());
    let g2 = 4.0 * g_om * g_om;
    gm + g2 * go / (g2 + go * (gm + go))
}

/// R = Γ_m / Γ_eff, the final-to-initial occupation ratio.
pub fn cooling_rate(params: &SystemParams, g_om: f64) -> f64 {
    params.gamma_m() / effective_linewidth(params, g_om)
}

/// Strong-drive limit of [`effective_linewidth`]: Γ_m + γ_o.
pub fn linewidth_limit(params: &SystemParams) -> f64 {
    params.total_linewidth()
}

/// Strong-drive limit of [`cooling_rate`]: Γ_m / (Γ_m + γ_o).
pub fn cooling_rate_limit(params: &SystemParams) -> f64 {
    params.gamma_m() / params.total_linewidth()
}

/// Strong-drive limit of [`phonon_occupation_phase_matched`].
pub fn occupation_floor(params: &SystemParams) -> f64 {
    cooling_rate_limit(params) * params.thermal_occupation()
}

/// Coupling that produces effective linewidth `gamma_eff`; inverse of the linewidth closed form
/// on the open interval (Γ_m, Γ_m + γ_o).
pub fn coupling_for_linewidth(params: &SystemParams, gamma_eff: f64) -> Result<f64> {
    let (gm, go) = (params.gamma_m(), params.gamma_o());
    if !(gamma_eff >= gm && gamma_eff < gm + go) {
        return Err(Error::Domain(format!(
            "linewidth {gamma_eff:e} outside [{gm:e}, {:e})",
            gm + go
        )));
    }
    let optical = gamma_eff - gm;
    let four_g2 = optical * go * (gm + go) / (go - optical);
    Ok((four_g2 / 4.0).sqrt())
}

/// Effective temperature of an occupation, with the 10⁻¹² guard applied.
pub fn guarded_temperature(occupation: f64, omega_hz: f64) -> f64 {
    if occupation < MIN_OCCUPATION_FOR_TEMPERATURE {
        0.0
    } else {
        effective_temperature(occupation, omega_hz).unwrap_or(0.0)
    }
}

/// Steady observables of the acoustic mode at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyObservables {
    pub n_b_ss: f64,
    /// Γ_m · n_th / N_b, equal to the closed-form linewidth at phase matching.
    pub gamma_eff: f64,
    /// N_b / n_th.
    pub cooling_rate: f64,
    /// Effective mode temperature, K.
    pub t_eff: f64,
}

impl SteadyObservables {
    pub fn evaluate(params: &SystemParams, g_om: f64, det: &Detuning) -> Self {
        let n_th = params.thermal_occupation();
        let n_b_ss = phonon_occupation_detuned(params, g_om, det);
        let cooling_rate = n_b_ss / n_th;
        Self {
            n_b_ss,
            gamma_eff: params.gamma_m() / cooling_rate,
            cooling_rate,
            t_eff: guarded_temperature(n_b_ss, params.omega_b_hz),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub power: f64,
    pub g_om: f64,
    pub observables: SteadyObservables,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Checks that `powers` is non-empty, non-negative and strictly increasing.
pub fn validate_powers(powers: &[f64]) -> Result<()> {
    if powers.is_empty() {
        return Err(Error::invalid("powers", "must not be empty"));
    }
    for (i, &p) in powers.iter().enumerate() {
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::invalid("powers", format!("entry {i} is {p}, must be >= 0")));
        }
    }
    if let Some(i) = powers.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "powers",
            format!("not strictly increasing at index {}", i + 1),
        ));
    }
    Ok(())
}

/// Tabulates the steady state over pump powers.
pub fn power_sweep(params: &SystemParams, powers: &[f64], det: &Detuning) -> Result<SweepResult> {
    params.validate()?;
    det.validate()?;
    validate_powers(powers)?;
    let rows = powers
        .iter()
        .map(|&power| {
            let g_om = coupling_for_power(params, power);
            SweepRow {
                power,
                g_om,
                observables: SteadyObservables::evaluate(params, g_om, det),
            }
        })
        .collect();
    Ok(SweepResult { rows })
}

/// Pump power at which the phase-matched occupation drops to `target`,
/// by bisection on the closed-form occupation.
pub fn power_for_occupation(params: &SystemParams, target: f64) -> Result<f64> {
    let n_th = params.thermal_occupation();
    let floor = occupation_floor(params);
    if !(target > floor && target <= n_th) {
        return Err(Error::Domain(format!(
            "target occupation {target} outside ({floor}, {n_th}]"
        )));
    }
    let occupation = |p: f64| phonon_occupation_phase_matched(params, coupling_for_power(params, p));
    let mut lo = 0.0;
    let mut hi = 1.0;
    while occupation(hi) > target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Bracket {
                lo,
                hi,
                detail: "occupation target not reached".into(),
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if occupation(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RatesConvention;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn uncoupled_mode_is_thermal() {
        let p = SystemParams::tapered_fiber();
        let n_th = p.thermal_occupation();
        assert!(rel(phonon_occupation_phase_matched(&p, 0.0), n_th) < 1e-15);
        let det = Detuning::new(3e8, -1e7);
        assert!(rel(phonon_occupation_detuned(&p, 0.0, &det), n_th) < 1e-15);
        assert_eq!(effective_linewidth(&p, 0.0), 46.8e6);
        assert_eq!(cooling_rate(&p, 0.0), 1.0);
    }

    #[test]
    fn strong_drive_limits() {
        let p = SystemParams::tapered_fiber();
        assert!(rel(linewidth_limit(&p), 410.8e6) < 1e-15);
        let r = cooling_rate_limit(&p);
        assert!((r - 0.1139).abs() < 1e-4);
        let floor = occupation_floor(&p);
        assert!((floor - 94.19).abs() < 0.01, "floor = {floor}");
        // the formulas approach the limit functions
        let g = 1e13;
        assert!(rel(phonon_occupation_phase_matched(&p, g), floor) < 1e-6);
        assert!(rel(effective_linewidth(&p, g), 410.8e6) < 1e-6);
    }

    #[test]
    fn one_hundred_milliwatt_operating_point() {
        let p = SystemParams::tapered_fiber();
        let g = coupling_for_power(&p, 0.1);
        let n = phonon_occupation_phase_matched(&p, g);
        let gamma = effective_linewidth(&p, g);
        // 292.1 phonons, 132.46 MHz, R = 0.3533 from direct evaluation
        assert!((n - 292.1).abs() < 0.1, "n = {n}");
        assert!(rel(gamma, 132.46e6) < 1e-4, "gamma = {gamma}");
        let r = cooling_rate(&p, g);
        assert!((r - 0.3533).abs() < 1e-4);
        assert!(rel(r, n / p.thermal_occupation()) < 1e-13);
    }

    #[test]
    fn phase_matched_special_case_of_detuned() {
        let p = SystemParams::tapered_fiber();
        for &common in &[0.0, 1e7, -4.2e8] {
            let det = Detuning::new(common, common);
            for &g in &[0.0, 1e7, 1e8, 1e9] {
                let a = phonon_occupation_detuned(&p, g, &det);
                let b = phonon_occupation_phase_matched(&p, g);
                assert!(rel(a, b) < 1e-14);
            }
        }
    }

    #[test]
    fn linewidth_inverse() {
        let p = SystemParams::tapered_fiber();
        let g = coupling_for_linewidth(&p, 2.0 * p.gamma_m()).unwrap();
        assert!(rel(cooling_rate(&p, g), 0.5) < 1e-13);
        assert!(coupling_for_linewidth(&p, 500e6).is_err());
        assert!(coupling_for_linewidth(&p, 10e6).is_err());
    }

    #[test]
    fn occupation_inverse_solve() {
        let p = SystemParams::tapered_fiber();
        let power = power_for_occupation(&p, 212.0).unwrap();
        let n = phonon_occupation_phase_matched(&p, coupling_for_power(&p, power));
        assert!(rel(n, 212.0) < 1e-12);
        // cross-check through Γ_eff = Γ_m n_th / 212 and the closed-form inverse
        let gamma = p.gamma_m() * p.thermal_occupation() / 212.0;
        let g = coupling_for_linewidth(&p, gamma).unwrap();
        let closed = crate::model::power_for_coupling(&p, g);
        assert!(rel(power, closed) < 1e-10);
        assert!((power - 0.195).abs() < 0.005, "P = {power}");
        assert!(power_for_occupation(&p, 50.0).is_err());
    }

    #[test]
    fn sweep_rows() {
        let p = SystemParams::tapered_fiber();
        let single = power_sweep(&p, &[0.0], &Detuning::PHASE_MATCHED).unwrap();
        assert_eq!(single.len(), 1);
        let row = single.rows[0];
        assert!(rel(row.observables.n_b_ss, p.thermal_occupation()) < 1e-15);
        assert!(rel(row.observables.cooling_rate, 1.0) < 1e-15);
        assert!(rel(row.observables.t_eff, 293.0) < 1e-12);

        let powers: Vec<f64> = (0..40).map(|i| i as f64 * 0.5).collect();
        let sweep = power_sweep(&p, &powers, &Detuning::PHASE_MATCHED).unwrap();
        assert!(sweep
            .rows
            .windows(2)
            .all(|w| w[1].observables.n_b_ss <= w[0].observables.n_b_ss));
        let last = sweep.rows.last().unwrap().observables;
        assert!(last.n_b_ss > 90.0 && last.n_b_ss < 105.0);
        assert!(last.t_eff > 33.0 && last.t_eff < 37.0);
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let p = SystemParams::tapered_fiber();
        let det = Detuning::PHASE_MATCHED;
        assert!(power_sweep(&p, &[], &det).is_err());
        assert!(power_sweep(&p, &[0.1, 0.05], &det).is_err());
        assert!(power_sweep(&p, &[0.1, 0.1], &det).is_err());
        assert!(power_sweep(&p, &[-0.1, 0.1], &det).is_err());
    }

    #[test]
    fn temperature_guard() {
        assert_eq!(guarded_temperature(1e-13, 7.38e9), 0.0);
        assert!(guarded_temperature(1.0, 7.38e9) > 0.0);
    }

    #[test]
    fn observables_invariants() {
        let p = SystemParams::tapered_fiber();
        for &g in &[0.0, 1e6, 1e8, 1e10] {
            let obs = SteadyObservables::evaluate(&p, g, &Detuning::PHASE_MATCHED);
            assert!(obs.gamma_eff >= p.gamma_m() * (1.0 - 1e-15));
            assert!(obs.gamma_eff <= p.total_linewidth() * (1.0 + 1e-15));
            assert!(obs.cooling_rate <= 1.0 && obs.cooling_rate >= cooling_rate_limit(&p) * (1.0 - 1e-15));
            assert!(rel(obs.cooling_rate * p.thermal_occupation(), obs.n_b_ss) < 1e-15);
            assert!(rel(obs.gamma_eff, effective_linewidth(&p, g)) < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn params(gm: f64, go: f64, t: f64) -> SystemParams {
            SystemParams {
                gamma_m_hz: gm,
                gamma_o_hz: go,
                temperature: t,
                ..SystemParams::tapered_fiber()
            }
        }

        proptest! {
            #[test]
            fn linewidth_ratio_matches_occupation_ratio(
                gm in 1e5f64..1e9, go in 1e5f64..1e10, g in 0.0f64..1e10, t in 1.0f64..1e3,
            ) {
                let p = params(gm, go, t);
                let lhs = p.gamma_m() / effective_linewidth(&p, g);
                let rhs = phonon_occupation_phase_matched(&p, g) / p.thermal_occupation();
                prop_assert!(((lhs - rhs) / rhs).abs() < 1e-12);
            }

            #[test]
            fn equivalent_linewidth_forms(gm in 1e5f64..1e9, go in 1e5f64..1e10, g in 0.0f64..1e10) {
                let p = params(gm, go, 293.0);
                let (gmr, gor) = (p.gamma_m(), p.gamma_o());
                let g2 = 4.0 * g * g;
                let product = (gmr + gor) * (g2 + gor * gmr) / (g2 + gor * (gmr + gor));
                let sum = effective_linewidth(&p, g);
                prop_assert!(((product - sum) / sum).abs() < 1e-12);
            }

            #[test]
            fn occupation_strictly_decreasing(g in 0.0f64..1e9, k in 1.01f64..3.0) {
                let p = SystemParams::tapered_fiber();
                prop_assert!(
                    phonon_occupation_phase_matched(&p, g * k + 1.0)
                        < phonon_occupation_phase_matched(&p, g)
                );
                prop_assert!(effective_linewidth(&p, g * k + 1.0) > effective_linewidth(&p, g));
            }

            #[test]
            fn detuned_even_and_non_decreasing(g in 0.0f64..1e9, d in 0.0f64..1e10, k in 1.0f64..4.0) {
                let p = SystemParams::tapered_fiber();
                let plus = phonon_occupation_detuned(&p, g, &Detuning::new(d, 0.0));
                let minus = phonon_occupation_detuned(&p, g, &Detuning::new(0.0, d));
                prop_assert!(((plus - minus) / plus).abs() < 1e-14);
                let wider = phonon_occupation_detuned(&p, g, &Detuning::new(k * d, 0.0));
                prop_assert!(wider >= plus * (1.0 - 1e-14));
                prop_assert!(plus >= phonon_occupation_phase_matched(&p, g) * (1.0 - 1e-14));
            }

            #[test]
            fn convention_invariance(ratio in 0.0f64..20.0) {
                let given = SystemParams::tapered_fiber();
                let angular = given.with_convention(RatesConvention::Angular);
                let g_given = ratio * given.gamma_m();
                let g_angular = ratio * angular.gamma_m();
                let p_given = crate::model::power_for_coupling(&given, g_given);
                let p_angular = crate::model::power_for_coupling(&angular, g_angular);
                let ga = coupling_for_power(&given, p_given);
                let gb = coupling_for_power(&angular, p_angular);
                let (ra, rb) = (cooling_rate(&given, ga), cooling_rate(&angular, gb));
                prop_assert!(((ra - rb) / ra).abs() < 1e-12);
                let na = phonon_occupation_phase_matched(&given, ga) / given.thermal_occupation();
                let nb = phonon_occupation_phase_matched(&angular, gb) / angular.thermal_occupation();
                prop_assert!(((na - nb) / na).abs() < 1e-12);
            }
        }
    }
}
