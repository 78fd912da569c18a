//! Frequency-domain response of the coupled pair and Lorentzian line fitting.
//!
//! With the common denominator
//! `D(ω) = g² + γΓ/4 − (ω+Δ1)(ω+Δ2) − i[γ(ω+Δ2)/2 + Γ(ω+Δ1)/2]`
//! and only thermal acoustic noise, the spectral densities are
//!
//! ```text
//! S_bb(ω) = Γ n_th |i(ω+Δ1) − γ/2|² / |D(ω)|²
//! S_aa(ω) = g² Γ n_th / |D(ω)|²
//! ```
//!
//! Normalization: one-sided in the rotating frame, ∫ S dω / 2π equals the
//! steady occupation, with ω in internal rate units.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{coupling_for_power, Detuning, SystemParams};
use crate::steady::{effective_linewidth, validate_powers};

/// Minimum half-span of a grid around each response centre, in units of Γ_m + γ_o.
pub const MIN_SPAN_FACTOR: f64 = 10.0;
pub const MIN_POINTS: usize = 1000;
pub const DEFAULT_SPAN_FACTOR: f64 = 20.0;
pub const DEFAULT_POINTS: usize = 4096;

const FIT_MAX_ITERATIONS: usize = 200;
const FIT_STEP_TOLERANCE: f64 = 1e-10;

/// Symmetric, uniformly spaced grid of frequency offsets (rate units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub center: f64,
    pub half_span: f64,
    pub points: usize,
}

impl FrequencyGrid {
    pub fn new(center: f64, half_span: f64, points: usize) -> Self {
        Self {
            center,
            half_span,
            points,
        }
    }

    /// Centred on the acoustic resonance −Δ2, reaching `span_factor`·(Γ_m + γ_o)
    /// beyond both the anti-Stokes resonance and the normal-mode splitting.
    pub fn scaled(params: &SystemParams, g_om: f64, det: &Detuning, span_factor: f64, points: usize) -> Self {
        let half_span = span_factor * params.total_linewidth() + det.mismatch().abs() + 2.0 * g_om;
        Self::new(-det.delta2, half_span, points)
    }

    pub fn default_for(params: &SystemParams, g_om: f64, det: &Detuning) -> Self {
        Self::scaled(params, g_om, det, DEFAULT_SPAN_FACTOR, DEFAULT_POINTS)
    }

    /// Offsets `center + k·step` with k symmetric about zero, so mirrored points
    /// are exact negatives of each other when `center` is 0.
    pub fn offsets(&self) -> Vec<f64> {
        let n = self.points;
        let step = 2.0 * self.half_span / (n - 1) as f64;
        let mid = (n - 1) as f64;
        (0..n)
            .map(|i| self.center + (2.0 * i as f64 - mid) * 0.5 * step)
            .collect()
    }

    fn check_coverage(&self, params: &SystemParams, det: &Detuning) -> Result<()> {
        if self.points < MIN_POINTS {
            return Err(Error::GridCoverage(format!(
                "{} points, need at least {MIN_POINTS}",
                self.points
            )));
        }
        let need = MIN_SPAN_FACTOR * params.total_linewidth();
        let (lo, hi) = (self.center - self.half_span, self.center + self.half_span);
        for resonance in [-det.delta1, -det.delta2] {
            if resonance - need < lo || resonance + need > hi {
                return Err(Error::GridCoverage(format!(
                    "[{lo:e}, {hi:e}] does not span ±{need:e} around {resonance:e}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    Acoustic,
    Optical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    pub kind: SpectrumKind,
    /// Frequency offsets from the rotating frame, rate units, strictly increasing.
    pub offsets: Vec<f64>,
    /// Spectral density, quanta per unit rate.
    pub psd: Vec<f64>,
    pub params: SystemParams,
    pub g_om: f64,
    pub detuning: Detuning,
}

impl SpectrumTrace {
    /// Trapezoid rule over the grid, divided by 2π.
    pub fn trapezoid_occupation(&self) -> f64 {
        let sum: f64 = self
            .offsets
            .windows(2)
            .zip(self.psd.windows(2))
            .map(|(w, s)| 0.5 * (w[1] - w[0]) * (s[0] + s[1]))
            .sum();
        sum / (2.0 * PI)
    }

    /// Contribution of the spectrum outside the grid, from its leading
    /// algebraic decay (1/ω² acoustic, 1/ω⁴ optical).
    pub fn tail_occupation(&self) -> f64 {
        let (Some(&lo), Some(&hi)) = (self.offsets.first(), self.offsets.last()) else {
            return 0.0;
        };
        let source = self.params.gamma_m() * self.params.thermal_occupation();
        let tail = match self.kind {
            SpectrumKind::Acoustic => {
                let c = -self.detuning.delta2;
                source * (1.0 / (hi - c) + 1.0 / (c - lo))
            }
            SpectrumKind::Optical => {
                let c = -0.5 * (self.detuning.delta1 + self.detuning.delta2);
                self.g_om * self.g_om * source / 3.0 * ((hi - c).powi(-3) + (c - lo).powi(-3))
            }
        };
        tail / (2.0 * PI)
    }

    /// Occupation carried by the spectrum: grid integral plus analytic tails.
    pub fn integrated_occupation(&self) -> f64 {
        self.trapezoid_occupation() + self.tail_occupation()
    }

    /// Sample with the largest density.
    pub fn peak(&self) -> (usize, f64) {
        self.psd
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
    }
}

#[inline]
fn denominator(params: &SystemParams, g_om: f64, det: &Detuning, w: f64) -> (f64, f64) {
    let (gm, go) = (params.gamma_m(), params.gamma_o());
    let (x, y) = (w + det.delta1, w + det.delta2);
    let re = g_om * g_om + go * gm / 4.0 - x * y;
    let im = -(go / 2.0 * y + gm / 2.0 * x);
    (re, im)
}

fn acoustic_density(params: &SystemParams, g_om: f64, det: &Detuning, w: f64) -> f64 {
    let (re, im) = denominator(params, g_om, det, w);
    let x = w + det.delta1;
    let go = params.gamma_o();
    params.gamma_m() * params.thermal_occupation() * (x * x + go * go / 4.0) / (re * re + im * im)
}

fn optical_density(params: &SystemParams, g_om: f64, det: &Detuning, w: f64) -> f64 {
    let (re, im) = denominator(params, g_om, det, w);
    g_om * g_om * params.gamma_m() * params.thermal_occupation() / (re * re + im * im)
}

fn evaluate(
    kind: SpectrumKind,
    params: &SystemParams,
    g_om: f64,
    det: &Detuning,
    grid: &FrequencyGrid,
) -> Result<SpectrumTrace> {
    params.validate()?;
    det.validate()?;
    grid.check_coverage(params, det)?;
    let offsets = grid.offsets();
    let density = match kind {
        SpectrumKind::Acoustic => acoustic_density,
        SpectrumKind::Optical => optical_density,
    };
    let psd = offsets.iter().map(|&w| density(params, g_om, det, w)).collect();
    Ok(SpectrumTrace {
        kind,
        offsets,
        psd,
        params: *params,
        g_om,
        detuning: *det,
    })
}

/// Closed-form phonon spectral density on `grid`.
pub fn acoustic_psd(params: &SystemParams, g_om: f64, det: &Detuning, grid: &FrequencyGrid) -> Result<SpectrumTrace> {
    evaluate(SpectrumKind::Acoustic, params, g_om, det, grid)
}

/// Closed-form anti-Stokes photon spectral density on `grid`.
pub fn optical_psd(params: &SystemParams, g_om: f64, det: &Detuning, grid: &FrequencyGrid) -> Result<SpectrumTrace> {
    evaluate(SpectrumKind::Optical, params, g_om, det, grid)
}

/// Maximum of the phase-matched phonon spectral density.
///
/// In u = ω² the density is Γ n_th (u + a) / ((b − u)² + c u) with a = γ²/4,
/// b = g² + γΓ/4, c = (γ + Γ)²/4; it peaks at u* = −a + sqrt((a + b)² − c a)
/// when that is positive and at ω = 0 otherwise. For g → ∞ the peak tends to
/// 4 Γ n_th / (Γ + γ)².
pub fn anti_stokes_peak_height(params: &SystemParams, g_om: f64) -> f64 {
    let (gm, go) = (params.gamma_m(), params.gamma_o());
    let a = go * go / 4.0;
    let b = g_om * g_om + go * gm / 4.0;
    let c = (go + gm).powi(2) / 4.0;
    let disc = (a + b).powi(2) - c * a;
    let u = if disc > 0.0 { (-a + disc.sqrt()).max(0.0) } else { 0.0 };
    gm * params.thermal_occupation() * (u + a) / ((b - u).powi(2) + c * u)
}

/// Strong-coupling limit of [`anti_stokes_peak_height`].
pub fn peak_height_limit(params: &SystemParams) -> f64 {
    4.0 * params.gamma_m() * params.thermal_occupation() / params.total_linewidth().powi(2)
}

/// Least-squares Lorentzian `height·(fwhm/2)² / ((ω − center)² + (fwhm/2)²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzianFit {
    pub center: f64,
    pub fwhm: f64,
    pub height: f64,
    /// Euclidean norm of the residual, in PSD units.
    pub residual_norm: f64,
    /// Residual norm over the norm of the data.
    pub relative_residual: f64,
    /// Covariance of (center, fwhm, height).
    pub covariance: [[f64; 3]; 3],
    pub iterations: usize,
}

impl LorentzianFit {
    pub fn evaluate(&self, w: f64) -> f64 {
        lorentzian(self.height, self.center, self.fwhm, w)
    }
}

#[inline]
fn lorentzian(height: f64, center: f64, fwhm: f64, w: f64) -> f64 {
    let q = fwhm * fwhm / 4.0;
    let d = w - center;
    height * q / (d * d + q)
}

/// Residuals y − f and Jacobian rows ∂f/∂(center, fwhm, height).
fn residuals(theta: &[f64; 3], x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let [c, w, h] = *theta;
    let q = w * w / 4.0;
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let d = xi - c;
            let den = d * d + q;
            let shape = q / den;
            let jac = [h * q * 2.0 * d / (den * den), h * 0.5 * w * d * d / (den * den), shape];
            (yi - h * shape, jac)
        })
        .unzip()
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Levenberg–Marquardt fit of a three-parameter Lorentzian, started from the
/// discrete maximum and its interpolated half-maximum crossings.
pub fn fit_lorentzian(trace: &SpectrumTrace) -> Result<LorentzianFit> {
    let (x, y) = (&trace.offsets, &trace.psd);
    let n = x.len();
    if n < 4 || y.len() != n {
        return Err(Error::Domain(format!("need at least 4 samples, got {n}")));
    }
    let (imax, ymax) = trace.peak();
    if imax == 0 || imax == n - 1 || !(ymax > 0.0) {
        return Err(Error::Domain("spectral peak is not interior to the grid".into()));
    }
    let half = ymax / 2.0;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        for i in range {
            let j = if i < imax { i + 1 } else { i - 1 };
            if y[i] < half {
                let t = (half - y[i]) / (y[j] - y[i]);
                return Some(x[i] + t * (x[j] - x[i]));
            }
        }
        None
    };
    let left = crossing(&mut (0..imax).rev());
    let right = crossing(&mut (imax + 1..n));
    let (Some(left), Some(right)) = (left, right) else {
        return Err(Error::Domain("half-maximum crossings not inside the grid".into()));
    };

    // normalized coordinates: offsets in units of the initial width, density in
    // units of the initial height
    let (x0, w0, h0) = (x[imax], right - left, ymax);
    let xs: Vec<f64> = x.iter().map(|v| (v - x0) / w0).collect();
    let ys: Vec<f64> = y.iter().map(|v| v / h0).collect();

    let mut theta = [0.0, 1.0, 1.0];
    let (mut r, mut jac) = residuals(&theta, &xs, &ys);
    let mut current = cost(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < FIT_MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (row, ri) in jac.iter().zip(&r) {
            for a in 0..3 {
                jtr[a] += row[a] * ri;
                for b in 0..3 {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        let mut damped = jtj;
        for a in 0..3 {
            damped[a][a] += lambda * jtj[a][a].max(1e-300);
        }
        let Some(delta) = linalg::solve(damped, jtr) else {
            lambda *= 10.0;
            continue;
        };
        let trial = [theta[0] + delta[0], theta[1] + delta[1], theta[2] + delta[2]];
        let (r_trial, jac_trial) = residuals(&trial, &xs, &ys);
        let trial_cost = cost(&r_trial);
        if trial_cost.is_finite() && trial_cost <= current && trial[1] > 0.0 {
            let width = trial[1].abs();
            let change = (delta[0].abs() / width)
                .max(delta[1].abs() / width)
                .max(delta[2].abs() / trial[2].abs());
            theta = trial;
            r = r_trial;
            jac = jac_trial;
            current = trial_cost;
            lambda = (lambda / 10.0).max(1e-12);
            if change < FIT_STEP_TOLERANCE {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            // no descent direction left at machine precision: stationary point
            if lambda > 1e16 {
                converged = true;
                break;
            }
        }
    }

    let residual_norm = current.sqrt() * h0;
    let data_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dof = (n - 3) as f64;
    let mut jtj = [[0.0; 3]; 3];
    for row in &jac {
        for a in 0..3 {
            for b in 0..3 {
                jtj[a][b] += row[a] * row[b];
            }
        }
    }
    let scales = [w0, w0, h0];
    let mut covariance = [[f64::NAN; 3]; 3];
    if let Some(inv) = linalg::invert(jtj) {
        let s2 = current / dof;
        for a in 0..3 {
            for b in 0..3 {
                covariance[a][b] = s2 * inv[a][b] * scales[a] * scales[b];
            }
        }
    }
    let fit = LorentzianFit {
        center: x0 + theta[0] * w0,
        fwhm: theta[1] * w0,
        height: theta[2] * h0,
        residual_norm,
        relative_residual: residual_norm / data_norm,
        covariance,
        iterations,
    };
    if converged {
        Ok(fit)
    } else {
        Err(Error::FitNonConvergence {
            iterations,
            best: Box::new(fit),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinewidthRow {
    pub power: f64,
    pub g_om: f64,
    pub fit: LorentzianFit,
    /// Γ_eff from the closed form, rate units.
    pub closed_form: f64,
}

impl LinewidthRow {
    pub fn fitted_fwhm(&self) -> f64 {
        self.fit.fwhm
    }
}

/// Fitted phonon-spectrum FWHM next to the closed-form Γ_eff at each power.
pub fn linewidth_vs_power(params: &SystemParams, powers: &[f64]) -> Result<Vec<LinewidthRow>> {
    params.validate()?;
    validate_powers(powers)?;
    let det = Detuning::PHASE_MATCHED;
    powers
        .par_iter()
        .map(|&power| {
            let g_om = coupling_for_power(params, power);
            let trace = acoustic_psd(params, g_om, &det, &FrequencyGrid::default_for(params, g_om, &det))?;
            Ok(LinewidthRow {
                power,
                g_om,
                fit: fit_lorentzian(&trace)?,
                closed_form: effective_linewidth(params, g_om),
            })
        })
        .collect()
}
