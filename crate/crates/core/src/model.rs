//! Physical parameters of the waveguide, thermometry, and the pump-to-coupling map.
//!
//! Public frequencies are ordinary frequencies in Hz. Dissipation rates are quoted
//! in Hz as well and turned into the rates that enter the equations of motion by
//! [`RatesConvention`]; every other module works in those internal rate units.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Planck constant, J·s (exact, SI 2019).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Boltzmann constant, J/K (exact, SI 2019).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Vacuum speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// How quoted linewidths in Hz become rates in the equations of motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RatesConvention {
    /// The quoted number is used directly as a rate in 1/s.
    #[default]
    AsGiven,
    /// The quoted number is an ordinary frequency; the rate is 2π times it.
    Angular,
}

impl RatesConvention {
    pub fn factor(self) -> f64 {
        match self {
            RatesConvention::AsGiven => 1.0,
            RatesConvention::Angular => 2.0 * PI,
        }
    }

    #[inline]
    pub fn hz_to_rate(self, hz: f64) -> f64 {
        hz * self.factor()
    }

    #[inline]
    pub fn rate_to_hz(self, rate: f64) -> f64 {
        rate / self.factor()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RatesConvention::AsGiven => "as_given",
            RatesConvention::Angular => "angular",
        }
    }
}

impl std::str::FromStr for RatesConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "as_given" => Ok(RatesConvention::AsGiven),
            "angular" => Ok(RatesConvention::Angular),
            other => Err(format!("expected `as_given` or `angular`, got `{other}`")),
        }
    }
}

/// Constants of the waveguide, optics and acoustics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Brillouin resonance Ω_B/2π, Hz.
    pub omega_b_hz: f64,
    /// Intrinsic acoustic dissipation Γ_m as quoted, Hz.
    pub gamma_m_hz: f64,
    /// Anti-Stokes optical loss γ_o as quoted, Hz.
    pub gamma_o_hz: f64,
    /// Brillouin gain coefficient G_B, 1/(m·W).
    pub gain_total: f64,
    /// Intrinsic nonlinear gain g_B, m/W.
    pub gain_intrinsic: Option<f64>,
    /// Active length L, m.
    pub length: f64,
    pub refractive_index: f64,
    /// Bath temperature, K.
    pub temperature: f64,
    pub rates_convention: RatesConvention,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::tapered_fiber()
    }
}

impl SystemParams {
    /// The tapered chalcogenide fiber: 7.38 GHz mode, Γ_m = 46.8 MHz,
    /// γ_o = 364 MHz, G_B = 164 /(m·W), 50 cm waist, n = 2.5, 293 K.
    pub fn tapered_fiber() -> Self {
        Self {
            omega_b_hz: 7.38e9,
            gamma_m_hz: 46.8e6,
            gamma_o_hz: 364e6,
            gain_total: 164.0,
            gain_intrinsic: Some(1.32e-9),
            length: 0.5,
            refractive_index: 2.5,
            temperature: 293.0,
            rates_convention: RatesConvention::AsGiven,
        }
    }

    pub fn with_convention(mut self, convention: RatesConvention) -> Self {
        self.rates_convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_b_hz", self.omega_b_hz),
            ("gamma_m_hz", self.gamma_m_hz),
            ("gamma_o_hz", self.gamma_o_hz),
            ("length", self.length),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::invalid(
                "temperature",
                format!("must be finite and >= 0, got {}", self.temperature),
            ));
        }
        if !(self.gain_total.is_finite() && self.gain_total >= 0.0) {
            return Err(Error::invalid(
                "gain_total",
                format!("must be finite and >= 0, got {}", self.gain_total),
            ));
        }
        if !(self.refractive_index.is_finite() && self.refractive_index >= 1.0) {
            return Err(Error::invalid(
                "refractive_index",
                format!("must be >= 1, got {}", self.refractive_index),
            ));
        }
        if let Some(g) = self.gain_intrinsic {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::invalid("gain_intrinsic", format!("must be > 0, got {g}")));
            }
        }
        Ok(())
    }

    /// Γ_m in internal rate units.
    #[inline]
    pub fn gamma_m(&self) -> f64 {
        self.rates_convention.hz_to_rate(self.gamma_m_hz)
    }

    /// γ_o in internal rate units.
    #[inline]
    pub fn gamma_o(&self) -> f64 {
        self.rates_convention.hz_to_rate(self.gamma_o_hz)
    }

    /// Γ_m + γ_o, the total linewidth that bounds every cooled linewidth.
    #[inline]
    pub fn total_linewidth(&self) -> f64 {
        self.gamma_m() + self.gamma_o()
    }

    /// Thermal occupation of the Brillouin mode at the bath temperature.
    pub fn thermal_occupation(&self) -> f64 {
        bose_einstein_occupation(self.omega_b_hz, self.temperature)
            .expect("validated parameters give a valid occupation")
    }

    pub fn hz_to_rate(&self, hz: f64) -> f64 {
        self.rates_convention.hz_to_rate(hz)
    }

    pub fn rate_to_hz(&self, rate: f64) -> f64 {
        self.rates_convention.rate_to_hz(rate)
    }
}

/// Wavenumber-induced frequency shifts of the anti-Stokes (Δ1) and acoustic (Δ2)
/// modes, in rate units. Group velocities only ever enter through these products.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Detuning {
    pub delta1: f64,
    pub delta2: f64,
}

impl Detuning {
    pub const PHASE_MATCHED: Detuning = Detuning {
        delta1: 0.0,
        delta2: 0.0,
    };

    pub fn new(delta1: f64, delta2: f64) -> Self {
        Self { delta1, delta2 }
    }

    pub fn from_hz(delta1_hz: f64, delta2_hz: f64, convention: RatesConvention) -> Self {
        Self {
            delta1: convention.hz_to_rate(delta1_hz),
            delta2: convention.hz_to_rate(delta2_hz),
        }
    }

    /// Δ1 − Δ2, the only combination the steady state depends on.
    #[inline]
    pub fn mismatch(&self) -> f64 {
        self.delta1 - self.delta2
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta1.is_finite() {
            return Err(Error::invalid("delta1", "must be finite"));
        }
        if !self.delta2.is_finite() {
            return Err(Error::invalid("delta2", "must be finite"));
        }
        Ok(())
    }
}

/// Pump drive: peak power and pump/anti-Stokes detuning Δ_L.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    /// Pump peak power, W.
    pub power: f64,
    /// Δ_L in rate units; −Ω_B at phase matching.
    pub delta_l: f64,
}

impl Drive {
    /// Phase-matched drive (Δ_L = −Ω_B) at the given power.
    pub fn phase_matched(params: &SystemParams, power: f64) -> Self {
        Self {
            power,
            delta_l: -params.hz_to_rate(params.omega_b_hz),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power.is_finite() && self.power >= 0.0) {
            return Err(Error::invalid("power", format!("must be >= 0, got {}", self.power)));
        }
        Ok(())
    }
}

/// Mean occupation 1/(exp(h·f/(k_B·T)) − 1) of a bosonic mode at frequency `omega_hz`.
pub fn bose_einstein_occupation(omega_hz: f64, temperature: f64) -> Result<f64> {
    if !(omega_hz.is_finite() && omega_hz > 0.0) {
        return Err(Error::Domain(format!("frequency must be > 0, got {omega_hz}")));
    }
    if !(temperature >= 0.0) {
        return Err(Error::Domain(format!("temperature must be >= 0, got {temperature}")));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = PLANCK * omega_hz / (BOLTZMANN * temperature);
    Ok(1.0 / x.exp_m1())
}

/// Temperature at which a mode at `omega_hz` holds `occupation` quanta on average.
pub fn effective_temperature(occupation: f64, omega_hz: f64) -> Result<f64> {
    if !(occupation > 0.0) {
        return Err(Error::Domain(format!("occupation must be > 0, got {occupation}")));
    }
    if !(omega_hz.is_finite() && omega_hz > 0.0) {
        return Err(Error::Domain(format!("frequency must be > 0, got {omega_hz}")));
    }
    Ok(PLANCK * omega_hz / (BOLTZMANN * (1.0 / occupation).ln_1p()))
}

/// Pump-enhanced coupling g_om = sqrt(G_B·Γ_m·P·L·c/(4n)).
///
/// Used verbatim as the fiber's calibration: with G_B in 1/(m·W) the explicit
/// L carries one extra length unit, so the result is only a rate once that
/// calibration is accepted.
pub fn coupling_strength(params: &SystemParams, drive: &Drive) -> f64 {
    (params.gain_total * params.gamma_m() * drive.power * params.length * SPEED_OF_LIGHT
        / (4.0 * params.refractive_index))
        .sqrt()
}

/// Convenience form of [`coupling_strength`] for a bare pump power.
pub fn coupling_for_power(params: &SystemParams, power: f64) -> f64 {
    coupling_strength(params, &Drive::phase_matched(params, power))
}

/// Pump power that produces coupling `g_om`; inverse of [`coupling_for_power`].
pub fn power_for_coupling(params: &SystemParams, g_om: f64) -> f64 {
    g_om * g_om * 4.0 * params.refractive_index
        / (params.gain_total * params.gamma_m() * params.length * SPEED_OF_LIGHT)
}

/// Lorentzian Brillouin gain G_B(ω) = g_B (Γ/2)² / ((Ω_B − ω)² + (Γ/2)²).
///
/// `omega_hz` is an absolute frequency; its distance from Ω_B is converted to
/// rate units before comparing with `gamma_eff`.
pub fn gain_profile(omega_hz: f64, params: &SystemParams, gamma_eff: f64) -> Result<f64> {
    let peak = params.gain_intrinsic.ok_or(Error::MissingIntrinsicGain)?;
    if !(gamma_eff > 0.0) {
        return Err(Error::Domain(format!("gamma_eff must be > 0, got {gamma_eff}")));
    }
    let offset = params.hz_to_rate(params.omega_b_hz - omega_hz);
    let half = gamma_eff / 2.0;
    Ok(peak * half * half / (offset * offset + half * half))
}
