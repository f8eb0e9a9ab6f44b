//! THz link impairments: link budget, effective SINR, TOA variance, hardware
//! ceilings, phase-noise floors and regime labels.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{BOLTZMANN, SPEED_OF_LIGHT, T_REF};

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Millidegrees to radians.
pub fn mdeg(x: f64) -> f64 {
    (x * 1e-3).to_radians()
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareProfile {
    pub name: String,
    /// Distortion-to-signal power ratio Γ_eff [-]
    pub gamma_eff: f64,
    /// Integrated phase-noise variance σ²_φ [rad²]
    pub sigma_phi_sq: f64,
    /// [dB]
    pub noise_figure: f64,
}

impl HardwareProfile {
    pub fn new(name: &str, gamma_eff: f64, sigma_phi_sq: f64, noise_figure: f64) -> Self {
        Self {
            name: name.to_string(),
            gamma_eff,
            sigma_phi_sq,
            noise_figure,
        }
    }

    pub fn state_of_the_art() -> Self {
        Self::new("StateOfTheArt", 0.005, 1e-4, 5.0)
    }

    pub fn high_performance() -> Self {
        Self::new("HighPerformance", 0.01, 1e-3, 7.0)
    }

    pub fn swap_efficient() -> Self {
        Self::new("SWaPEfficient", 0.045, 1e-2, 10.0)
    }

    pub fn low_cost() -> Self {
        Self::new("LowCost", 0.05, 1e-1, 12.0)
    }

    pub fn builtins() -> Vec<Self> {
        vec![
            Self::state_of_the_art(),
            Self::high_performance(),
            Self::swap_efficient(),
            Self::low_cost(),
        ]
    }

    pub fn by_name(name: &str) -> Option<Self> {
        Self::builtins().into_iter().find(|p| p.name.eq_ignore_ascii_case(name))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_eff >= 0.0) || !(self.sigma_phi_sq >= 0.0) || !self.noise_figure.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid hardware profile {}", self.name)));
        }
        Ok(())
    }
}

/// Γ_eff ≈ EVM² (EVM as a linear ratio).
pub fn gamma_from_evm(evm: f64) -> f64 {
    evm * evm
}

/// Mean power loss from Gaussian pointing jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointingLoss {
    /// Half-power beamwidth θ_3dB [rad]
    pub theta_3db: f64,
    /// Per-axis jitter σ_e [rad]
    pub sigma_e: f64,
}

impl PointingLoss {
    pub fn factor(&self) -> f64 {
        (-(self.sigma_e * self.sigma_e) / (self.theta_3db * self.theta_3db)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    /// Carrier [Hz]
    pub f_c: f64,
    /// [Hz]
    pub bandwidth: f64,
    /// [W]
    pub tx_power: f64,
    /// [dBi]
    pub tx_gain: f64,
    /// [dBi]
    pub rx_gain: f64,
    /// RMS bandwidth β [Hz]; B/√12 when absent.
    #[serde(default)]
    pub rms_bandwidth_beta: Option<f64>,
    /// Mean pointing loss applied in the link budget; none disables it.
    #[serde(default)]
    pub pointing_loss: Option<PointingLoss>,
}

impl Default for SignalSpec {
    fn default() -> Self {
        Self {
            f_c: 300e9,
            bandwidth: 10e9,
            tx_power: 10.0,
            tx_gain: 50.0,
            rx_gain: 50.0,
            rms_bandwidth_beta: None,
            pointing_loss: Some(PointingLoss {
                theta_3db: mdeg(14.0),
                sigma_e: mdeg(2.8),
            }),
        }
    }
}

impl SignalSpec {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_c
    }

    pub fn beta(&self) -> f64 {
        self.rms_bandwidth_beta.unwrap_or(self.bandwidth / 12f64.sqrt())
    }

    /// Waveform factor κ_WF = 1/(8π²β²) [s²].
    pub fn kappa_wf(&self) -> f64 {
        let b = self.beta();
        1.0 / (8.0 * PI * PI * b * b)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.f_c > 0.0
            && self.bandwidth > 0.0
            && self.tx_power > 0.0
            && self.tx_gain.is_finite()
            && self.rx_gain.is_finite()
            && self.beta() > 0.0
            && self.beta() <= self.bandwidth;
        if !ok {
            return Err(Error::InvalidArgument("invalid signal spec".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkCondition {
    /// [m]
    pub distance: f64,
    /// Pre-impairment SNR [linear]
    pub snr0: f64,
    /// Noise-normalized interference Σα̃ [linear]
    pub interference_sum: f64,
}

// ---------------------------------------------------------------------------
// Budget and SINR
// ---------------------------------------------------------------------------

/// Free-space SNR₀ = P·G_T·G_R·(λ/4πd)²·L_point / (k·T·B·NF).
pub fn snr0_link_budget(sig: &SignalSpec, hw: &HardwareProfile, distance: f64) -> f64 {
    let lambda = sig.wavelength();
    let fspl_gain = (lambda / (4.0 * PI * distance)).powi(2);
    let pr = sig.tx_power * db_to_lin(sig.tx_gain) * db_to_lin(sig.rx_gain) * fspl_gain;
    let pr = match sig.pointing_loss {
        Some(pl) => pr * pl.factor(),
        None => pr,
    };
    let noise = BOLTZMANN * T_REF * sig.bandwidth * db_to_lin(hw.noise_figure);
    pr / noise
}

/// SNR₀·e^{−σ²_φ} / (1 + SNR₀·Γ_eff + Σα̃).
pub fn sinr_eff(snr0: f64, hw: &HardwareProfile, interference_sum: f64) -> f64 {
    if snr0 == 0.0 {
        return 0.0;
    }
    if snr0.is_infinite() {
        return (-hw.sigma_phi_sq).exp() / hw.gamma_eff;
    }
    snr0 * (-hw.sigma_phi_sq).exp() / (1.0 + snr0 * hw.gamma_eff + interference_sum)
}

/// Phase-noise timing floor term c²σ²_φ/(2πf_c)² [m²].
pub fn phase_noise_variance(sig: &SignalSpec, sigma_phi_sq: f64) -> f64 {
    let w = 2.0 * PI * sig.f_c;
    SPEED_OF_LIGHT * SPEED_OF_LIGHT * sigma_phi_sq / (w * w)
}

/// TOA range variance c²[κ_WF/SINR_eff + σ²_φ/(2πf_c)²] [m²].
pub fn meas_variance(sig: &SignalSpec, hw: &HardwareProfile, cond: &LinkCondition) -> Result<f64> {
    let sinr = sinr_eff(cond.snr0, hw, cond.interference_sum);
    if !(sinr > 0.0) {
        return Err(Error::NoSignal);
    }
    Ok(SPEED_OF_LIGHT * SPEED_OF_LIGHT * sig.kappa_wf() / sinr + phase_noise_variance(sig, hw.sigma_phi_sq))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangingLimits {
    /// Hardware ceiling √(c²κ_WF Γ_eff e^{σ²_φ}) [m]; 0 when Γ_eff = 0.
    pub ceiling: f64,
    /// Phase-noise floor c√σ²_φ/(2πf_c) [m]
    pub floor: f64,
    /// max(ceiling, floor) [m]
    pub sigma_min: f64,
    /// 1/Γ_eff [linear]; infinite when Γ_eff = 0.
    pub snr_crit: f64,
    /// False when Γ_eff = 0 (no hardware saturation).
    pub hardware_bounded: bool,
}

pub fn ranging_limits(sig: &SignalSpec, hw: &HardwareProfile) -> RangingLimits {
    let c2k = SPEED_OF_LIGHT * SPEED_OF_LIGHT * sig.kappa_wf();
    let ceiling = (c2k * hw.gamma_eff * hw.sigma_phi_sq.exp()).sqrt();
    let floor = phase_noise_variance(sig, hw.sigma_phi_sq).sqrt();
    let bounded = hw.gamma_eff > 0.0;
    RangingLimits {
        ceiling,
        floor,
        sigma_min: ceiling.max(floor),
        snr_crit: if bounded { 1.0 / hw.gamma_eff } else { f64::INFINITY },
        hardware_bounded: bounded,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Noise,
    Hardware,
    Interference,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Noise => "noise",
            Regime::Hardware => "hardware",
            Regime::Interference => "interference",
        }
    }
}

/// Relative margin within which two denominator terms count as tied.
const TIE_RTOL: f64 = 1e-12;

/// Largest denominator term of the effective SINR; ties (within 1e-12
/// relative) resolve to noise, then hardware.
pub fn regime_classify(snr0: f64, hw: &HardwareProfile, interference_sum: f64) -> Regime {
    let hwt = snr0 * hw.gamma_eff;
    let mut best = (1.0, Regime::Noise);
    if hwt > best.0 * (1.0 + TIE_RTOL) {
        best = (hwt, Regime::Hardware);
    }
    if interference_sum > best.0 * (1.0 + TIE_RTOL) {
        best = (interference_sum, Regime::Interference);
    }
    best.1
}
