//! Versioned JSON scenario configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::impairments::{HardwareProfile, SignalSpec};
use crate::interference::PointingJitter;
use crate::network::{GeometryKind, GeometrySpec};
use crate::orbit::ProcessNoiseSpec;

pub const SCHEMA_VERSION: u32 = 1;

/// Bundled default scenario (Table I signal, Table II profiles).
pub const DEFAULT_CONFIG_JSON: &str = include_str!("../../configs/default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    /// Base formation for network-level studies.
    pub geometry: GeometrySpec,
    pub signal: SignalSpec,
    /// Profile used by single-profile studies.
    pub hardware: HardwareChoice,
    /// Profiles swept by the ceiling and floor studies.
    pub profiles: Vec<HardwareProfile>,
    pub jitter: PointingJitter,
    pub noise: NoiseConfig,
    pub monte_carlo: MonteCarloConfig,
    pub studies: StudiesConfig,
    pub outputs: OutputConfig,
}

/// Built-in profile name or explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HardwareChoice {
    Named(String),
    Explicit(HardwareProfile),
}

impl HardwareChoice {
    pub fn resolve(&self) -> Result<HardwareProfile> {
        match self {
            HardwareChoice::Named(n) => {
                HardwareProfile::by_name(n).ok_or_else(|| Error::Config(format!("unknown hardware profile '{n}'")))
            }
            HardwareChoice::Explicit(p) => Ok(p.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub process: ProcessNoiseSpec,
    /// Clock-correlation coefficients ρ swept by the correlation study.
    pub rho_grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    pub seed: u64,
}

fn default_realizations() -> usize {
    1000
}

/// Inclusive uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }

    fn validate(&self, what: &str) -> Result<()> {
        let ok = self.start.is_finite() && self.stop.is_finite() && self.step > 0.0 && self.stop >= self.start;
        if !ok || (self.stop - self.start) / self.step > 1e6 {
            return Err(Error::Config(format!("{what}: invalid sweep")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudiesConfig {
    pub ceiling: CeilingConfig,
    pub floor: FloorConfig,
    pub geometry: GeometryStudyConfig,
    pub regime: RegimeConfig,
    pub correlation: CorrelationConfig,
    pub ioo: IooConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeilingConfig {
    /// [dB]
    pub snr_db: Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorConfig {
    /// [dB]
    pub snr_db: Sweep,
    /// [rad²]
    pub sigma_phi_sq: Vec<f64>,
    /// [Hz]
    pub carriers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryStudyConfig {
    pub counts: Vec<usize>,
    pub kinds: Vec<GeometryKind>,
    /// [m]
    pub link_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    /// [dB]
    pub snr_db: Sweep,
    pub log10_gamma: Sweep,
    /// Un-normalized Σα layers [-]
    pub alpha_sum_layers: Vec<f64>,
    /// [m]
    pub contour_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationConfig {
    pub counts: Vec<usize>,
    /// Formation size of the headline scenario.
    pub reference_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IooConfig {
    /// [m]
    pub target_altitude: f64,
    /// Illuminator and receiver altitude [m]
    pub node_altitude: f64,
    /// [deg]
    pub bistatic_angle_deg: f64,
    /// Prior 1σ along (x, y, z) [m]
    pub prior_sigma: [f64; 3],
    /// [W]
    pub tx_power: f64,
    /// [dBi]
    pub tx_gain: f64,
    /// [dBi]
    pub rx_gain: f64,
    /// [m²]
    pub rcs_sigma_b: f64,
    /// [dB]
    pub processing_loss: f64,
    /// N_eff [W]; back-solved from the threshold calibration when absent.
    #[serde(default)]
    pub effective_noise: Option<f64>,
    /// PG at which the echo reaches `threshold_gain_db` [dB]
    pub threshold_pg_db: f64,
    /// [dB]
    pub threshold_gain_db: f64,
    /// Major-axis reduction that fixes the operating PG [-]
    pub axis_reduction: f64,
    /// [dB]
    pub pg_db: Sweep,
    /// Communication SINR and coupling of the victim link for the crossover check.
    pub comm_sinr_db: f64,
    pub alpha_lm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub format: OutputFormat,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn bundled_default() -> Self {
        Self::from_json(DEFAULT_CONFIG_JSON).expect("bundled default config is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.signal.validate().map_err(cfg)?;
        self.hardware.resolve()?.validate().map_err(cfg)?;
        if self.profiles.is_empty() {
            return Err(Error::Config("profiles must not be empty".into()));
        }
        for p in &self.profiles {
            p.validate().map_err(cfg)?;
        }
        if !(self.jitter.sigma_e >= 0.0) {
            return Err(Error::Config("jitter.sigma_e must be >= 0".into()));
        }
        if self.noise.rho_grid.iter().any(|r| !(*r >= 0.0 && *r < 1.0)) {
            return Err(Error::Config("rho_grid values must lie in [0, 1)".into()));
        }
        if self.monte_carlo.realizations == 0 {
            return Err(Error::Config("monte_carlo.realizations must be >= 1".into()));
        }
        let s = &self.studies;
        s.ceiling.snr_db.validate("ceiling.snr_db")?;
        s.floor.snr_db.validate("floor.snr_db")?;
        if s.floor.sigma_phi_sq.iter().any(|v| !(*v >= 0.0)) || s.floor.carriers.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("floor grid values must be positive".into()));
        }
        if s.geometry.counts.iter().any(|n| *n < 2 || *n > 8) {
            return Err(Error::Config("geometry counts must lie in 2..=8".into()));
        }
        s.regime.snr_db.validate("regime.snr_db")?;
        s.regime.log10_gamma.validate("regime.log10_gamma")?;
        if !(s.regime.contour_rmse > 0.0) || s.regime.alpha_sum_layers.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::Config("regime contour and layers must be positive".into()));
        }
        if s.correlation.counts.iter().any(|n| *n < 3 || *n > 8)
            || !(3..=8).contains(&s.correlation.reference_count)
        {
            return Err(Error::Config("correlation counts must lie in 3..=8".into()));
        }
        let io = &s.ioo;
        s.ioo.pg_db.validate("ioo.pg_db")?;
        let positive = [io.tx_power, io.rcs_sigma_b, io.prior_sigma[0], io.prior_sigma[1], io.prior_sigma[2]];
        if positive.iter().any(|v| !(*v > 0.0))
            || !(io.node_altitude > io.target_altitude)
            || !(io.bistatic_angle_deg > 0.0 && io.bistatic_angle_deg < 180.0)
            || !(io.axis_reduction > 0.0 && io.axis_reduction < 1.0)
            || !(io.threshold_gain_db > 0.0)
            || io.effective_noise.is_some_and(|n| !(n > 0.0))
        {
            return Err(Error::Config("invalid ioo scenario".into()));
        }
        if self.outputs.dir.is_empty() {
            return Err(Error::Config("outputs.dir must not be empty".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical (re-serialized) config, hex encoded. The
    /// output section is excluded so the destination does not change results.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("outputs");
        }
        let canonical = v.to_string();
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
