//! Co-channel interference from Gaussian beams under Rayleigh pointing jitter.
//!
//! The closed-form average is checked against a seeded Monte Carlo average
//! of the point-receiver instantaneous power.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ConstellationGraph, Link};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamModel {
    /// [m]
    pub wavelength: f64,
    /// Beam waist w₀ [m]
    pub waist_w0: f64,
    /// Half-power beamwidth θ_B [rad]
    pub hpbw_theta_b: f64,
}

impl BeamModel {
    /// Beam with the given half-power beamwidth; waist from θ_B = (λ/πw₀)√(2 ln 2).
    pub fn from_hpbw(wavelength: f64, theta_b: f64) -> Self {
        Self {
            wavelength,
            waist_w0: wavelength * (2.0 * 2f64.ln()).sqrt() / (PI * theta_b),
            hpbw_theta_b: theta_b,
        }
    }

    pub fn from_waist(wavelength: f64, w0: f64) -> Self {
        Self {
            wavelength,
            waist_w0: w0,
            hpbw_theta_b: wavelength / (PI * w0) * (2.0 * 2f64.ln()).sqrt(),
        }
    }

    /// Far-field divergence λ/(πw₀) [rad].
    pub fn divergence(&self) -> f64 {
        self.wavelength / (PI * self.waist_w0)
    }

    pub fn rayleigh_range(&self) -> f64 {
        PI * self.waist_w0 * self.waist_w0 / self.wavelength
    }

    /// Boresight gain of a Gaussian pattern whose 1/e² angular radius is θ_B: 8/θ_B².
    pub fn boresight_gain(&self) -> f64 {
        8.0 / (self.hpbw_theta_b * self.hpbw_theta_b)
    }
}

/// w(z) = w₀√(1 + (λz/πw₀²)²).
pub fn beam_radius(b: &BeamModel, z: f64) -> f64 {
    radius_from_waist(b.wavelength, b.waist_w0, z)
}

fn radius_from_waist(lambda: f64, w0: f64, z: f64) -> f64 {
    let t = lambda * z / (PI * w0 * w0);
    w0 * (1.0 + t * t).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointingJitter {
    /// Per-axis standard deviation [rad]
    pub sigma_e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayleighMoments {
    pub mean: f64,
    pub second_moment: f64,
}

pub fn rayleigh_pointing_moments(j: &PointingJitter) -> RayleighMoments {
    RayleighMoments {
        mean: j.sigma_e * (PI / 2.0).sqrt(),
        second_moment: 2.0 * j.sigma_e * j.sigma_e,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferencePair {
    /// Victim link length d_ℓ [m]
    pub victim_distance: f64,
    /// Interferer-to-victim-receiver distance d_ℓm [m]
    pub cross_distance: f64,
    /// Misalignment θ_ℓm [rad]
    pub theta_lm: f64,
}

/// 1/(1 + 4σ_e²/θ_B²).
pub fn jitter_prefactor(theta_b: f64, sigma_e: f64) -> f64 {
    1.0 / (1.0 + 4.0 * sigma_e * sigma_e / (theta_b * theta_b))
}

/// Jitter-broadened exponent denominator θ_B²/2 + 2σ_e².
pub fn broadened_width_sq(theta_b: f64, sigma_e: f64) -> f64 {
    0.5 * theta_b * theta_b + 2.0 * sigma_e * sigma_e
}

/// Jitter-averaged interference power at the victim receiver [W].
pub fn avg_interference_power(
    tx_power: f64,
    tx_beam: &BeamModel,
    rx_gain: f64,
    pair: &InterferencePair,
    jitter: &PointingJitter,
) -> f64 {
    let tb = tx_beam.hpbw_theta_b;
    let friis = (tx_beam.wavelength / (4.0 * PI * pair.cross_distance)).powi(2);
    tx_power
        * tx_beam.boresight_gain()
        * rx_gain
        * friis
        * jitter_prefactor(tb, jitter.sigma_e)
        * (-pair.theta_lm * pair.theta_lm / broadened_width_sq(tb, jitter.sigma_e)).exp()
}

/// α_ℓm = (d_ℓ/d_ℓm)² exp(−θ_ℓm²/(θ_B²/2 + 2σ_e²)), identical hardware on all links.
pub fn interference_coefficient(pair: &InterferencePair, tx_beam: &BeamModel, jitter: &PointingJitter) -> f64 {
    let ratio = pair.victim_distance / pair.cross_distance;
    ratio * ratio
        * (-pair.theta_lm * pair.theta_lm / broadened_width_sq(tx_beam.hpbw_theta_b, jitter.sigma_e)).exp()
}

// ---------------------------------------------------------------------------
// Monte Carlo oracle
// ---------------------------------------------------------------------------

/// Which waist the oracle's instantaneous Gaussian pattern uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternConvention {
    /// Far-field 1/e² angular radius equal to θ_B (waist λ/(πθ_B)).
    #[default]
    ClosedForm,
    /// Physical waist of the beam model (1/e² radius θ_B/√(2 ln 2)).
    HalfPowerWaist,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

const MC_CHUNK: usize = 8192;

/// Per-chunk generator keyed by (seed, chunk index).
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn sample_rayleigh(rng: &mut ChaCha8Rng, sigma: f64) -> (f64, f64) {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    (sigma * (-2.0 * (1.0 - u).ln()).sqrt(), 2.0 * PI * v)
}

/// Chunked, order-deterministic Monte Carlo mean of `f` over Rayleigh draws.
fn mc_mean<F>(samples: usize, seed: u64, sigma: f64, f: F) -> McEstimate
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let n = MC_CHUNK.min(samples - k * MC_CHUNK);
            let mut rng = substream(seed, k as u64);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..n {
                let (th, ph) = sample_rayleigh(&mut rng, sigma);
                let x = f(th, ph);
                s += x;
                s2 += x * x;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    }
}

/// Monte Carlo Rayleigh moments (mean, second moment).
pub fn mc_rayleigh_moments(j: &PointingJitter, samples: usize, seed: u64) -> (McEstimate, McEstimate) {
    let m1 = mc_mean(samples, seed, j.sigma_e, |th, _| th);
    let m2 = mc_mean(samples, seed, j.sigma_e, |th, _| th * th);
    (m1, m2)
}

/// Seeded Monte Carlo average of the point-receiver interference power [W].
pub fn mc_interference_oracle(
    tx_power: f64,
    tx_beam: &BeamModel,
    rx_gain: f64,
    pair: &InterferencePair,
    jitter: &PointingJitter,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    mc_interference_oracle_with(
        tx_power,
        tx_beam,
        rx_gain,
        pair,
        jitter,
        samples,
        seed,
        PatternConvention::ClosedForm,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn mc_interference_oracle_with(
    tx_power: f64,
    tx_beam: &BeamModel,
    rx_gain: f64,
    pair: &InterferencePair,
    jitter: &PointingJitter,
    samples: usize,
    seed: u64,
    convention: PatternConvention,
) -> Result<McEstimate> {
    if samples < 10_000 {
        return Err(Error::InvalidArgument(format!("samples = {samples} < 1e4")));
    }
    let lambda = tx_beam.wavelength;
    let w0 = match convention {
        PatternConvention::ClosedForm => lambda / (PI * tx_beam.hpbw_theta_b),
        PatternConvention::HalfPowerWaist => tx_beam.waist_w0,
    };
    let d = pair.cross_distance;
    let victim = Vector3::new(pair.theta_lm.sin(), 0.0, pair.theta_lm.cos());
    let aperture = rx_gain * lambda * lambda / (4.0 * PI);
    let f = |th: f64, ph: f64| {
        let pointing = Vector3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
        let dev = pointing.cross(&victim).norm().atan2(pointing.dot(&victim));
        let z = d * dev.cos();
        let r = d * dev.sin();
        let w = radius_from_waist(lambda, w0, z);
        let intensity = 2.0 * tx_power / (PI * w * w) * (-2.0 * r * r / (w * w)).exp();
        intensity * aperture
    };
    Ok(mc_mean(samples, seed, jitter.sigma_e, f))
}

// ---------------------------------------------------------------------------
// Network aggregation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateInterference {
    pub alpha_sum: f64,
    pub alpha_tilde_sum: f64,
}

/// Geometry of interferer `m` against victim `victim`: (d_ℓm, θ_ℓm).
pub fn interference_geometry(g: &ConstellationGraph, victim: &Link, m: &Link) -> Result<(f64, f64)> {
    let tx = g.satellites[m.tx].position;
    let boresight = g.satellites[m.rx].position - tx;
    let to_victim = g.satellites[victim.rx].position - tx;
    let d = to_victim.norm();
    if !(d > 0.0) || !(boresight.norm() > 0.0) {
        return Err(Error::DegenerateLos(m.tx, victim.rx));
    }
    let theta = boresight.cross(&to_victim).norm().atan2(boresight.dot(&to_victim));
    Ok((d, theta))
}

/// Σα over the graph's active links, excluding the victim and any link whose
/// transmitter is the victim's transmitter or receiver.
pub fn aggregate_interference(
    g: &ConstellationGraph,
    victim: &Link,
    beam: &BeamModel,
    jitter: &PointingJitter,
    snr0: f64,
) -> Result<AggregateInterference> {
    let interferers: Vec<Link> = g
        .links
        .iter()
        .filter(|m| !(m.tx == victim.tx && m.rx == victim.rx))
        .filter(|m| m.tx != victim.tx && m.tx != victim.rx)
        .copied()
        .collect();
    aggregate_interference_from(g, victim, &interferers, beam, jitter, snr0)
}

/// Σα over an explicit set of concurrent interfering links.
pub fn aggregate_interference_from(
    g: &ConstellationGraph,
    victim: &Link,
    interferers: &[Link],
    beam: &BeamModel,
    jitter: &PointingJitter,
    snr0: f64,
) -> Result<AggregateInterference> {
    let mut alpha_sum = 0.0;
    for m in interferers {
        let (d_lm, theta) = interference_geometry(g, victim, m)?;
        let pair = InterferencePair {
            victim_distance: victim.distance,
            cross_distance: d_lm,
            theta_lm: theta,
        };
        alpha_sum += interference_coefficient(&pair, beam, jitter);
    }
    Ok(AggregateInterference {
        alpha_sum,
        alpha_tilde_sum: snr0 * alpha_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impairments::{db_to_lin, mdeg};
    use crate::orbit::SatelliteState;
    use crate::SPEED_OF_LIGHT;

    fn table_beam() -> BeamModel {
        BeamModel::from_hpbw(SPEED_OF_LIGHT / 300e9, mdeg(14.0))
    }

    #[test]
    fn beam_radius_landmarks() {
        let b = table_beam();
        assert_eq!(beam_radius(&b, 0.0), b.waist_w0);
        let zr = b.rayleigh_range();
        assert!((beam_radius(&b, zr) / b.waist_w0 - 2f64.sqrt()).abs() < 1e-12);
        let z = 100.0 * zr;
        let far = b.wavelength * z / (PI * b.waist_w0);
        assert!((beam_radius(&b, z) / far - 1.0).abs() < 1e-4);
    }

    #[test]
    fn hpbw_waist_round_trip() {
        let b = table_beam();
        let c = BeamModel::from_waist(b.wavelength, b.waist_w0);
        assert!((c.hpbw_theta_b / b.hpbw_theta_b - 1.0).abs() < 1e-9);
        let expect = b.divergence() * (2.0 * 2f64.ln()).sqrt();
        assert!((b.hpbw_theta_b / expect - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rayleigh_moments_analytic() {
        let z = rayleigh_pointing_moments(&PointingJitter { sigma_e: 0.0 });
        assert_eq!((z.mean, z.second_moment), (0.0, 0.0));
        let m = rayleigh_pointing_moments(&PointingJitter { sigma_e: 2.8 });
        assert!((m.mean - 3.509).abs() < 1e-3);
    }

    #[test]
    fn rayleigh_moments_sampled() {
        let j = PointingJitter { sigma_e: mdeg(2.8) };
        let a = rayleigh_pointing_moments(&j);
        let (m1, m2) = mc_rayleigh_moments(&j, 1_000_000, 7);
        assert!((m1.mean / a.mean - 1.0).abs() < 5e-3);
        assert!((m2.mean / a.second_moment - 1.0).abs() < 5e-3);
    }

    #[test]
    fn closed_form_landmarks() {
        let b = table_beam();
        let pair = InterferencePair {
            victim_distance: 1e6,
            cross_distance: 1e6,
            theta_lm: 0.0,
        };
        let p = avg_interference_power(10.0, &b, 1e5, &pair, &PointingJitter { sigma_e: 0.0 });
        let friis = 10.0 * b.boresight_gain() * 1e5 * (b.wavelength / (4.0 * PI * 1e6)).powi(2);
        assert!((p / friis - 1.0).abs() < 1e-12);
        assert!((jitter_prefactor(b.hpbw_theta_b, b.hpbw_theta_b / 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn coefficient_landmarks() {
        let b = table_beam();
        let j = PointingJitter { sigma_e: mdeg(2.8) };
        let unit = InterferencePair {
            victim_distance: 2e6,
            cross_distance: 2e6,
            theta_lm: 0.0,
        };
        assert_eq!(interference_coefficient(&unit, &b, &j), 1.0);
        let w = broadened_width_sq(b.hpbw_theta_b, j.sigma_e).sqrt();
        let edge = InterferencePair {
            victim_distance: 1e6,
            cross_distance: 2e6,
            theta_lm: w,
        };
        assert!((interference_coefficient(&edge, &b, &j) - 0.25 * (-1f64).exp()).abs() < 1e-15);
        let far = InterferencePair {
            theta_lm: 3.0 * b.hpbw_theta_b,
            ..unit
        };
        let a = interference_coefficient(&far, &b, &j);
        assert!(((a - (-1764.0f64 / 113.68).exp()) / a).abs() < 1e-9);
        assert!((a - 1.8e-7).abs() < 0.05e-7);
    }

    #[test]
    fn oracle_zero_jitter_is_deterministic_pattern() {
        let b = table_beam();
        let pair = InterferencePair {
            victim_distance: 1e6,
            cross_distance: 1e6,
            theta_lm: b.hpbw_theta_b,
        };
        let est = mc_interference_oracle(10.0, &b, db_to_lin(50.0), &pair, &PointingJitter { sigma_e: 0.0 }, 10_000, 1)
            .unwrap();
        let friis = 10.0 * b.boresight_gain() * db_to_lin(50.0) * (b.wavelength / (4.0 * PI * 1e6)).powi(2);
        let expect = friis * (-2.0f64).exp();
        assert!((est.mean / expect - 1.0).abs() < 1e-4);
        assert!(est.std_error < 1e-6 * expect);
    }

    #[test]
    fn oracle_matches_closed_form_at_beamwidth() {
        let b = table_beam();
        let j = PointingJitter { sigma_e: mdeg(2.8) };
        let pair = InterferencePair {
            victim_distance: 1e6,
            cross_distance: 1e6,
            theta_lm: b.hpbw_theta_b,
        };
        let g = db_to_lin(50.0);
        let cf = avg_interference_power(10.0, &b, g, &pair, &j);
        let mc = mc_interference_oracle(10.0, &b, g, &pair, &j, 200_000, 3).unwrap();
        assert!((mc.mean / cf - 1.0).abs() < 0.05);
    }

    #[test]
    fn half_power_waist_pattern_disagrees() {
        let b = table_beam();
        let j = PointingJitter { sigma_e: 0.2 * b.hpbw_theta_b };
        let pair = InterferencePair {
            victim_distance: 1e6,
            cross_distance: 1e6,
            theta_lm: b.hpbw_theta_b,
        };
        let cf = avg_interference_power(1.0, &b, 1.0, &pair, &j);
        let mc = mc_interference_oracle_with(1.0, &b, 1.0, &pair, &j, 50_000, 5, PatternConvention::HalfPowerWaist)
            .unwrap();
        assert!((mc.mean / cf - 1.0).abs() > 0.2);
    }

    #[test]
    fn standard_error_scales_as_inverse_sqrt() {
        let b = table_beam();
        let j = PointingJitter { sigma_e: 0.5 * b.hpbw_theta_b };
        let pair = InterferencePair {
            victim_distance: 1e6,
            cross_distance: 1e6,
            theta_lm: b.hpbw_theta_b,
        };
        let spread = |n: usize| {
            let xs: Vec<f64> = (0..20)
                .map(|s| mc_interference_oracle(1.0, &b, 1.0, &pair, &j, n, 100 + s).unwrap().mean)
                .collect();
            let m = xs.iter().sum::<f64>() / 20.0;
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 19.0).sqrt()
        };
        let ratio = spread(10_000) / spread(40_000);
        assert!(ratio > 1.3 && ratio < 3.0, "ratio {ratio}");
        let a = mc_interference_oracle(1.0, &b, 1.0, &pair, &j, 10_000, 9).unwrap();
        let c = mc_interference_oracle(1.0, &b, 1.0, &pair, &j, 40_000, 9).unwrap();
        assert!((a.std_error / c.std_error / 2.0 - 1.0).abs() < 0.1);
    }

    #[test]
    fn too_few_samples_rejected() {
        let b = table_beam();
        let pair = InterferencePair {
            victim_distance: 1.0,
            cross_distance: 1.0,
            theta_lm: 0.0,
        };
        assert!(mc_interference_oracle(1.0, &b, 1.0, &pair, &PointingJitter { sigma_e: 0.0 }, 100, 0).is_err());
    }

    fn sat(x: f64, y: f64) -> SatelliteState {
        SatelliteState::new(Vector3::new(x, y, 0.0), Vector3::zeros())
    }

    #[test]
    fn single_link_has_no_interference() {
        let g = ConstellationGraph::new(vec![sat(0.0, 0.0), sat(1e6, 0.0)]).with_full_mesh();
        let v = g.links[0];
        let a = aggregate_interference(&g, &v, &table_beam(), &PointingJitter { sigma_e: 1e-5 }, 10.0).unwrap();
        assert_eq!((a.alpha_sum, a.alpha_tilde_sum), (0.0, 0.0));
    }

    #[test]
    fn identical_interferers_add() {
        let b = table_beam();
        let j = PointingJitter { sigma_e: mdeg(2.8) };
        let mut g = ConstellationGraph::new(vec![sat(0.0, 0.0), sat(1e6, 0.0), sat(-1e6, 100.0), sat(3e6, 100.0)]);
        let victim = g.link(0, 1).unwrap();
        let m = g.link(2, 3).unwrap();
        g.links = vec![victim, m];
        let one = aggregate_interference(&g, &victim, &b, &j, 1.0).unwrap();
        let two = aggregate_interference_from(&g, &victim, &[m, m], &b, &j, 1.0).unwrap();
        assert!((two.alpha_sum - 2.0 * one.alpha_sum).abs() < 1e-15);
        assert!(one.alpha_sum > 0.0);
    }
}
