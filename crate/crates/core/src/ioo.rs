//! Opportunistic bistatic sensing: an interfering transmitter illuminates a
//! target and the victim receiver ranges the echo. The echo adds a rank-1
//! Fisher information term to the target's position prior.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impairments::{lin_to_db, phase_noise_variance, HardwareProfile, SignalSpec};
use crate::SPEED_OF_LIGHT;

const MIN_SEPARATION: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BistaticGeometry {
    /// Illuminating transmitter p_m [m]
    pub tx_pos: Vector3<f64>,
    /// Echo receiver p_ℓ [m]
    pub rx_pos: Vector3<f64>,
    /// Target p_t [m]
    pub target_pos: Vector3<f64>,
}

impl BistaticGeometry {
    pub fn validate(&self) -> Result<()> {
        let dt = (self.target_pos - self.tx_pos).norm();
        let dr = (self.target_pos - self.rx_pos).norm();
        if !(dt > MIN_SEPARATION) || !(dr > MIN_SEPARATION) {
            return Err(Error::InvalidGeometry("target coincides with a node".into()));
        }
        Ok(())
    }

    pub fn tx_range(&self) -> f64 {
        (self.target_pos - self.tx_pos).norm()
    }

    pub fn rx_range(&self) -> f64 {
        (self.target_pos - self.rx_pos).norm()
    }

    /// Angle at the target between the directions to tx and rx [rad].
    pub fn bistatic_angle(&self) -> f64 {
        let a = self.tx_pos - self.target_pos;
        let b = self.rx_pos - self.target_pos;
        a.cross(&b).norm().atan2(a.dot(&b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchoBudget {
    /// [W]
    pub tx_power: f64,
    /// Toward the target [linear]
    pub tx_gain: f64,
    /// Toward the target [linear]
    pub rx_gain: f64,
    /// Bistatic RCS σ_b [m²]
    pub rcs_sigma_b: f64,
    /// [m]
    pub wavelength: f64,
    /// L_proc [linear]
    pub processing_loss: f64,
    /// N_eff including residual direct-path leakage [W]
    pub effective_noise: f64,
    /// [dB]
    pub processing_gain: f64,
}

impl EchoBudget {
    pub fn validate(&self) -> Result<()> {
        let ok = [
            self.tx_power,
            self.tx_gain,
            self.rx_gain,
            self.rcs_sigma_b,
            self.wavelength,
            self.processing_loss,
            self.effective_noise,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite())
            && self.processing_gain.is_finite();
        if !ok {
            return Err(Error::InvalidArgument("echo budget values must be positive".into()));
        }
        Ok(())
    }
}

/// R_b = |p_m − p_t| + |p_t − p_ℓ| [m].
pub fn bistatic_range(g: &BistaticGeometry) -> f64 {
    g.tx_range() + g.rx_range()
}

/// ∇_{p_t} R_b = u_{m→t} + u_{ℓ→t}.
pub fn bistatic_gradient(g: &BistaticGeometry) -> Result<Vector3<f64>> {
    g.validate()?;
    let a = g.target_pos - g.tx_pos;
    let b = g.target_pos - g.rx_pos;
    Ok(a / a.norm() + b / b.norm())
}

/// Bistatic path loss L_bistatic = (4π)³ R_mt² R_ℓt² L_proc / (P_t λ²).
pub fn bistatic_loss(g: &BistaticGeometry, e: &EchoBudget) -> f64 {
    let r1 = g.tx_range();
    let r2 = g.rx_range();
    (4.0 * PI).powi(3) * r1 * r1 * r2 * r2 * e.processing_loss / (e.tx_power * e.wavelength * e.wavelength)
}

/// Echo SINR before processing gain [linear].
pub fn bistatic_sinr_pre(g: &BistaticGeometry, e: &EchoBudget) -> f64 {
    e.rcs_sigma_b * e.tx_gain * e.rx_gain / (bistatic_loss(g, e) * e.effective_noise)
}

/// Echo SINR after processing gain [linear].
pub fn bistatic_sinr(g: &BistaticGeometry, e: &EchoBudget) -> f64 {
    bistatic_sinr_pre(g, e) * 10f64.powf(e.processing_gain / 10.0)
}

/// σ²_Rb = c²[κ_WF/SINR + σ²_φ/(2πf_c)²] [m²].
pub fn bistatic_range_variance(sig: &SignalSpec, hw: &HardwareProfile, sinr: f64) -> Result<f64> {
    if !(sinr > 0.0) {
        return Err(Error::NoSignal);
    }
    Ok(SPEED_OF_LIGHT * SPEED_OF_LIGHT * sig.kappa_wf() / sinr + phase_noise_variance(sig, hw.sigma_phi_sq))
}

/// Rank-1 echo information ∇R_b∇R_bᵀ/σ²_Rb [m⁻²].
pub fn ioo_fim(g: &BistaticGeometry, sig: &SignalSpec, hw: &HardwareProfile, e: &EchoBudget) -> Result<Matrix3<f64>> {
    let grad = bistatic_gradient(g)?;
    let var = bistatic_range_variance(sig, hw, bistatic_sinr(g, e))?;
    Ok(grad * grad.transpose() / var)
}

/// Ellipsoid semi-axes 1/√λ of an information matrix, largest first [m].
pub fn semi_axes(j: &Matrix3<f64>) -> [f64; 3] {
    let eig = SymmetricEigen::new(*j);
    let mut ax: Vec<f64> = eig.eigenvalues.iter().map(|l| 1.0 / l.max(0.0).sqrt()).collect();
    ax.sort_by(|a, b| b.total_cmp(a));
    [ax[0], ax[1], ax[2]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct IooFusion {
    pub posterior: Matrix3<f64>,
    /// √(det prior / det posterior)
    pub volume_ratio: f64,
    /// 10·log10(det posterior / det prior) [dB]
    pub info_gain_db: f64,
    /// 10·log10(tr posterior / tr prior) [dB]
    pub trace_gain_db: f64,
    /// Information along the prior's weakest axis, posterior over prior [dB]
    pub weak_axis_gain_db: f64,
    pub prior_axes: [f64; 3],
    pub posterior_axes: [f64; 3],
    /// σ²_Rb of the echo [m²]
    pub range_variance: f64,
    /// Set when the prior is singular and the pseudo-inverse was used.
    pub singular_prior: bool,
}

/// Add the echo information to a 3×3 position prior.
pub fn fuse_ioo(
    prior: &Matrix3<f64>,
    g: &BistaticGeometry,
    sig: &SignalSpec,
    hw: &HardwareProfile,
    e: &EchoBudget,
) -> Result<IooFusion> {
    let grad = bistatic_gradient(g)?;
    let var = bistatic_range_variance(sig, hw, bistatic_sinr(g, e))?;
    fuse_gradient(prior, &grad, var)
}

/// Rank-1 fusion for a given gradient and range variance.
pub fn fuse_gradient(prior: &Matrix3<f64>, grad: &Vector3<f64>, var: f64) -> Result<IooFusion> {
    let eig = SymmetricEigen::new(*prior);
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if eig.eigenvalues.iter().any(|l| *l < -1e-12 * lmax) {
        return Err(Error::InvalidArgument("prior is not PSD".into()));
    }
    let cut = 1e-12 * lmax;
    let singular = eig.eigenvalues.iter().any(|l| *l <= cut);
    let mut pinv = Matrix3::zeros();
    for k in 0..3 {
        let l = eig.eigenvalues[k];
        if l > cut {
            let v = eig.eigenvectors.column(k);
            pinv += v * v.transpose() / l;
        }
    }
    let posterior = prior + grad * grad.transpose() / var;
    let q = (grad.transpose() * pinv * grad)[(0, 0)];
    let volume_ratio = 1.0 / (1.0 + q / var).sqrt();
    let info_gain_db = if singular {
        f64::INFINITY
    } else {
        lin_to_db(posterior.determinant() / prior.determinant())
    };
    let (kmin, lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (i, &v)| if v < a.1 { (i, v) } else { a });
    let vw = eig.eigenvectors.column(kmin).into_owned();
    let weak_post = (vw.transpose() * posterior * &vw)[(0, 0)];
    Ok(IooFusion {
        posterior,
        volume_ratio,
        info_gain_db,
        trace_gain_db: lin_to_db(posterior.trace() / prior.trace()),
        weak_axis_gain_db: lin_to_db(weak_post / lmin),
        prior_axes: semi_axes(prior),
        posterior_axes: semi_axes(&posterior),
        range_variance: var,
        singular_prior: singular,
    })
}

/// 10·log10(L_bistatic·N_eff/(σ_b·G_T·G_R)): processing gain that brings the
/// echo to 0 dB SINR [dB].
pub fn pg_reference_db(g: &BistaticGeometry, e: &EchoBudget) -> f64 {
    lin_to_db(bistatic_loss(g, e) * e.effective_noise / (e.rcs_sigma_b * e.tx_gain * e.rx_gain))
}

/// Minimum processing gain [dB] for the echo to raise det(J) by
/// `target_gain_db` over `prior`; infinite when the phase-noise floor alone
/// prevents it.
pub fn pg_threshold(
    e: &EchoBudget,
    g: &BistaticGeometry,
    prior: &Matrix3<f64>,
    sig: &SignalSpec,
    hw: &HardwareProfile,
    target_gain_db: f64,
) -> Result<f64> {
    if !(target_gain_db > 0.0) {
        return Err(Error::InvalidArgument("target gain must be > 0 dB".into()));
    }
    let grad = bistatic_gradient(g)?;
    let pinv = prior
        .try_inverse()
        .ok_or_else(|| Error::Singular("prior information".into()))?;
    let q = (grad.transpose() * pinv * grad)[(0, 0)];
    let ratio = 10f64.powf(target_gain_db / 10.0);
    let var_req = q / (ratio - 1.0);
    let thermal = var_req - phase_noise_variance(sig, hw.sigma_phi_sq);
    if !(thermal > 0.0) {
        return Ok(f64::INFINITY);
    }
    let sinr_req = SPEED_OF_LIGHT * SPEED_OF_LIGHT * sig.kappa_wf() / thermal;
    Ok(pg_reference_db(g, e) + lin_to_db(sinr_req))
}

/// Effective noise N_eff [W] that places the `target_gain_db` threshold at
/// `pg_db`.
pub fn calibrate_effective_noise(
    e: &EchoBudget,
    g: &BistaticGeometry,
    prior: &Matrix3<f64>,
    sig: &SignalSpec,
    hw: &HardwareProfile,
    pg_db: f64,
    target_gain_db: f64,
) -> Result<f64> {
    let unit = EchoBudget {
        effective_noise: 1.0,
        ..*e
    };
    let th = pg_threshold(&unit, g, prior, sig, hw, target_gain_db)?;
    if !th.is_finite() {
        return Err(Error::InvalidArgument("target gain unreachable".into()));
    }
    Ok(10f64.powf((pg_db - th) / 10.0))
}

/// Processing gain [dB] at which the posterior major semi-axis shrinks by
/// `reduction` (fraction of the prior major axis), by bisection.
pub fn pg_for_axis_reduction(
    e: &EchoBudget,
    g: &BistaticGeometry,
    prior: &Matrix3<f64>,
    sig: &SignalSpec,
    hw: &HardwareProfile,
    reduction: f64,
) -> Result<f64> {
    if !(reduction > 0.0 && reduction < 1.0) {
        return Err(Error::InvalidArgument("reduction must be in (0, 1)".into()));
    }
    let a0 = semi_axes(prior)[0];
    let target = a0 * (1.0 - reduction);
    let major = |pg: f64| -> Result<f64> {
        let ee = EchoBudget { processing_gain: pg, ..*e };
        Ok(fuse_ioo(prior, g, sig, hw, &ee)?.posterior_axes[0])
    };
    let (mut lo, mut hi) = (-100.0, 300.0);
    if major(hi)? > target {
        return Err(Error::InvalidArgument("axis reduction unreachable".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if major(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// tr(J_IoO)/λ_min(J_prior) > α_ℓm/SINR_comm.
pub fn crossover_holds(j_ioo: &Matrix3<f64>, prior: &Matrix3<f64>, alpha_lm: f64, sinr_comm: f64) -> bool {
    let lmin = SymmetricEigen::new(*prior)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, v| a.min(*v));
    j_ioo.trace() / lmin > alpha_lm / sinr_comm
}
