//! Per-satellite kinematic and clock state propagation.
//!
//! Mean motion is integrated with fixed-step RK4 on central gravity plus J2.
//! The linearized transition F is only used for information propagation.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SPEED_OF_LIGHT;

pub type EciPosition = Vector3<f64>;
pub type EciVelocity = Vector3<f64>;
pub type Matrix8 = SMatrix<f64, 8, 8>;
pub type Vector8 = SVector<f64, 8>;

/// Number of state slots per satellite: p(3), ṗ(3), c·b, c·ḃ.
pub const STATE_DIM: usize = 8;

/// Gravity model constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConstants {
    /// Gravitational parameter [m³/s²]
    pub mu: f64,
    /// Second zonal harmonic [-]
    pub j2: f64,
    /// Earth radius [m]
    pub re: f64,
}

pub const EARTH: DynamicsConstants = DynamicsConstants {
    mu: 3.986e14,
    j2: 1.08263e-3,
    re: 6.371e6,
};

impl Default for DynamicsConstants {
    fn default() -> Self {
        EARTH
    }
}

/// Clock state in range-equivalent units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClockState {
    /// c·b [m]
    pub bias: f64,
    /// c·ḃ [m/s]
    pub drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteState {
    pub position: EciPosition,
    pub velocity: EciVelocity,
    pub clock: ClockState,
    /// [s]
    pub epoch: f64,
}

impl SatelliteState {
    pub fn new(position: EciPosition, velocity: EciVelocity) -> Self {
        Self {
            position,
            velocity,
            clock: ClockState::default(),
            epoch: 0.0,
        }
    }

    /// Circular orbit state at `position`, moving along `normalize(ŷ × p̂)`
    /// (or `ẑ × p̂` when p is along ŷ).
    pub fn circular(position: EciPosition, consts: &DynamicsConstants) -> Self {
        let r = position.norm();
        let phat = position / r;
        let mut dir = Vector3::y().cross(&phat);
        if dir.norm() < 1e-9 {
            dir = Vector3::z().cross(&phat);
        }
        let v = (consts.mu / r).sqrt();
        Self::new(position, dir.normalize() * v)
    }

    /// Fixed-order 8-vector [p, ṗ, c·b, c·ḃ].
    pub fn to_vector(&self) -> Vector8 {
        let p = &self.position;
        let v = &self.velocity;
        Vector8::from_column_slice(&[
            p.x,
            p.y,
            p.z,
            v.x,
            v.y,
            v.z,
            self.clock.bias,
            self.clock.drift,
        ])
    }

    pub fn from_vector(x: &Vector8, epoch: f64) -> Self {
        Self {
            position: Vector3::new(x[0], x[1], x[2]),
            velocity: Vector3::new(x[3], x[4], x[5]),
            clock: ClockState {
                bias: x[6],
                drift: x[7],
            },
            epoch,
        }
    }
}

/// Process noise power spectral densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessNoiseSpec {
    /// Acceleration PSD σ²_a [m²/s³]
    pub sigma_a_sq: f64,
    /// Clock bias diffusion σ²_y [s²/s]
    pub sigma_y_sq: f64,
    /// Clock rate diffusion [s²/s³]
    pub clock_drift_psd: f64,
}

impl Default for ProcessNoiseSpec {
    fn default() -> Self {
        Self {
            sigma_a_sq: 1e-13,
            sigma_y_sq: 1e-20,
            clock_drift_psd: 1e-26,
        }
    }
}

// ---------------------------------------------------------------------------
// Gravity
// ---------------------------------------------------------------------------

/// Central plus J2 acceleration with explicit constants; `j2 = false` gives two-body.
pub fn gravity_acceleration(
    p: &EciPosition,
    consts: &DynamicsConstants,
    j2: bool,
) -> Result<Vector3<f64>> {
    let r = p.norm();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::DegeneratePosition(format!("|p| = {r}")));
    }
    let r3 = r * r * r;
    let mut a = -consts.mu / r3 * p;
    if j2 {
        let k = 1.5 * consts.mu * consts.j2 * consts.re * consts.re;
        let r5 = r3 * r * r;
        let zr2 = p.z * p.z / (r * r);
        a += -k / r5
            * Vector3::new(
                p.x * (1.0 - 5.0 * zr2),
                p.y * (1.0 - 5.0 * zr2),
                p.z * (3.0 - 5.0 * zr2),
            );
    }
    Ok(a)
}

/// Total acceleration (central + J2) with Earth constants [m/s²].
pub fn j2_acceleration(p: &EciPosition) -> Result<Vector3<f64>> {
    gravity_acceleration(p, &EARTH, true)
}

/// J2 part of the acceleration alone.
pub fn j2_perturbation(p: &EciPosition, consts: &DynamicsConstants) -> Result<Vector3<f64>> {
    Ok(gravity_acceleration(p, consts, true)? - gravity_acceleration(p, consts, false)?)
}

/// ∂a/∂p for central (+ optional J2) gravity.
pub fn gravity_gradient(p: &EciPosition, consts: &DynamicsConstants, j2: bool) -> Matrix3<f64> {
    let r2 = p.norm_squared();
    let r = r2.sqrt();
    let r3 = r2 * r;
    let r5 = r3 * r2;
    let mut g = Matrix3::identity() * (-consts.mu / r3) + (p * p.transpose()) * (3.0 * consts.mu / r5);
    if j2 {
        let k = 1.5 * consts.mu * consts.j2 * consts.re * consts.re;
        let r7 = r5 * r2;
        let r9 = r7 * r2;
        let z = p.z;
        let z2 = z * z;
        let gxy = 1.0 / r5 - 5.0 * z2 / r7;
        let gz = 3.0 / r5 - 5.0 * z2 / r7;
        let dgz_dz = |i: usize| if i == 2 { -10.0 * z / r7 } else { 0.0 };
        for i in 0..3 {
            let common = 35.0 * z2 / r9 * p[i] + dgz_dz(i);
            let d_gxy = -5.0 / r7 * p[i] + common;
            let d_gz = -15.0 / r7 * p[i] + common;
            let delta = |a: usize| if a == i { 1.0 } else { 0.0 };
            g[(0, i)] += -k * (delta(0) * gxy + p.x * d_gxy);
            g[(1, i)] += -k * (delta(1) * gxy + p.y * d_gxy);
            g[(2, i)] += -k * (delta(2) * gz + z * d_gz);
        }
    }
    g
}

/// Gravitational potential consistent with [`gravity_acceleration`] (a = −∇Φ).
pub fn gravity_potential(p: &EciPosition, consts: &DynamicsConstants, j2: bool) -> f64 {
    let r = p.norm();
    let mut phi = -consts.mu / r;
    if j2 {
        let zr2 = p.z * p.z / (r * r);
        phi += consts.mu * consts.j2 * consts.re * consts.re / (2.0 * r * r * r) * (3.0 * zr2 - 1.0);
    }
    phi
}

/// Specific orbital energy v²/2 + Φ [J/kg].
pub fn specific_energy(s: &SatelliteState, consts: &DynamicsConstants, j2: bool) -> f64 {
    0.5 * s.velocity.norm_squared() + gravity_potential(&s.position, consts, j2)
}

// ---------------------------------------------------------------------------
// Linearization
// ---------------------------------------------------------------------------

/// Continuous-time Jacobian A of the 8-state dynamics at `s`.
pub fn linearize_dynamics(s: &SatelliteState) -> Matrix8 {
    linearize_with(&s.position, &EARTH, true)
}

fn linearize_with(p: &EciPosition, consts: &DynamicsConstants, j2: bool) -> Matrix8 {
    let mut a = Matrix8::zeros();
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    a.fixed_view_mut::<3, 3>(3, 0).copy_from(&gravity_gradient(p, consts, j2));
    a[(6, 7)] = 1.0;
    a
}

/// Upper bound of the step for which the second-order transition is accurate.
pub const TRANSITION_DT_MAX: f64 = 10.0;

/// F = I + Ā dt + ½ Ā² dt², Ā at the two-body half-step midpoint.
/// Steps longer than [`TRANSITION_DT_MAX`] are accepted but lose accuracy.
pub fn discrete_transition(s: &SatelliteState, dt: f64) -> Result<Matrix8> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be >= 0")));
    }
    if dt == 0.0 {
        return Ok(Matrix8::identity());
    }
    let (p_mid, _) = kepler_propagate(&s.position, &s.velocity, 0.5 * dt, EARTH.mu)?;
    let a = linearize_with(&p_mid, &EARTH, true);
    Ok(Matrix8::identity() + a * dt + a * a * (0.5 * dt * dt))
}

/// Block-diagonal VRW process noise for one satellite.
pub fn process_noise(spec: &ProcessNoiseSpec, dt: f64) -> Matrix8 {
    let mut q = Matrix8::zeros();
    let sa = spec.sigma_a_sq;
    let pp = sa * dt.powi(3) / 3.0;
    let pv = sa * dt * dt / 2.0;
    let vv = sa * dt;
    for i in 0..3 {
        q[(i, i)] = pp;
        q[(i, i + 3)] = pv;
        q[(i + 3, i)] = pv;
        q[(i + 3, i + 3)] = vv;
    }
    let c2 = SPEED_OF_LIGHT * SPEED_OF_LIGHT;
    q[(6, 6)] = spec.sigma_y_sq * c2 * dt;
    q[(7, 7)] = spec.clock_drift_psd * c2 * dt;
    q
}

// ---------------------------------------------------------------------------
// Two-body Kepler propagation (universal variables)
// ---------------------------------------------------------------------------

fn stumpff_c(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        0.5 - z / 24.0 + z * z / 720.0 - z * z * z / 40320.0
    } else if z > 0.0 {
        let s = z.sqrt();
        (1.0 - s.cos()) / z
    } else {
        let s = (-z).sqrt();
        (s.cosh() - 1.0) / (-z)
    }
}

fn stumpff_s(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        1.0 / 6.0 - z / 120.0 + z * z / 5040.0 - z * z * z / 362_880.0
    } else if z > 0.0 {
        let s = z.sqrt();
        (s - s.sin()) / (s * s * s)
    } else {
        let s = (-z).sqrt();
        (s.sinh() - s) / (s * s * s)
    }
}

/// Analytic two-body propagation of (r, v) by `dt` seconds.
pub fn kepler_propagate(
    r0v: &Vector3<f64>,
    v0v: &Vector3<f64>,
    dt: f64,
    mu: f64,
) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let r0 = r0v.norm();
    if !(r0 > 0.0) {
        return Err(Error::DegeneratePosition("zero radius".into()));
    }
    if dt == 0.0 {
        return Ok((*r0v, *v0v));
    }
    let sqmu = mu.sqrt();
    let vr0 = r0v.dot(v0v) / r0;
    let alpha = 2.0 / r0 - v0v.norm_squared() / mu;

    let mut chi = sqmu * dt / r0;
    for _ in 0..50 {
        let z = alpha * chi * chi;
        let c = stumpff_c(z);
        let s = stumpff_s(z);
        let f = r0 * vr0 / sqmu * chi * chi * c + (1.0 - alpha * r0) * chi.powi(3) * s + r0 * chi
            - sqmu * dt;
        let fp = r0 * vr0 / sqmu * chi * (1.0 - z * s) + (1.0 - alpha * r0) * chi * chi * c + r0;
        let step = f / fp;
        chi -= step;
        if step.abs() <= 1e-13 * chi.abs().max(1e-300) {
            break;
        }
    }
    let z = alpha * chi * chi;
    let c = stumpff_c(z);
    let s = stumpff_s(z);
    let f = 1.0 - chi * chi / r0 * c;
    let g = dt - chi.powi(3) * s / sqmu;
    let r = f * r0v + g * v0v;
    let rn = r.norm();
    let fdot = sqmu / (rn * r0) * (z * chi * s - chi);
    let gdot = 1.0 - chi * chi / rn * c;
    Ok((r, fdot * r0v + gdot * v0v))
}

// ---------------------------------------------------------------------------
// Nonlinear propagation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorOptions {
    /// Maximum RK4 step [s]
    pub step: f64,
    pub j2: bool,
    pub consts: DynamicsConstants,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            j2: true,
            consts: EARTH,
        }
    }
}

/// RK4 propagation of position/velocity; clock advances linearly.
pub fn propagate_state(s: &SatelliteState, dt: f64) -> Result<SatelliteState> {
    propagate_state_with(s, dt, &PropagatorOptions::default())
}

pub fn propagate_state_with(
    s: &SatelliteState,
    dt: f64,
    opts: &PropagatorOptions,
) -> Result<SatelliteState> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be >= 0")));
    }
    if dt == 0.0 {
        return Ok(*s);
    }
    if !(opts.step > 0.0) {
        return Err(Error::InvalidArgument("step must be > 0".into()));
    }
    let n = (dt / opts.step).ceil().max(1.0) as u64;
    let h = dt / n as f64;
    let acc = |p: &Vector3<f64>| gravity_acceleration(p, &opts.consts, opts.j2);
    let mut p = s.position;
    let mut v = s.velocity;
    for _ in 0..n {
        let k1v = acc(&p)?;
        let k1p = v;
        let k2v = acc(&(p + 0.5 * h * k1p))?;
        let k2p = v + 0.5 * h * k1v;
        let k3v = acc(&(p + 0.5 * h * k2p))?;
        let k3p = v + 0.5 * h * k2v;
        let k4v = acc(&(p + h * k3p))?;
        let k4p = v + h * k3v;
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    Ok(SatelliteState {
        position: p,
        velocity: v,
        clock: ClockState {
            bias: s.clock.bias + s.clock.drift * dt,
            drift: s.clock.drift,
        },
        epoch: s.epoch + dt,
    })
}
