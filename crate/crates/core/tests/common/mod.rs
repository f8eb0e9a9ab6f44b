//! Test-side oracles and random instance builders shared by the integration
//! suites. Nothing here calls into the information-form code paths.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn randn_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// A·Aᵀ/n + floor·I.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let a = randn(rng, n, n);
    &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * floor
}

/// Well-conditioned transition I + 0.1·G.
pub fn random_transition(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n) + randn(rng, n, n) * 0.1
}

pub fn random_row_count(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi)
}

/// Dense symmetric inverse by LU (oracle; independent of Cholesky/Woodbury).
pub fn dense_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().lu().try_inverse().expect("oracle inverse")
}

pub struct KalmanState {
    pub x: DVector<f64>,
    pub p: DMatrix<f64>,
}

/// Covariance-form Kalman predict + update with independent scalar rows.
pub fn kalman_step(
    s: &KalmanState,
    f: &DMatrix<f64>,
    q: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r_diag: &DVector<f64>,
    z: &DVector<f64>,
) -> KalmanState {
    let x_pred = f * &s.x;
    let p_pred = f * &s.p * f.transpose() + q;
    let r = DMatrix::from_diagonal(r_diag);
    let sm = h * &p_pred * h.transpose() + r;
    let k = &p_pred * h.transpose() * dense_inverse(&sm);
    let n = s.x.len();
    let x = &x_pred + &k * (z - h * &x_pred);
    let ikh = DMatrix::identity(n, n) - &k * h;
    let p = &ikh * &p_pred * ikh.transpose() + &k * DMatrix::from_diagonal(r_diag) * k.transpose();
    KalmanState { x, p }
}

pub fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn rel_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, v| a.min(*v))
}

pub fn max_abs_eig(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues().iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// Numerical rank by eigenvalue threshold relative to the largest.
pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    let s = (m + m.transpose()) * 0.5;
    let ev = s.symmetric_eigenvalues();
    let top = ev.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    ev.iter().filter(|v| v.abs() > rtol * top).count()
}
