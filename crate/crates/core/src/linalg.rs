//! Small dense linear-algebra helpers shared by the fusion and study code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative eigenvalue cutoff used for pseudo-inverses and numeric rank.
pub const RANK_RTOL: f64 = 1e-10;

/// (M + Mᵀ)/2.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix via eigendecomposition.
/// Eigenvalues below `rtol · max|λ|` are treated as zero.
pub fn pinv_sym(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if lmax == 0.0 {
        return DMatrix::zeros(n, n);
    }
    let cut = rtol * lmax;
    let mut out = DMatrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() > cut {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / lam;
        }
    }
    out
}

/// Numeric rank of a symmetric matrix (eigenvalues above `rtol · max|λ|`).
pub fn rank_sym(m: &DMatrix<f64>, rtol: f64) -> usize {
    if m.nrows() == 0 {
        return 0;
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if lmax == 0.0 {
        return 0;
    }
    eig.eigenvalues.iter().filter(|v| v.abs() > rtol * lmax).count()
}

/// Sorted (ascending) eigenvalues of a symmetric matrix.
pub fn eigenvalues_sym(m: &DMatrix<f64>) -> Vec<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn min_eigenvalue_sym(m: &DMatrix<f64>) -> f64 {
    eigenvalues_sym(m).first().copied().unwrap_or(0.0)
}

/// Solve `M x = b` for symmetric PSD `M`: Cholesky when positive definite,
/// minimum-norm pseudo-inverse solution otherwise.
pub fn solve_psd(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    match m.clone().cholesky() {
        Some(ch) => ch.solve(b),
        None => pinv_sym(m, RANK_RTOL) * b,
    }
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn inv_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|ch| ch.inverse())
}

/// ‖A − B‖_F / max(‖B‖_F, tiny).
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let den = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / den
}

/// Sum of log10 of the eigenvalues above the rank cutoff, and that rank.
pub fn log10_pdet_sym(m: &DMatrix<f64>, rtol: f64) -> (f64, usize) {
    let eig = eigenvalues_sym(m);
    let lmax = eig.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut s = 0.0;
    let mut r = 0;
    for &l in &eig {
        if l > rtol * lmax && l > 0.0 {
            s += l.log10();
            r += 1;
        }
    }
    (s, r)
}
