//! Network Fisher information core: information-filter recursion, correlated
//! noise with low-rank Woodbury inversion, clock marginalization, DOP
//! metrics and weighted-estimator mismodeling.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::impairments::{phase_noise_variance, HardwareProfile, SignalSpec};
use crate::linalg::{inv_spd, min_eigenvalue_sym, pinv_sym, rank_sym, solve_psd, symmetrize, RANK_RTOL};
use crate::network::{ConstellationGraph, SparseRow};
use crate::orbit::{discrete_transition, process_noise, ProcessNoiseSpec, SatelliteState, STATE_DIM};
use crate::SPEED_OF_LIGHT;

/// Relative regularization added to a singular process noise (ε·trace/dim).
pub const Q_REGULARIZATION: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Kinematic,
    Clock,
}

/// Slot labels of the standard 8-state-per-satellite layout.
pub fn standard_partition(n_sat: usize) -> Vec<SlotKind> {
    (0..n_sat * STATE_DIM)
        .map(|i| if i % STATE_DIM < 6 { SlotKind::Kinematic } else { SlotKind::Clock })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InformationState {
    pub j: DMatrix<f64>,
    pub y: DVector<f64>,
    /// [s]
    pub epoch: f64,
    pub partition: Vec<SlotKind>,
}

impl InformationState {
    /// No-prior state (J = 0, y = 0) for `n_sat` satellites.
    pub fn zeros(n_sat: usize) -> Self {
        let n = n_sat * STATE_DIM;
        Self {
            j: DMatrix::zeros(n, n),
            y: DVector::zeros(n),
            epoch: 0.0,
            partition: standard_partition(n_sat),
        }
    }

    pub fn new(j: DMatrix<f64>, y: DVector<f64>, partition: Vec<SlotKind>) -> Result<Self> {
        let n = j.nrows();
        if j.ncols() != n || y.len() != n || partition.len() != n {
            return Err(Error::Dimension(format!(
                "J {}x{}, y {}, partition {}",
                j.nrows(),
                j.ncols(),
                y.len(),
                partition.len()
            )));
        }
        Ok(Self {
            j,
            y,
            epoch: 0.0,
            partition,
        })
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    /// Checks symmetry and positive semi-definiteness within tolerance.
    pub fn is_valid(&self) -> bool {
        let norm = self.j.norm();
        let asym = (&self.j - self.j.transpose()).norm();
        if asym > 1e-10 * norm.max(f64::MIN_POSITIVE) {
            return false;
        }
        if self.dim() == 0 || norm == 0.0 {
            return true;
        }
        let tr = self.j.trace();
        min_eigenvalue_sym(&self.j) >= -1e-9 * tr.abs() / self.dim() as f64
    }

    /// Point estimate x̂ = J⁻¹y (pseudo-inverse solution when J is singular).
    pub fn estimate(&self) -> DVector<f64> {
        solve_psd(&self.j, &self.y)
    }
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

fn regularized_q_inverse(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(inv) = inv_spd(q) {
        return Ok(symmetrize(&inv));
    }
    let n = q.nrows();
    let tr = q.trace();
    if !(tr > 0.0) {
        return Err(Error::Singular("process noise has zero trace".into()));
    }
    let eps = Q_REGULARIZATION * tr / n as f64;
    let reg = q + DMatrix::identity(n, n) * eps;
    inv_spd(&reg)
        .map(|m| symmetrize(&m))
        .ok_or_else(|| Error::Singular("process noise not positive definite after regularization".into()))
}

/// Information-form prediction through transition `f` with process noise `q`.
pub fn if_predict(s: &InformationState, f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<InformationState> {
    let n = s.dim();
    if f.shape() != (n, n) || q.shape() != (n, n) {
        return Err(Error::Dimension(format!("state {n}, F {:?}, Q {:?}", f.shape(), q.shape())));
    }
    let qi = regularized_q_inverse(q)?;
    let qif = &qi * f;
    let m_inv = symmetrize(&(&s.j + f.transpose() * &qif));
    let m_qift = match m_inv.clone().cholesky() {
        Some(ch) => ch.solve(&qif.transpose()),
        None => pinv_sym(&m_inv, RANK_RTOL) * qif.transpose(),
    };
    let j_new = symmetrize(&(&qi - &qif * m_qift));
    let x = solve_psd(&s.j, &s.y);
    let y_new = &j_new * (f * x);
    Ok(InformationState {
        j: j_new,
        y: y_new,
        epoch: s.epoch,
        partition: s.partition.clone(),
    })
}

/// Block-diagonal transition for a satellite set.
pub fn network_transition(sats: &[SatelliteState], dt: f64) -> Result<DMatrix<f64>> {
    let n = sats.len() * STATE_DIM;
    let mut f = DMatrix::zeros(n, n);
    for (k, s) in sats.iter().enumerate() {
        let fk = discrete_transition(s, dt)?;
        f.view_mut((k * STATE_DIM, k * STATE_DIM), (STATE_DIM, STATE_DIM)).copy_from(&fk);
    }
    Ok(f)
}

/// Block-diagonal process noise for `n_sat` identical satellites.
pub fn network_process_noise(spec: &ProcessNoiseSpec, n_sat: usize, dt: f64) -> DMatrix<f64> {
    let n = n_sat * STATE_DIM;
    let qk = process_noise(spec, dt);
    let mut q = DMatrix::zeros(n, n);
    for k in 0..n_sat {
        q.view_mut((k * STATE_DIM, k * STATE_DIM), (STATE_DIM, STATE_DIM)).copy_from(&qk);
    }
    q
}

// ---------------------------------------------------------------------------
// Updates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMeasurement {
    pub h: SparseRow,
    /// [m²]
    pub variance: f64,
    /// Measurement value (enters y only).
    pub z: f64,
}

/// J⁺ = J + Σ hᵀh/σ², y⁺ = y + Σ hᵀz/σ², summed in the given order.
pub fn if_update_independent(s: &InformationState, links: &[ScalarMeasurement]) -> Result<InformationState> {
    let mut out = s.clone();
    for m in links {
        if !(m.variance > 0.0) {
            return Err(Error::InvalidArgument(format!("variance {} must be > 0", m.variance)));
        }
        if m.h.len != s.dim() {
            return Err(Error::Dimension(format!("row length {} vs state {}", m.h.len, s.dim())));
        }
        let w = 1.0 / m.variance;
        for &(a, ha) in &m.h.entries {
            for &(b, hb) in &m.h.entries {
                out.j[(a, b)] += w * ha * hb;
            }
            out.y[a] += w * ha * m.z;
        }
    }
    Ok(out)
}

/// One low-rank shared noise source σ²·A·Aᵀ.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedTerm {
    /// [m²]
    pub variance: f64,
    /// L × N_v association; each row e_j − e_i.
    pub association: DMatrix<f64>,
}

/// C_n = diag(local) + Σ σ²_k A_k A_kᵀ.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance {
    pub local_diag: DVector<f64>,
    pub shared_terms: Vec<SharedTerm>,
}

impl NoiseCovariance {
    pub fn independent(local_diag: DVector<f64>) -> Self {
        Self {
            local_diag,
            shared_terms: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.local_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local_diag.is_empty()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let mut c = DMatrix::from_diagonal(&self.local_diag);
        for t in &self.shared_terms {
            c += &t.association * t.association.transpose() * t.variance;
        }
        c
    }

    /// Positive local variances, nonnegative shared variances, matching sizes.
    pub fn validate(&self) -> Result<()> {
        if self.local_diag.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidArgument("local variances must be > 0".into()));
        }
        for t in &self.shared_terms {
            if !(t.variance >= 0.0) {
                return Err(Error::InvalidArgument("shared variance must be >= 0".into()));
            }
            if t.association.nrows() != self.len() {
                return Err(Error::Dimension("association rows != number of links".into()));
            }
        }
        Ok(())
    }

    /// True when every association row is a node difference e_j − e_i.
    pub fn is_differential(&self) -> bool {
        self.shared_terms.iter().all(|t| {
            t.association.row_iter().all(|row| {
                let plus = row.iter().filter(|x| **x == 1.0).count();
                let minus = row.iter().filter(|x| **x == -1.0).count();
                let zero = row.iter().filter(|x| **x == 0.0).count();
                plus == 1 && minus == 1 && zero + 2 == row.len()
            })
        })
    }
}

/// Association matrix of a link list: row ℓ = e_rx − e_tx over `n_nodes`.
pub fn association_matrix(links: &[(usize, usize)], n_nodes: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(links.len(), n_nodes);
    for (l, &(tx, rx)) in links.iter().enumerate() {
        a[(l, tx)] = -1.0;
        a[(l, rx)] = 1.0;
    }
    a
}

/// C_n⁻¹ by sequential Woodbury updates over the shared terms.
pub fn woodbury_inverse(c: &NoiseCovariance) -> Result<DMatrix<f64>> {
    c.validate()?;
    let mut inv = DMatrix::from_diagonal(&c.local_diag.map(|d| 1.0 / d));
    for t in &c.shared_terms {
        if t.variance == 0.0 {
            continue;
        }
        let k = t.association.ncols();
        let ia = &inv * &t.association;
        let inner = DMatrix::identity(k, k) / t.variance + t.association.transpose() * &ia;
        let ch = inner
            .cholesky()
            .ok_or_else(|| Error::Singular("Woodbury capacitance matrix".into()))?;
        let corr = &ia * ch.solve(&ia.transpose());
        inv = symmetrize(&(inv - corr));
    }
    Ok(inv)
}

/// J⁺ = J + HᵀC_n⁻¹H, y⁺ = y + HᵀC_n⁻¹z.
pub fn if_update_correlated(
    s: &InformationState,
    h: &DMatrix<f64>,
    c: &NoiseCovariance,
    z: &DVector<f64>,
) -> Result<InformationState> {
    if h.ncols() != s.dim() || h.nrows() != c.len() || z.len() != c.len() {
        return Err(Error::Dimension(format!(
            "H {:?}, C {}, z {}, state {}",
            h.shape(),
            c.len(),
            z.len(),
            s.dim()
        )));
    }
    let ci = woodbury_inverse(c)?;
    let hc = h.transpose() * &ci;
    Ok(InformationState {
        j: symmetrize(&(&s.j + &hc * h)),
        y: &s.y + &hc * z,
        epoch: s.epoch,
        partition: s.partition.clone(),
    })
}

/// High-SNR information contribution hᵀh / (c²[κ_WF Γ_eff e^{σ²_φ} + σ²_φ/(2πf_c)²]).
pub fn saturated_link_fim(h: &DVector<f64>, sig: &SignalSpec, hw: &HardwareProfile) -> Result<DMatrix<f64>> {
    if hw.gamma_eff == 0.0 && hw.sigma_phi_sq == 0.0 {
        return Err(Error::UnboundedInformation);
    }
    let var = saturated_variance(sig, hw);
    Ok(h * h.transpose() / var)
}

/// Saturated range variance c²κ_WF Γ_eff e^{σ²_φ} + c²σ²_φ/(2πf_c)² [m²].
pub fn saturated_variance(sig: &SignalSpec, hw: &HardwareProfile) -> f64 {
    SPEED_OF_LIGHT * SPEED_OF_LIGHT * sig.kappa_wf() * hw.gamma_eff * hw.sigma_phi_sq.exp()
        + phase_noise_variance(sig, hw.sigma_phi_sq)
}

// ---------------------------------------------------------------------------
// Marginalization
// ---------------------------------------------------------------------------

/// J_kk − J_km J_mm⁺ J_mk over the index sets `keep` and `marg`.
pub fn schur_complement(j: &DMatrix<f64>, keep: &[usize], marg: &[usize]) -> DMatrix<f64> {
    let jaa = j.select_rows(keep).select_columns(keep);
    if marg.is_empty() {
        return jaa;
    }
    let jab = j.select_rows(keep).select_columns(marg);
    let jbb = j.select_rows(marg).select_columns(marg);
    symmetrize(&(jaa - &jab * pinv_sym(&jbb, RANK_RTOL) * jab.transpose()))
}

/// Equivalent FIM of the kinematic slots with clock slots marginalized.
pub fn efim_marginalize(s: &InformationState) -> Result<DMatrix<f64>> {
    let keep: Vec<usize> = (0..s.dim()).filter(|&i| s.partition[i] == SlotKind::Kinematic).collect();
    let marg: Vec<usize> = (0..s.dim()).filter(|&i| s.partition[i] == SlotKind::Clock).collect();
    if keep.is_empty() {
        return Err(Error::InvalidArgument("no kinematic slots".into()));
    }
    Ok(schur_complement(&s.j, &keep, &marg))
}

/// Weighted graph Laplacian of the link set: clock information structure.
pub fn clock_fim_structure(g: &ConstellationGraph, per_link_clock_info: f64) -> DMatrix<f64> {
    let n = g.len();
    let mut l = DMatrix::zeros(n, n);
    for link in &g.links {
        let (i, j) = (link.tx, link.rx);
        l[(i, i)] += per_link_clock_info;
        l[(j, j)] += per_link_clock_info;
        l[(i, j)] -= per_link_clock_info;
        l[(j, i)] -= per_link_clock_info;
    }
    l
}

// ---------------------------------------------------------------------------
// DOP
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct DopReport {
    pub gdop: f64,
    pub hdop: f64,
    pub vdop: f64,
    /// Smallest eigenvalue of the position EFIM.
    pub min_efim_eigenvalue: f64,
    /// [m²] at unit measurement variance
    pub position_crlb_trace: f64,
    /// Unobservable position direction when the EFIM is singular.
    pub deficient_direction: Option<DVector<f64>>,
}

impl DopReport {
    pub fn vdop_hdop_ratio(&self) -> f64 {
        self.vdop / self.hdop
    }

    pub fn is_singular(&self) -> bool {
        self.deficient_direction.is_some()
    }
}

/// DOP from a kinematic EFIM with 3 (position) or 6 (position, velocity)
/// slots per node. Velocity slots are marginalized; per-node CRLB blocks are
/// split into radial (vertical) and transverse (horizontal) parts and the
/// variances averaged over nodes.
pub fn dop_metrics(efim: &DMatrix<f64>, positions: &[Vector3<f64>]) -> Result<DopReport> {
    let k = positions.len();
    if k == 0 || efim.nrows() != efim.ncols() || efim.nrows() % k != 0 {
        return Err(Error::Dimension(format!("EFIM {:?} for {k} nodes", efim.shape())));
    }
    let per = efim.nrows() / k;
    if per != 3 && per != 6 {
        return Err(Error::Dimension(format!("{per} slots per node (expected 3 or 6)")));
    }
    let pos_idx: Vec<usize> = (0..k).flat_map(|n| (0..3).map(move |a| n * per + a)).collect();
    let other: Vec<usize> = (0..efim.nrows()).filter(|i| !pos_idx.contains(i)).collect();
    let p = schur_complement(efim, &pos_idx, &other);
    let eig = nalgebra::SymmetricEigen::new(p.clone());
    let (imin, lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (i, &v)| if v < a.1 { (i, v) } else { a });
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if rank_sym(&p, RANK_RTOL) < 3 * k || lmax == 0.0 {
        return Ok(DopReport {
            gdop: f64::INFINITY,
            hdop: f64::INFINITY,
            vdop: f64::INFINITY,
            min_efim_eigenvalue: lmin,
            position_crlb_trace: f64::INFINITY,
            deficient_direction: Some(eig.eigenvectors.column(imin).into_owned()),
        });
    }
    let crlb = inv_spd(&p).ok_or_else(|| Error::Singular("position EFIM".into()))?;
    let mut vert = 0.0;
    let mut horiz = 0.0;
    for (n, pos) in positions.iter().enumerate() {
        let b = crlb.view((3 * n, 3 * n), (3, 3)).into_owned();
        let r = pos.normalize();
        let rv = DVector::from_column_slice(r.as_slice());
        let v = (rv.transpose() * &b * &rv)[(0, 0)];
        vert += v;
        horiz += b.trace() - v;
    }
    let kf = k as f64;
    Ok(DopReport {
        gdop: ((vert + horiz) / kf).sqrt(),
        hdop: (horiz / kf).sqrt(),
        vdop: (vert / kf).sqrt(),
        min_efim_eigenvalue: lmin,
        position_crlb_trace: crlb.trace(),
        deficient_direction: None,
    })
}

// ---------------------------------------------------------------------------
// Mismodeling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichResult {
    /// Covariance of the W-weighted estimator under the true noise.
    pub cov_true: DMatrix<f64>,
    /// Correctly modeled GLS covariance (HᵀC⁻¹H)⁺.
    pub cov_gls: DMatrix<f64>,
    /// tr(cov_true) / tr(cov_gls)
    pub penalty: f64,
}

/// (HᵀC⁻¹H)⁺ with C⁻¹ from the Woodbury inverse.
pub fn gls_covariance(h: &DMatrix<f64>, c: &NoiseCovariance) -> Result<DMatrix<f64>> {
    let ci = woodbury_inverse(c)?;
    Ok(pinv_sym(&symmetrize(&(h.transpose() * ci * h)), RANK_RTOL))
}

/// Sandwich covariance (HᵀWH)⁺HᵀWCWH(HᵀWH)⁺ of the estimator weighted by
/// `w_assumed` (diagonal) when the true noise is `c_true`.
pub fn mismodel_sandwich(
    h: &DMatrix<f64>,
    c_true: &NoiseCovariance,
    w_assumed: &DVector<f64>,
) -> Result<SandwichResult> {
    if h.nrows() != c_true.len() || w_assumed.len() != c_true.len() {
        return Err(Error::Dimension("H, C and W sizes differ".into()));
    }
    let wh = DMatrix::from_diagonal(w_assumed) * h;
    let bread = pinv_sym(&symmetrize(&(h.transpose() * &wh)), RANK_RTOL);
    let meat = wh.transpose() * c_true.dense() * &wh;
    let cov_true = symmetrize(&(&bread * meat * &bread));
    let cov_gls = gls_covariance(h, c_true)?;
    let penalty = cov_true.trace() / cov_gls.trace();
    Ok(SandwichResult {
        cov_true,
        cov_gls,
        penalty,
    })
}
