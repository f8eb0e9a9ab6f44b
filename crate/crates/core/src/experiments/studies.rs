//! Study drivers. Each returns a tidy [`ResultTable`] that is a pure function
//! of the scenario config (seed included).

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::RngCore;
use rayon::prelude::*;

use super::config::ScenarioConfig;
use super::output::{Cell, Provenance, ResultTable, TOOL_VERSION};
use crate::error::{Error, Result};
use crate::fusion::{
    association_matrix, dop_metrics, efim_marginalize, gls_covariance, if_update_independent, mismodel_sandwich,
    DopReport, InformationState, NoiseCovariance, ScalarMeasurement, SharedTerm, SlotKind,
};
use crate::impairments::{
    db_to_lin, lin_to_db, meas_variance, ranging_limits, regime_classify, HardwareProfile, LinkCondition, SignalSpec,
};
use crate::interference::substream;
use crate::ioo::{
    bistatic_sinr, bistatic_sinr_pre, calibrate_effective_noise, crossover_holds, fuse_ioo, ioo_fim,
    pg_for_axis_reduction, pg_threshold, BistaticGeometry, EchoBudget,
};
use crate::linalg::{log10_pdet_sym, RANK_RTOL};
use crate::network::{generate_geometry, measurement_jacobian, ConstellationGraph, GeometryKind, GeometrySpec, SparseRow};
use crate::orbit::EARTH;

const LINK_DISTANCE: f64 = 1.0e6;

pub fn provenance(cfg: &ScenarioConfig) -> Provenance {
    Provenance {
        config_sha256: cfg.hash(),
        seed: cfg.monte_carlo.seed,
        tool_version: TOOL_VERSION.to_string(),
    }
}

fn rmse(sig: &SignalSpec, hw: &HardwareProfile, snr0: f64, interference_sum: f64) -> Result<f64> {
    let cond = LinkCondition {
        distance: LINK_DISTANCE,
        snr0,
        interference_sum,
    };
    Ok(meas_variance(sig, hw, &cond)?.sqrt())
}

// ---------------------------------------------------------------------------
// Hardware ceiling
// ---------------------------------------------------------------------------

/// SNR₀ [dB] at the maximum second difference of log10(RMSE).
pub fn max_curvature_knee(snr_db: &[f64], rmse: &[f64]) -> Option<f64> {
    if snr_db.len() < 3 || snr_db.len() != rmse.len() {
        return None;
    }
    let l: Vec<f64> = rmse.iter().map(|r| r.log10()).collect();
    (1..l.len() - 1)
        .map(|k| (k, l[k + 1] - 2.0 * l[k] + l[k - 1]))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| snr_db[k])
}

pub fn run_hw_ceiling_study(cfg: &ScenarioConfig) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        "ceiling",
        &[
            ("profile", "-"),
            ("snr0", "dB"),
            ("rmse", "m"),
            ("ceiling", "m"),
            ("floor", "m"),
            ("snr_crit", "dB"),
            ("regime", "-"),
        ],
        provenance(cfg),
    );
    for hw in &cfg.profiles {
        let lim = ranging_limits(&cfg.signal, hw);
        for s in cfg.studies.ceiling.snr_db.points() {
            let snr0 = db_to_lin(s);
            t.push(vec![
                hw.name.as_str().into(),
                s.into(),
                rmse(&cfg.signal, hw, snr0, 0.0)?.into(),
                lim.ceiling.into(),
                lim.floor.into(),
                lin_to_db(lim.snr_crit).into(),
                regime_classify(snr0, hw, 0.0).as_str().into(),
            ]);
        }
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Phase-noise floor
// ---------------------------------------------------------------------------

pub fn run_pn_floor_study(cfg: &ScenarioConfig) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        "floor",
        &[
            ("f_c", "Hz"),
            ("sigma_phi_sq", "rad^2"),
            ("snr0", "dB"),
            ("rmse", "m"),
            ("floor", "m"),
        ],
        provenance(cfg),
    );
    let fc = &cfg.studies.floor;
    for &f_c in &fc.carriers {
        let sig = SignalSpec { f_c, ..cfg.signal };
        for &sp in &fc.sigma_phi_sq {
            let hw = HardwareProfile::new("floor", 0.0, sp, cfg.hardware.resolve()?.noise_figure);
            let floor = ranging_limits(&sig, &hw).floor;
            for s in fc.snr_db.points() {
                t.push(vec![
                    f_c.into(),
                    sp.into(),
                    s.into(),
                    rmse(&sig, &hw, db_to_lin(s), 0.0)?.into(),
                    floor.into(),
                ]);
            }
        }
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// DOP of a reference point observing every satellite within `link_range`
/// with unit-variance, clock-synchronized range.
pub fn reference_point_dop(positions: &[Vector3<f64>], reference: &Vector3<f64>, link_range: f64) -> Result<DopReport> {
    let rows: Vec<ScalarMeasurement> = positions
        .iter()
        .filter_map(|p| {
            let d = p - reference;
            let r = d.norm();
            (r > 0.0 && r <= link_range).then(|| ScalarMeasurement {
                h: SparseRow::from_dense(&DVector::from_column_slice((d / r).as_slice())),
                variance: 1.0,
                z: 0.0,
            })
        })
        .collect();
    let s = InformationState::new(DMatrix::zeros(3, 3), DVector::zeros(3), vec![SlotKind::Kinematic; 3])?;
    let s = if_update_independent(&s, &rows)?;
    dop_metrics(&efim_marginalize(&s)?, &[*reference])
}

fn formation_spec(cfg: &ScenarioConfig, kind: GeometryKind, count: usize, seed: u64) -> GeometrySpec {
    GeometrySpec {
        altitude: cfg.geometry.altitude,
        perturbation_sigma: cfg.geometry.perturbation_sigma,
        seed,
        ..GeometrySpec::new(kind, count)
    }
}

/// Seed of random realization `r` for formation size `n`.
fn realization_seed(seed: u64, n: usize, r: usize) -> u64 {
    substream(seed, ((n as u64) << 32) | r as u64).next_u64()
}

pub fn run_geometry_study(cfg: &ScenarioConfig) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        "geometry",
        &[
            ("kind", "-"),
            ("n_sat", "-"),
            ("gdop", "-"),
            ("hdop", "-"),
            ("vdop", "-"),
            ("vdop_hdop", "-"),
            ("min_efim_eigenvalue", "m^-2"),
            ("gdop_std", "-"),
            ("realizations", "-"),
            ("singular", "-"),
        ],
        provenance(cfg),
    );
    let gc = &cfg.studies.geometry;
    let seed = cfg.monte_carlo.seed;
    for &kind in &gc.kinds {
        for &n in &gc.counts {
            let realizations = if kind == GeometryKind::Random { cfg.monte_carlo.realizations } else { 1 };
            let reports: Vec<Result<DopReport>> = (0..realizations)
                .into_par_iter()
                .map(|r| {
                    let spec = formation_spec(cfg, kind, n, realization_seed(seed, n, r));
                    let g = generate_geometry(&spec)?;
                    reference_point_dop(&g.positions(), &spec.center(), gc.link_range)
                })
                .collect();
            let mut ok = Vec::with_capacity(reports.len());
            for r in reports {
                ok.push(r?);
            }
            let good: Vec<&DopReport> = ok.iter().filter(|d| !d.is_singular()).collect();
            let singular = ok.len() - good.len();
            let m = good.len() as f64;
            let mean = |f: &dyn Fn(&DopReport) -> f64| {
                if good.is_empty() {
                    f64::INFINITY
                } else {
                    good.iter().map(|d| f(d)).sum::<f64>() / m
                }
            };
            let gdop = mean(&|d| d.gdop);
            let gdop_std = if good.len() > 1 {
                (good.iter().map(|d| (d.gdop - gdop).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
            } else {
                0.0
            };
            let kind_name = match kind {
                GeometryKind::Planar => "planar",
                GeometryKind::Cubic => "cubic",
                GeometryKind::Random => "random",
            };
            t.push(vec![
                kind_name.into(),
                n.into(),
                gdop.into(),
                mean(&|d| d.hdop).into(),
                mean(&|d| d.vdop).into(),
                mean(&|d| d.vdop_hdop_ratio()).into(),
                mean(&|d| d.min_efim_eigenvalue).into(),
                gdop_std.into(),
                ok.len().into(),
                singular.into(),
            ]);
        }
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Regime map
// ---------------------------------------------------------------------------

/// Γ_eff on the fixed-RMSE contour at `snr0` (interference-free), by
/// bisection on log10 Γ; None when the contour does not cross this SNR.
pub fn contour_gamma(sig: &SignalSpec, sigma_phi_sq: f64, target_rmse: f64, snr0: f64) -> Result<Option<f64>> {
    let f = |lg: f64| -> Result<f64> {
        let hw = HardwareProfile::new("contour", 10f64.powf(lg), sigma_phi_sq, 0.0);
        Ok(rmse(sig, &hw, snr0, 0.0)? - target_rmse)
    };
    let (mut lo, mut hi) = (-12.0, 2.0);
    if f(lo)? > 0.0 || f(hi)? < 0.0 {
        return Ok(None);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(10f64.powf(0.5 * (lo + hi))))
}

/// Local exchange rate d log10 Γ / d SNR_dB along the contour.
pub fn contour_exchange_rate(
    sig: &SignalSpec,
    sigma_phi_sq: f64,
    target_rmse: f64,
    snr_db: f64,
    half_step_db: f64,
) -> Result<Option<f64>> {
    let a = contour_gamma(sig, sigma_phi_sq, target_rmse, db_to_lin(snr_db - half_step_db))?;
    let b = contour_gamma(sig, sigma_phi_sq, target_rmse, db_to_lin(snr_db + half_step_db))?;
    Ok(match (a, b) {
        (Some(a), Some(b)) => Some((b.log10() - a.log10()) / (2.0 * half_step_db)),
        _ => None,
    })
}

/// SNR₀ [dB] on the contour where the hardware and noise terms are equal
/// (SNR₀·Γ = 1), by bisection.
pub fn contour_knee_snr_db(sig: &SignalSpec, sigma_phi_sq: f64, target_rmse: f64) -> Result<Option<f64>> {
    let g = |s: f64| -> Result<Option<f64>> {
        Ok(contour_gamma(sig, sigma_phi_sq, target_rmse, db_to_lin(s))?.map(|gm| db_to_lin(s) * gm - 1.0))
    };
    let (mut lo, mut hi) = (-20.0, 120.0);
    // Bracket: find the lowest SNR where the contour exists.
    let mut found = None;
    let mut s = lo;
    while s <= hi {
        if let Some(v) = g(s)? {
            found = Some((s, v));
            break;
        }
        s += 0.5;
    }
    let Some((s0, v0)) = found else { return Ok(None) };
    if v0 > 0.0 {
        return Ok(None);
    }
    lo = s0;
    match g(hi)? {
        Some(v) if v > 0.0 => {}
        _ => return Ok(None),
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match g(mid)? {
            Some(v) if v > 0.0 => hi = mid,
            _ => lo = mid,
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

pub fn run_regime_map(cfg: &ScenarioConfig) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        "regime",
        &[
            ("alpha_sum", "-"),
            ("snr0", "dB"),
            ("log10_gamma_eff", "-"),
            ("interference_sum", "-"),
            ("regime", "-"),
            ("rmse", "m"),
        ],
        provenance(cfg),
    );
    let rc = &cfg.studies.regime;
    let base = cfg.hardware.resolve()?;
    for &alpha in &rc.alpha_sum_layers {
        for s in rc.snr_db.points() {
            let snr0 = db_to_lin(s);
            let isum = snr0 * alpha;
            for lg in rc.log10_gamma.points() {
                let hw = HardwareProfile {
                    gamma_eff: 10f64.powf(lg),
                    ..base.clone()
                };
                t.push(vec![
                    alpha.into(),
                    s.into(),
                    lg.into(),
                    isum.into(),
                    regime_classify(snr0, &hw, isum).as_str().into(),
                    rmse(&cfg.signal, &hw, snr0, isum)?.into(),
                ]);
            }
        }
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Clock correlation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationPoint {
    /// tr(sandwich)/tr(GLS) of the independence-assuming estimator
    pub penalty: f64,
    /// tr(GLS(ρ))/tr(GLS(0)) at equal per-link variance
    pub degradation: f64,
    /// Per-DoF information of the correlated model [dB]
    pub info_per_dof_correlated_db: f64,
    /// Same local noise, shared term removed [dB]
    pub info_per_dof_independent_db: f64,
    pub info_per_dof_reduction_db: f64,
    /// Position-block trace variant [dB]
    pub kinematic_reduction_db: f64,
}

/// Full-mesh cubic formation used by the correlation study.
pub fn correlation_formation(cfg: &ScenarioConfig, n: usize) -> Result<ConstellationGraph> {
    let spec = GeometrySpec {
        kind: GeometryKind::Cubic,
        count: n,
        ..cfg.geometry
    };
    Ok(generate_geometry(&spec)?.with_full_mesh())
}

/// Per-link noise split at unit total variance: σ²_loc = (1−ρ)/(1+ρ) local,
/// σ²_clk = ρ/(1+ρ) per node clock, shared through the link association.
pub fn clock_correlated_noise(links: &[(usize, usize)], n: usize, rho: f64) -> NoiseCovariance {
    let local = (1.0 - rho) / (1.0 + rho);
    let clk = rho / (1.0 + rho);
    NoiseCovariance {
        local_diag: DVector::from_element(links.len(), local),
        shared_terms: vec![SharedTerm {
            variance: clk,
            association: association_matrix(links, n),
        }],
    }
}

pub fn correlation_point(g: &ConstellationGraph, rho: f64) -> Result<CorrelationPoint> {
    let n = g.len();
    let links: Vec<(usize, usize)> = g.links.iter().map(|l| (l.tx, l.rx)).collect();
    let full = DMatrix::from_rows(
        &g.links
            .iter()
            .map(|l| Ok(measurement_jacobian(g, l)?.to_dense().transpose()))
            .collect::<Result<Vec<_>>>()?,
    );
    let sd = g.state_dim() / n;
    let pos_cols: Vec<usize> = (1..n).flat_map(|k| (0..3).map(move |a| k * sd + a)).collect();
    let toa_cols: Vec<usize> = (0..n).flat_map(|k| [0, 1, 2, 6].map(|a| k * sd + a)).collect();
    let hp = full.select_columns(&pos_cols);
    let ht = full.select_columns(&toa_cols);

    let c = clock_correlated_noise(&links, n, rho);
    let w = c.dense().diagonal().map(|d| 1.0 / d);
    let sw = mismodel_sandwich(&hp, &c, &w)?;
    let c0 = NoiseCovariance::independent(DVector::from_element(links.len(), 1.0));
    let degradation = sw.cov_gls.trace() / gls_covariance(&hp, &c0)?.trace();

    let ci = crate::fusion::woodbury_inverse(&c)?;
    let local = NoiseCovariance::independent(c.local_diag.clone());
    let li = crate::fusion::woodbury_inverse(&local)?;
    let jc = ht.transpose() * &ci * &ht;
    let ji = ht.transpose() * &li * &ht;
    let (sc, rc) = log10_pdet_sym(&jc, RANK_RTOL);
    let (si, ri) = log10_pdet_sym(&ji, RANK_RTOL);
    if rc == 0 || ri == 0 {
        return Err(Error::Singular("TOA network FIM".into()));
    }
    let corr_db = 10.0 * sc / rc as f64;
    let ind_db = 10.0 * si / ri as f64;
    let jpc = hp.transpose() * &ci * &hp;
    let jpi = hp.transpose() * &li * &hp;
    Ok(CorrelationPoint {
        penalty: sw.penalty,
        degradation,
        info_per_dof_correlated_db: corr_db,
        info_per_dof_independent_db: ind_db,
        info_per_dof_reduction_db: ind_db - corr_db,
        kinematic_reduction_db: lin_to_db(jpi.trace() / jpc.trace()),
    })
}

pub fn run_correlation_study(cfg: &ScenarioConfig) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        "correlation",
        &[
            ("n_sat", "-"),
            ("rho", "-"),
            ("mismodel_penalty", "-"),
            ("crlb_degradation", "-"),
            ("info_per_dof_correlated", "dB"),
            ("info_per_dof_independent", "dB"),
            ("info_per_dof_reduction", "dB"),
            ("kinematic_info_reduction", "dB"),
        ],
        provenance(cfg),
    );
    for &n in &cfg.studies.correlation.counts {
        let g = correlation_formation(cfg, n)?;
        for &rho in &cfg.noise.rho_grid {
            let p = correlation_point(&g, rho)?;
            t.push(vec![
                n.into(),
                rho.into(),
                p.penalty.into(),
                p.degradation.into(),
                p.info_per_dof_correlated_db.into(),
                p.info_per_dof_independent_db.into(),
                p.info_per_dof_reduction_db.into(),
                p.kinematic_reduction_db.into(),
            ]);
        }
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Opportunistic sensing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct IooScenario {
    pub geometry: BistaticGeometry,
    pub prior: Matrix3<f64>,
    /// Budget at the operating processing gain, N_eff resolved.
    pub budget: EchoBudget,
    pub signal: SignalSpec,
    pub hardware: HardwareProfile,
}

/// Target on the local vertical at `target_altitude`; illuminator and
/// receiver symmetric about that vertical at `node_altitude`, subtending the
/// configured bistatic angle. The range gradient then lies along the prior's
/// weak (vertical) axis.
pub fn ioo_scenario(cfg: &ScenarioConfig) -> Result<IooScenario> {
    let io = &cfg.studies.ioo;
    let half = (io.bistatic_angle_deg / 2.0).to_radians();
    let target = Vector3::new(0.0, 0.0, EARTH.re + io.target_altitude);
    let range = (io.node_altitude - io.target_altitude) / half.cos();
    let off = |s: f64| target + Vector3::new(s * range * half.sin(), 0.0, range * half.cos());
    let geometry = BistaticGeometry {
        tx_pos: off(-1.0),
        rx_pos: off(1.0),
        target_pos: target,
    };
    let prior = Matrix3::from_diagonal(&Vector3::from(io.prior_sigma.map(|s| 1.0 / (s * s))));
    let signal = cfg.signal;
    let hardware = cfg.hardware.resolve()?;
    let mut budget = EchoBudget {
        tx_power: io.tx_power,
        tx_gain: db_to_lin(io.tx_gain),
        rx_gain: db_to_lin(io.rx_gain),
        rcs_sigma_b: io.rcs_sigma_b,
        wavelength: signal.wavelength(),
        processing_loss: db_to_lin(io.processing_loss),
        effective_noise: 1.0,
        processing_gain: io.threshold_pg_db,
    };
    budget.effective_noise = match io.effective_noise {
        Some(n) => n,
        None => calibrate_effective_noise(
            &budget,
            &geometry,
            &prior,
            &signal,
            &hardware,
            io.threshold_pg_db,
            io.threshold_gain_db,
        )?,
    };
    budget.processing_gain = pg_for_axis_reduction(&budget, &geometry, &prior, &signal, &hardware, io.axis_reduction)?;
    Ok(IooScenario {
        geometry,
        prior,
        budget,
        signal,
        hardware,
    })
}

pub fn run_ioo_study(cfg: &ScenarioConfig) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        "ioo",
        &[
            ("point", "-"),
            ("processing_gain", "dB"),
            ("echo_sinr_pre", "dB"),
            ("echo_sinr", "dB"),
            ("sigma_rb", "m"),
            ("prior_axis_major", "m"),
            ("prior_axis_mid", "m"),
            ("prior_axis_minor", "m"),
            ("post_axis_major", "m"),
            ("post_axis_mid", "m"),
            ("post_axis_minor", "m"),
            ("major_axis_reduction", "-"),
            ("info_gain_det", "dB"),
            ("info_gain_trace", "dB"),
            ("info_gain_weak_axis", "dB"),
            ("volume_ratio", "-"),
            ("crossover", "-"),
        ],
        provenance(cfg),
    );
    let io = &cfg.studies.ioo;
    let sc = ioo_scenario(cfg)?;
    let th6 = pg_threshold(&sc.budget, &sc.geometry, &sc.prior, &sc.signal, &sc.hardware, 2.0 * io.threshold_gain_db)?;
    let th3 = pg_threshold(&sc.budget, &sc.geometry, &sc.prior, &sc.signal, &sc.hardware, io.threshold_gain_db)?;
    let mut points: Vec<(String, f64)> = vec![
        ("operating".into(), sc.budget.processing_gain),
        (format!("threshold_{}db", io.threshold_gain_db), th3),
        (format!("threshold_{}db", 2.0 * io.threshold_gain_db), th6),
    ];
    points.extend(io.pg_db.points().into_iter().map(|pg| ("sweep".to_string(), pg)));
    for (label, pg) in points {
        let e = EchoBudget {
            processing_gain: pg,
            ..sc.budget
        };
        let f = fuse_ioo(&sc.prior, &sc.geometry, &sc.signal, &sc.hardware, &e)?;
        let j = ioo_fim(&sc.geometry, &sc.signal, &sc.hardware, &e)?;
        let cross = crossover_holds(&j, &sc.prior, io.alpha_lm, db_to_lin(io.comm_sinr_db));
        t.push(vec![
            label.into(),
            pg.into(),
            lin_to_db(bistatic_sinr_pre(&sc.geometry, &e)).into(),
            lin_to_db(bistatic_sinr(&sc.geometry, &e)).into(),
            f.range_variance.sqrt().into(),
            f.prior_axes[0].into(),
            f.prior_axes[1].into(),
            f.prior_axes[2].into(),
            f.posterior_axes[0].into(),
            f.posterior_axes[1].into(),
            f.posterior_axes[2].into(),
            (1.0 - f.posterior_axes[0] / f.prior_axes[0]).into(),
            f.info_gain_db.into(),
            f.trace_gain_db.into(),
            f.weak_axis_gain_db.into(),
            f.volume_ratio.into(),
            Cell::from(cross),
        ]);
    }
    Ok(t)
}

// ---------------------------------------------------------------------------

pub const STUDY_IDS: [&str; 6] = ["ceiling", "floor", "geometry", "regime", "correlation", "ioo"];

pub fn run_study(id: &str, cfg: &ScenarioConfig) -> Result<ResultTable> {
    match id {
        "ceiling" => run_hw_ceiling_study(cfg),
        "floor" => run_pn_floor_study(cfg),
        "geometry" => run_geometry_study(cfg),
        "regime" => run_regime_map(cfg),
        "correlation" => run_correlation_study(cfg),
        "ioo" => run_ioo_study(cfg),
        other => Err(Error::InvalidArgument(format!("unknown study '{other}'"))),
    }
}

/// All studies, run concurrently, returned in [`STUDY_IDS`] order.
pub fn run_all(cfg: &ScenarioConfig) -> Result<Vec<ResultTable>> {
    STUDY_IDS.par_iter().map(|id| run_study(id, cfg)).collect()
}
