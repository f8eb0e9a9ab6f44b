//! Property-based checks of the model invariants.

mod common;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use proptest::prelude::*;

use common::*;
use ncrlb::fusion::{
    efim_marginalize, gls_covariance, if_predict, if_update_independent, mismodel_sandwich, network_process_noise,
    network_transition, standard_partition, InformationState, NoiseCovariance, ScalarMeasurement, SharedTerm,
    SlotKind,
};
use ncrlb::impairments::{
    meas_variance, phase_noise_variance, ranging_limits, regime_classify, sinr_eff, HardwareProfile, LinkCondition,
    Regime, SignalSpec,
};
use ncrlb::interference::{
    broadened_width_sq, interference_coefficient, jitter_prefactor, BeamModel, InterferencePair, PointingJitter,
};
use ncrlb::ioo::{bistatic_gradient, bistatic_range_variance, fuse_gradient, ioo_fim, BistaticGeometry, EchoBudget};
use ncrlb::network::{active_links, measurement_jacobian, ConstellationGraph, SparseRow};
use ncrlb::orbit::{
    discrete_transition, gravity_acceleration, gravity_potential, process_noise, propagate_state, ProcessNoiseSpec,
    SatelliteState, Vector8, EARTH, STATE_DIM, TRANSITION_DT_MAX,
};
use ncrlb::SPEED_OF_LIGHT;

fn leo_state(lat: f64, lon: f64, alt: f64) -> SatelliteState {
    let r = EARTH.re + alt;
    let p = Vector3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()) * r;
    SatelliteState::circular(p, &EARTH)
}

fn graph_from(seed: u64, n: usize, spread: f64) -> ConstellationGraph {
    let mut r = rng(seed);
    let sats = (0..n)
        .map(|_| {
            let d = randn_vec(&mut r, 3) * spread;
            let p = Vector3::new(0.0, 0.0, EARTH.re + 550e3) + Vector3::new(d[0], d[1], d[2]);
            SatelliteState::circular(p, &EARTH)
        })
        .collect();
    ConstellationGraph::new(sats)
}

// ---------------------------------------------------------------------------
// orbit
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn process_noise_symmetric_psd(
        sa in 0.0..1e-6f64,
        sy in 0.0..1e-16f64,
        sd in 0.0..1e-20f64,
        dt in 1e-3..100.0f64,
    ) {
        let q = process_noise(&ProcessNoiseSpec { sigma_a_sq: sa, sigma_y_sq: sy, clock_drift_psd: sd }, dt);
        prop_assert_eq!(q, q.transpose());
        let d = DMatrix::from_column_slice(8, 8, q.as_slice());
        let scale = max_abs_eig(&d);
        prop_assert!(min_eig(&d) >= -1e-12 * scale.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn transition_tends_to_identity(lat in -1.4..1.4f64, lon in 0.0..6.28f64, dt in 1e-3..1.0f64) {
        let s = leo_state(lat, lon, 550e3);
        let e1 = (discrete_transition(&s, dt).unwrap() - nalgebra::SMatrix::<f64, 8, 8>::identity()).norm();
        let e2 = (discrete_transition(&s, dt / 2.0).unwrap() - nalgebra::SMatrix::<f64, 8, 8>::identity()).norm();
        prop_assert!(e1 > 0.0);
        prop_assert!((e2 / e1 - 0.5).abs() < 0.01, "ratio {}", e2 / e1);
    }

    #[test]
    fn j2_acceleration_is_potential_gradient(
        lat in -1.5..1.5f64,
        lon in 0.0..6.28f64,
        alt in 200e3..2000e3f64,
    ) {
        let r = EARTH.re + alt;
        let p = Vector3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()) * r;
        let a = gravity_acceleration(&p, &EARTH, true).unwrap();
        let h = 1.0;
        let mut g = Vector3::zeros();
        for k in 0..3 {
            let mut e = Vector3::zeros();
            e[k] = h;
            g[k] = -(gravity_potential(&(p + e), &EARTH, true) - gravity_potential(&(p - e), &EARTH, true)) / (2.0 * h);
        }
        prop_assert!((a - g).norm() < 1e-6 * a.norm(), "{} vs {}", a, g);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Residual of the linearized transition must shrink quadratically with
    /// the perturbation: halving δ divides it by 4 (25% margin).
    #[test]
    fn linearization_second_order_convergence(
        lat in -1.4..1.4f64,
        lon in 0.0..6.28f64,
        dt in 0.5..TRANSITION_DT_MAX,
        seed in any::<u64>(),
    ) {
        let s = leo_state(lat, lon, 550e3);
        let mut r = rng(seed);
        let raw = randn_vec(&mut r, 6);
        let mut delta = Vector8::zeros();
        for k in 0..3 {
            delta[k] = raw[k];
            delta[k + 3] = raw[k + 3] * 1e-3;
        }
        delta /= delta.norm();
        let f = discrete_transition(&s, dt).unwrap();
        let base = propagate_state(&s, dt).unwrap().to_vector();
        let resid = |d: &Vector8| {
            let p = propagate_state(&SatelliteState::from_vector(&(s.to_vector() + d), 0.0), dt).unwrap().to_vector();
            (p - base - f * d).norm()
        };
        let e1 = resid(&delta);
        let e2 = resid(&(delta * 0.5));
        prop_assert!(e2 <= 1.25 * e1 / 4.0, "e(δ) = {e1:.3e}, e(δ/2) = {e2:.3e}");
    }
}

// ---------------------------------------------------------------------------
// network
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobian_structure(seed in any::<u64>(), n in 2usize..8) {
        let g = graph_from(seed, n, 500e3).with_full_mesh();
        for l in &g.links {
            let row = measurement_jacobian(&g, l).unwrap();
            let allowed: Vec<usize> = [l.tx, l.rx]
                .iter()
                .flat_map(|&k| [0, 1, 2, 6].map(|a| k * STATE_DIM + a))
                .collect();
            prop_assert!(row.entries.iter().all(|(i, _)| allowed.contains(i)));
            let d = row.to_dense();
            let tx = d.rows(l.tx * STATE_DIM, 3).into_owned();
            let rx = d.rows(l.rx * STATE_DIM, 3).into_owned();
            prop_assert!((tx + rx).norm() < 1e-15);
            let clock_sum: f64 = (0..n).map(|k| d[k * STATE_DIM + 6]).sum();
            prop_assert_eq!(clock_sum, 0.0);
        }
    }

    #[test]
    fn active_links_deterministic_and_order_symmetric(seed in any::<u64>(), n in 2usize..8, range in 1e5..3e6f64) {
        let g = graph_from(seed, n, 1e6);
        let a = active_links(&g, range);
        prop_assert_eq!(&a, &active_links(&g, range));
        let mut rev = g.satellites.clone();
        rev.reverse();
        let gr = ConstellationGraph::new(rev);
        let mut pa: Vec<(usize, usize)> = a.iter().map(|l| (l.tx.min(l.rx), l.tx.max(l.rx))).collect();
        let mut pb: Vec<(usize, usize)> = active_links(&gr, range)
            .iter()
            .map(|l| {
                let (i, j) = (n - 1 - l.tx, n - 1 - l.rx);
                (i.min(j), i.max(j))
            })
            .collect();
        pa.sort();
        pb.sort();
        prop_assert_eq!(pa, pb);
    }
}

// ---------------------------------------------------------------------------
// impairments
// ---------------------------------------------------------------------------

fn profile(gamma: f64, sp: f64) -> HardwareProfile {
    HardwareProfile::new("prop", gamma, sp, 5.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sinr_monotone_and_bounded(
        gamma in 1e-4..0.2f64,
        sp in 0.0..0.5f64,
        s1 in -10.0..80.0f64,
        ds in 0.0..20.0f64,
        isum in 0.0..10.0f64,
    ) {
        let hw = profile(gamma, sp);
        let a = sinr_eff(10f64.powf(s1 / 10.0), &hw, isum);
        let b = sinr_eff(10f64.powf((s1 + ds) / 10.0), &hw, isum);
        prop_assert!(b >= a * (1.0 - 1e-15));
        prop_assert!(b <= (-sp).exp() / gamma * (1.0 + 1e-12));
    }

    #[test]
    fn variance_monotone_with_hardware_limit(gamma in 1e-4..0.2f64, sp in 0.0..0.5f64, s1 in -10.0..80.0f64, ds in 0.0..20.0f64) {
        let sig = SignalSpec::default();
        let hw = profile(gamma, sp);
        let v = |s: f64| meas_variance(&sig, &hw, &LinkCondition { distance: 1e6, snr0: s, interference_sum: 0.0 }).unwrap();
        prop_assert!(v(10f64.powf((s1 + ds) / 10.0)) <= v(10f64.powf(s1 / 10.0)) * (1.0 + 1e-15));
        let c2k = SPEED_OF_LIGHT * SPEED_OF_LIGHT * sig.kappa_wf();
        let limit = c2k * gamma * sp.exp() + phase_noise_variance(&sig, sp);
        prop_assert!((v(1e15) - limit).abs() <= 1e-9 * limit);
        let lim = ranging_limits(&sig, &hw);
        let asym = v(1e15).sqrt();
        prop_assert!(lim.sigma_min <= asym * (1.0 + 1e-12) && asym <= lim.sigma_min * 2f64.sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn classify_tie_is_noise(gamma in 1e-6..1.0f64) {
        let hw = profile(gamma, 0.0);
        prop_assert_eq!(regime_classify(1.0 / gamma, &hw, 0.0), Regime::Noise);
        prop_assert_eq!(regime_classify(1.01 / gamma, &hw, 0.0), Regime::Hardware);
    }
}

// ---------------------------------------------------------------------------
// interference
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn coefficient_monotone(
        theta_b in 1e-5..1e-3f64,
        se_ratio in 0.0..2.0f64,
        t1 in 0.0..5.0f64,
        dt in 1e-3..2.0f64,
        d1 in 1e5..5e6f64,
        dd in 1e3..1e6f64,
    ) {
        let beam = BeamModel::from_hpbw(1e-3, theta_b);
        let j = PointingJitter { sigma_e: se_ratio * theta_b };
        let pair = |t: f64, d: f64| InterferencePair { victim_distance: 1e6, cross_distance: d, theta_lm: t * theta_b };
        let a = interference_coefficient(&pair(t1, d1), &beam, &j);
        prop_assert!(interference_coefficient(&pair(t1 + dt, d1), &beam, &j) < a);
        prop_assert!(interference_coefficient(&pair(t1, d1 + dd), &beam, &j) < a);
        let pf = jitter_prefactor(theta_b, j.sigma_e);
        prop_assert!(pf > 0.0 && pf <= 1.0);
    }

    #[test]
    fn broadening_law_recovered_from_log_slope(theta_b in 1e-5..1e-3f64, se_ratio in 0.0..2.0f64) {
        let beam = BeamModel::from_hpbw(1e-3, theta_b);
        let j = PointingJitter { sigma_e: se_ratio * theta_b };
        let la = |t: f64| {
            interference_coefficient(
                &InterferencePair { victim_distance: 1e6, cross_distance: 2e6, theta_lm: t },
                &beam,
                &j,
            )
            .ln()
        };
        let (t1, t2) = (0.5 * theta_b, 1.5 * theta_b);
        let slope = (la(t2) - la(t1)) / (t2 * t2 - t1 * t1);
        let recovered = -1.0 / slope;
        let expect = theta_b * theta_b / 2.0 + 2.0 * j.sigma_e * j.sigma_e;
        prop_assert!((recovered - expect).abs() <= 1e-9 * expect);
        prop_assert!((broadened_width_sq(theta_b, j.sigma_e) - expect).abs() <= 1e-15 * expect);
    }
}

// ---------------------------------------------------------------------------
// fusion
// ---------------------------------------------------------------------------

fn kinematic_state(j: DMatrix<f64>, y: DVector<f64>) -> InformationState {
    let n = j.nrows();
    InformationState::new(j, y, vec![SlotKind::Kinematic; n]).unwrap()
}

fn random_rows(r: &mut rand_chacha::ChaCha8Rng, l: usize, n: usize) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let h = randn(r, l, n);
    let var = DVector::from_fn(l, |_, _| 0.5 + rand::Rng::random::<f64>(r));
    let z = randn_vec(r, l);
    (h, var, z)
}

fn as_measurements(h: &DMatrix<f64>, var: &DVector<f64>, z: &DVector<f64>) -> Vec<ScalarMeasurement> {
    (0..h.nrows())
        .map(|i| ScalarMeasurement {
            h: SparseRow::from_dense(&h.row(i).transpose()),
            variance: var[i],
            z: z[i],
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn update_never_loses_information(seed in any::<u64>(), n in 2usize..12, l in 1usize..20) {
        let mut r = rng(seed);
        let j = random_spd(&mut r, n, 0.0);
        let (h, var, z) = random_rows(&mut r, l, n);
        let s = kinematic_state(j.clone(), DVector::zeros(n));
        let up = if_update_independent(&s, &as_measurements(&h, &var, &z)).unwrap();
        let scale = max_abs_eig(&up.j);
        prop_assert!(min_eig(&(&up.j - &j)) >= -1e-9 * scale);
    }

    #[test]
    fn prediction_depreciates_information(seed in any::<u64>(), n_sat in 1usize..4, dt in 0.1..TRANSITION_DT_MAX) {
        let mut r = rng(seed);
        let sats: Vec<SatelliteState> = (0..n_sat)
            .map(|_| leo_state(rand::Rng::random_range(&mut r, -1.2..1.2), rand::Rng::random_range(&mut r, 0.0..6.2), 550e3))
            .collect();
        let n = n_sat * STATE_DIM;
        let f = network_transition(&sats, dt).unwrap();
        let q = network_process_noise(
            &ProcessNoiseSpec { sigma_a_sq: 1.0, sigma_y_sq: 1e-17, clock_drift_psd: 1e-17 },
            n_sat,
            dt,
        );
        let j = random_spd(&mut r, n, 0.1);
        let s = InformationState::new(j.clone(), DVector::zeros(n), standard_partition(n_sat)).unwrap();
        let p = if_predict(&s, &f, &q).unwrap();
        prop_assert!(p.j.trace() < j.trace(), "{} vs {}", p.j.trace(), j.trace());
    }

    #[test]
    fn information_kalman_duality(seed in any::<u64>(), n in 2usize..10, l in 1usize..12) {
        let mut r = rng(seed);
        let p0 = random_spd(&mut r, n, 0.5);
        let x0 = randn_vec(&mut r, n);
        let f = random_transition(&mut r, n);
        let q = random_spd(&mut r, n, 0.1);
        let (h, var, z) = random_rows(&mut r, l, n);
        let j0 = dense_inverse(&p0);
        let s = kinematic_state(j0.clone(), &j0 * &x0);
        let pred = if_predict(&s, &f, &q).unwrap();
        let post = if_update_independent(&pred, &as_measurements(&h, &var, &z)).unwrap();
        let kf = kalman_step(&KalmanState { x: x0, p: p0 }, &f, &q, &h, &var, &z);
        let j_kf = dense_inverse(&kf.p);
        prop_assert!(rel(&post.j, &j_kf) < 1e-8);
        prop_assert!(rel_vec(&post.y, &(&j_kf * &kf.x)) < 1e-8);
    }

    #[test]
    fn gls_is_optimal(seed in any::<u64>(), n in 2usize..6, extra in 0usize..10) {
        let mut r = rng(seed);
        let l = n + extra + 1;
        let h = randn(&mut r, l, n);
        let local = DVector::from_fn(l, |_, _| 0.2 + rand::Rng::random::<f64>(&mut r));
        let k = 1 + l / 3;
        let assoc = randn(&mut r, l, k);
        let c = NoiseCovariance { local_diag: local, shared_terms: vec![SharedTerm { variance: 0.7, association: assoc }] };
        let cd = c.dense();
        let ci = dense_inverse(&cd);
        let bread = dense_inverse(&(h.transpose() * &ci * &h));
        let sandwich = &bread * h.transpose() * &ci * &cd * &ci * &h * &bread;
        prop_assert!(rel(&gls_covariance(&h, &c).unwrap(), &sandwich) < 1e-9);
        let w = DVector::from_fn(l, |_, _| 0.1 + rand::Rng::random::<f64>(&mut r));
        prop_assert!(mismodel_sandwich(&h, &c, &w).unwrap().penalty >= 1.0 - 1e-9);
        let ind = NoiseCovariance::independent(c.local_diag.clone());
        let exact = mismodel_sandwich(&h, &ind, &ind.local_diag.map(|d| 1.0 / d)).unwrap();
        prop_assert!((exact.penalty - 1.0).abs() < 1e-9);
    }

    #[test]
    fn efim_is_symmetric_psd(seed in any::<u64>(), n_sat in 1usize..4) {
        let mut r = rng(seed);
        let n = n_sat * STATE_DIM;
        let rank = rand::Rng::random_range(&mut r, 1..=n);
        let a = randn(&mut r, n, rank);
        let j = &a * a.transpose();
        let s = InformationState::new(j, DVector::zeros(n), standard_partition(n_sat)).unwrap();
        let e = efim_marginalize(&s).unwrap();
        prop_assert!(rel(&e, &e.transpose()) < 1e-14);
        prop_assert!(min_eig(&e) >= -1e-9 * max_abs_eig(&s.j));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn correct_model_never_worse_than_mismodeled(n in 4usize..=8, rho in 0.0..0.96f64) {
        let cfg = ncrlb::experiments::ScenarioConfig::bundled_default();
        let g = ncrlb::experiments::studies::correlation_formation(&cfg, n).unwrap();
        let p = ncrlb::experiments::studies::correlation_point(&g, rho).unwrap();
        prop_assert!(p.penalty >= 1.0 - 1e-9);
    }
}

// ---------------------------------------------------------------------------
// ioo
// ---------------------------------------------------------------------------

fn random_bistatic(seed: u64) -> BistaticGeometry {
    let mut r = rng(seed);
    let mut v = || {
        let d = randn_vec(&mut r, 3) * 3e5;
        Vector3::new(d[0], d[1], d[2])
    };
    BistaticGeometry { tx_pos: v(), rx_pos: v(), target_pos: v() }
}

fn echo(pg: f64) -> EchoBudget {
    EchoBudget {
        tx_power: 10.0,
        tx_gain: 1e5,
        rx_gain: 1e5,
        rcs_sigma_b: 1.0,
        wavelength: SPEED_OF_LIGHT / 300e9,
        processing_loss: 1.0,
        effective_noise: 5e-9,
        processing_gain: pg,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ioo_fim_rank_one(seed in any::<u64>(), pg in 40.0..120.0f64) {
        let g = random_bistatic(seed);
        let sig = SignalSpec::default();
        let hw = HardwareProfile::high_performance();
        let j = ioo_fim(&g, &sig, &hw, &echo(pg)).unwrap();
        let var = bistatic_range_variance(&sig, &hw, ncrlb::ioo::bistatic_sinr(&g, &echo(pg))).unwrap();
        let lam = 2.0 * (1.0 + g.bistatic_angle().cos()) / var;
        let mut ev: Vec<f64> = j.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        prop_assume!(lam > 0.0);
        prop_assert!((ev[2] - lam).abs() <= 1e-10 * lam);
        prop_assert!(ev[0].abs() <= 1e-10 * lam && ev[1].abs() <= 1e-10 * lam);
    }

    #[test]
    fn ioo_fusion_monotone_and_volume_lemma(seed in any::<u64>(), var in 1e-3..1e3f64) {
        let g = random_bistatic(seed);
        let mut r = rng(seed ^ 0x5a5a);
        let a = randn(&mut r, 3, 3);
        let prior_d = &a * a.transpose() + DMatrix::identity(3, 3) * 0.05;
        let prior = Matrix3::from_iterator(prior_d.iter().copied());
        let grad = bistatic_gradient(&g).unwrap();
        let f = fuse_gradient(&prior, &grad, var).unwrap();
        prop_assert!(f.posterior.determinant() >= prior.determinant() * (1.0 - 1e-12));
        prop_assert!(f.volume_ratio > 0.0 && f.volume_ratio <= 1.0);
        let lemma = (prior.determinant() / f.posterior.determinant()).sqrt();
        prop_assert!((f.volume_ratio - lemma).abs() <= 1e-10 * lemma);
    }
}
