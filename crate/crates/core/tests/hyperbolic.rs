use nalgebra::DMatrix;
use phk_core::bundlealg::IntMat;
use phk_core::dyncore::{Mat2Int, PerturbedMapParams};
use phk_core::hyperbolic::*;
use phk_core::kummer::Atlas;
use phk_core::metric::MetricSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ln_lambda() -> f64 {
    (9.0 + 4.0 * 5f64.sqrt()).ln()
}

#[test]
fn unperturbed_torus_spectrum() {
    let map = TorusMap { params: PerturbedMapParams::diagonal(0.0, 1).unwrap() };
    let rep = lyapunov_spectrum(&map, &[0.1234, 0.5678, 0.31, 0.77], 100_000, &LyapunovOptions::default()).unwrap();
    let l = ln_lambda();
    assert!((l - 2.8872709).abs() < 1e-7);
    let expect = [l, l, -l, -l];
    for (e, x) in rep.exponents.iter().zip(expect) {
        assert!((e - x).abs() < 1e-3, "{:?}", rep.exponents);
    }
    assert_eq!(rep.exponents.len(), 4);
    assert!(rep.sum().abs() < 1e-6);
}

#[test]
fn exponents_sum_to_log_jacobian_average() {
    for params in [
        PerturbedMapParams::diagonal(0.2, 1).unwrap(),
        PerturbedMapParams::diagonal(0.05, 4).unwrap(),
        PerturbedMapParams::area_preserving(0.3, 2).unwrap(),
    ] {
        let map = TorusMap { params };
        let rep = lyapunov_spectrum(&map, &[0.31, 0.42, 0.53, 0.64], 20_000, &LyapunovOptions::default()).unwrap();
        assert!((rep.sum() - rep.log_det_average).abs() < 1e-6);
        assert!(rep.exponents.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn area_preserving_sum_is_zero() {
    let map = TorusMap { params: PerturbedMapParams::area_preserving(0.05, 4).unwrap() };
    let rep = lyapunov_spectrum(&map, &[0.2, 0.7, 0.4, 0.9], 20_000, &LyapunovOptions::default()).unwrap();
    assert!(rep.sum().abs() < 1e-9);
    assert!(rep.log_det_average.abs() < 1e-12);
}

#[test]
fn translation_spectrum_is_zero() {
    let map = Translation { shift: vec![0.1, 2f64.sqrt(), 0.3] };
    let rep = lyapunov_spectrum(&map, &[0.0; 3], 5000, &LyapunovOptions::default()).unwrap();
    assert!(rep.exponents.iter().all(|e| *e == 0.0));
    assert!(rep.residuals.iter().all(|r| *r == 0.0));
}

#[test]
fn lyapunov_is_deterministic_and_traced() {
    let map = TorusMap { params: PerturbedMapParams::diagonal(0.1, 2).unwrap() };
    let opts = LyapunovOptions::default();
    let a = lyapunov_spectrum(&map, &[0.3, 0.1, 0.2, 0.6], 10_000, &opts).unwrap();
    let b = lyapunov_spectrum(&map, &[0.3, 0.1, 0.2, 0.6], 10_000, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trace.len(), 100);
    assert_eq!(a.trace.last().unwrap().0, 10_000);
    assert_eq!(a.trace.last().unwrap().1, a.exponents);
}

#[test]
fn lyapunov_rejects_short_runs() {
    let map = Translation { shift: vec![0.1] };
    assert!(matches!(
        lyapunov_spectrum(&map, &[0.0], 999, &LyapunovOptions::default()),
        Err(HypError::InvalidInput(_))
    ));
}

struct Collapse;

impl TangentDynamics for Collapse {
    fn dim(&self) -> usize {
        2
    }
    fn step(&self, _s: &mut [f64]) {}
    fn jacobian(&self, _s: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])
    }
}

#[test]
fn collapsing_frame_is_degenerate() {
    assert!(matches!(
        lyapunov_spectrum(&Collapse, &[0.0, 0.0], 1000, &LyapunovOptions::default()),
        Err(HypError::Degenerate { .. })
    ));
}

#[test]
fn block_diagonal_cocycle_has_zero_graph() {
    let t = DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 0.0, 0.0, 2.0, 0.1, 0.0, 0.3, 3.0]);
    let res = graph_transform_complement(&[t.clone(), t], 1, 50, 1e-12).unwrap();
    assert!(res.graphs.iter().all(|g| g.iter().all(|x| *x == 0.0)));
    assert_eq!(res.frame.dims, [1, 0, 2]);
}

#[test]
fn upper_triangular_oracle() {
    let mut r = ChaCha8Rng::seed_from_u64(30);
    for _ in 0..100 {
        let a: f64 = r.gen_range(-1.0..1.0);
        let b: f64 = r.gen_range(2.5..5.0) * if r.gen() { 1.0 } else { -1.0 };
        let c: f64 = r.gen_range(-3.0..3.0);
        let t = DMatrix::from_row_slice(2, 2, &[a, c, 0.0, b]);
        let res = graph_transform_complement(&[t], 1, 50, 1e-14).unwrap();
        let gamma = c / (b - a);
        assert!((res.graphs[0][(0, 0)] - gamma).abs() < 1e-12);
        let col = &res.frame.bases[0][2];
        assert!((col.norm() - 1.0).abs() < 1e-15);
    }
}

/// Random block upper-triangular cocycle with `|T1| = 1 / 2` and
/// `m(T3) >= 1`.
fn gapped_cocycle(r: &mut ChaCha8Rng, n1: usize, n3: usize, period: usize) -> Vec<DMatrix<f64>> {
    (0..period)
        .map(|_| {
            let n = n1 + n3;
            let mut t = DMatrix::zeros(n, n);
            let t1 = DMatrix::from_fn(n1, n1, |_, _| r.gen_range(-1.0..1.0));
            let t1 = &t1 * (0.5 / t1.clone().svd(false, false).singular_values.max());
            let q = DMatrix::from_fn(n3, n3, |_, _| r.gen_range(-1.0..1.0)).qr().q();
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n3, |_, _| r.gen_range(1.0..3.0)));
            let t3 = q * d;
            t.view_mut((0, 0), (n1, n1)).copy_from(&t1);
            t.view_mut((n1, n1), (n3, n3)).copy_from(&t3);
            t.view_mut((0, n1), (n1, n3)).copy_from(&DMatrix::from_fn(n1, n3, |_, _| r.gen_range(-2.0..2.0)));
            t
        })
        .collect()
}

#[test]
fn random_gapped_cocycles_converge() {
    let mut r = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..100 {
        let (n1, n3) = (1 + trial % 3, 1 + (trial / 3) % 3);
        let cocycle = gapped_cocycle(&mut r, n1, n3, 8);
        let res = graph_transform_complement(&cocycle, n1, 50, 1e-12).unwrap();
        assert!(res.residual < 1e-10, "trial {trial}: {}", res.residual);
        assert!(res.contraction <= 0.5 + 1e-12);
        // invariance checked independently: T_i [G_i; I] = [G_{i+1}; I] T3_i
        for i in 0..8 {
            let j = (i + 1) % 8;
            let mut emb = DMatrix::zeros(n1 + n3, n3);
            emb.view_mut((0, 0), (n1, n3)).copy_from(&res.graphs[i]);
            emb.view_mut((n1, 0), (n3, n3)).fill_with_identity();
            let image = &cocycle[i] * emb;
            let lower = image.view((n1, 0), (n3, n3)).into_owned();
            let upper = image.view((0, 0), (n1, n3)).into_owned();
            let pred = &res.graphs[j] * lower;
            assert!((upper - pred).norm() < 1e-10 * (1.0 + res.graphs[j].norm()));
        }
    }
}

#[test]
fn gap_violation_and_shape_errors() {
    let t = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 0.0, 2.0]);
    assert!(matches!(
        graph_transform_complement(&[t], 1, 50, 1e-12),
        Err(HypError::GapViolation { index: 0, .. })
    ));
    let t = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.1, 2.0]);
    assert!(matches!(
        graph_transform_complement(&[t], 1, 50, 1e-12),
        Err(HypError::NotTriangular { index: 0 })
    ));
    assert!(matches!(graph_transform_complement(&[], 1, 50, 1e-12), Err(HypError::InvalidInput(_))));
}

#[test]
fn weak_gap_runs_out_of_sweeps() {
    let t = DMatrix::from_row_slice(2, 2, &[0.999, 1.0, 0.0, 1.0]);
    assert!(matches!(
        graph_transform_complement(&[t], 1, 50, 1e-12),
        Err(HypError::NoConvergence { sweeps: 50, .. })
    ));
}

fn b2() -> IntMat {
    IntMat::from_mat2(&Mat2Int::B13_8.square())
}

#[test]
fn star_for_b_squared() {
    let l2 = 161.0 + 72.0 * 5f64.sqrt();
    let rep = verify_star(&b2(), [1, 0, 1], 0.5, 100.0).unwrap();
    assert!((rep.lambda_u - l2).abs() < 1e-9 && (rep.mu_u - l2).abs() < 1e-9);
    assert!((rep.lambda_s - 1.0 / l2).abs() < 1e-12 && (rep.mu_s - 1.0 / l2).abs() < 1e-12);
    assert!(rep.lambda_c.is_none());
    assert!(rep.chain && rep.pass);
    assert!(!verify_star(&b2(), [1, 0, 1], 1e-3, 100.0).unwrap().pass);
    assert!(!verify_star(&b2(), [1, 0, 1], 0.5, 400.0).unwrap().pass);
}

#[test]
fn star_with_centre_block() {
    let a = IntMat::block_diag(&[&b2(), &IntMat::identity(2)]);
    let rep = verify_star(&a, [1, 2, 1], 0.1, 20.0).unwrap();
    assert!((rep.lambda_c.unwrap() - 1.0).abs() < 1e-12);
    assert!((rep.mu_c.unwrap() - 1.0).abs() < 1e-12);
    assert!(rep.pass);
}

#[test]
fn star_fails_for_identity() {
    let rep = verify_star(&IntMat::identity(2), [1, 0, 1], 0.5, 0.5).unwrap();
    assert!(!rep.chain && !rep.pass);
    let rep = verify_star(&IntMat::identity(3), [1, 1, 1], 0.5, 0.5).unwrap();
    assert!(!rep.chain);
}

#[test]
fn star_invariant_under_permutation() {
    let a = IntMat::block_diag(&[&b2(), &IntMat::identity(2)]);
    let perm = IntMat::from_rows(&[vec![0, 0, 1, 0], vec![1, 0, 0, 0], vec![0, 0, 0, 1], vec![0, 1, 0, 0]]).unwrap();
    let pa = perm.mul(&a).unwrap().mul(&perm.transpose()).unwrap();
    let x = verify_star(&a, [1, 2, 1], 0.1, 20.0).unwrap();
    let y = verify_star(&pa, [1, 2, 1], 0.1, 20.0).unwrap();
    for (p, q) in [(x.lambda_s, y.lambda_s), (x.mu_s, y.mu_s), (x.lambda_u, y.lambda_u), (x.mu_u, y.mu_u)] {
        assert!((p - q).abs() <= 1e-10 * p);
    }
    assert!((x.mu_c.unwrap() - y.mu_c.unwrap()).abs() < 1e-10);
    assert_eq!(x.pass, y.pass);
}

#[test]
fn star_rejects_bad_dims() {
    assert!(verify_star(&b2(), [1, 1, 1], 0.5, 2.0).is_err());
    assert!(verify_star(&b2(), [0, 2, 0], 0.5, 2.0).is_err());
}

#[test]
fn fibre_rates_dominate_base_rates() {
    let params = PerturbedMapParams::diagonal(0.05, 4).unwrap();
    let (m_f, norm_df) = base_rate_extrema(&params, 10_000);
    let l = 9.0 + 4.0 * 5f64.sqrt();
    assert!(norm_df < l * l && m_f > 1.0 / (l * l));
    assert!(norm_df > 17.0 && m_f < 0.06);
    let rep = verify_star(&b2(), [1, 0, 1], m_f, norm_df).unwrap();
    assert!(rep.pass);
    // min fibre-unstable ratio exceeds every sampled base ratio
    assert!(rep.lambda_u > norm_df && rep.mu_s < m_f);
}

#[test]
fn pinching_reports_merge_associatively() {
    let atlas = Atlas::new(PerturbedMapParams::area_preserving(0.05, 1).unwrap()).unwrap();
    let spec = MetricSpec::for_atlas(&atlas).unwrap();
    let samples = pinching_samples(&atlas, &spec, 600, 5);
    assert_eq!(samples.len(), 600);
    let whole = pinching_check(&spec, &atlas, 2, &samples).unwrap();
    let parts: Vec<_> = samples.chunks(97).map(|c| pinching_check(&spec, &atlas, 2, c).unwrap()).collect();
    let left = parts.iter().cloned().reduce(|a, b| a.merge(b)).unwrap();
    let mut rev = parts.clone();
    let last = rev.pop().unwrap();
    let right = rev.into_iter().reduce(|a, b| a.merge(b)).unwrap().merge(last);
    assert_eq!(whole.samples, left.samples);
    assert_eq!(whole.inside, left.inside);
    assert_eq!(whole.min_ratio, left.min_ratio);
    assert_eq!(whole.max_ratio, right.max_ratio);
    assert_eq!(whole.worst, left.worst);
}

#[test]
fn pinching_samples_are_deterministic() {
    let atlas = Atlas::new(PerturbedMapParams::diagonal(0.05, 2).unwrap()).unwrap();
    let spec = MetricSpec::for_atlas(&atlas).unwrap();
    let a = pinching_samples(&atlas, &spec, 100, 9);
    assert_eq!(a, pinching_samples(&atlas, &spec, 100, 9));
    assert_ne!(a, pinching_samples(&atlas, &spec, 100, 10));
    let on_line = a.iter().filter(|v| v.base.on_exceptional_line()).count();
    assert_eq!(on_line, 20);
}

#[test]
fn small_pinching_search() {
    let search = pinching_search(|d| PerturbedMapParams::area_preserving(0.05, d), 2, 3, 1000, 1).unwrap();
    assert_eq!(search.first_pass, Some((1, 2)));
    assert_eq!(search.tried.len(), 2);
    assert!(!search.tried[0].pass());
    assert!(search.tried[1].pass());
}
