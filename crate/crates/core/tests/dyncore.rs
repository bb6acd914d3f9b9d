use phk_core::dyncore::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn circle_close(a: f64, b: f64, tol: f64) -> bool {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d) <= tol
}

/// Quadratic formula on trace and determinant.
fn oracle_eigs(m: [[f64; 2]; 2]) -> (f64, f64) {
    let t = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (t * t - 4.0 * det).sqrt();
    ((t + disc) / 2.0, (t - disc) / 2.0)
}

#[test]
fn eigenvalue_anchors() {
    let e = eig_sym2(&Mat2Int::B13_8).unwrap();
    let (hi, lo) = oracle_eigs([[13.0, 8.0], [8.0, 5.0]]);
    assert!((e.lambda_plus - hi).abs() < 1e-12);
    assert!((e.lambda_minus - lo).abs() < 1e-12);
    assert!((e.lambda_plus - 17.9442719).abs() < 1e-7);
    assert!((e.lambda_minus - 0.0557281).abs() < 1e-7);
    let e2 = eig_sym2(&Mat2Int::B13_8.square()).unwrap();
    assert!((e2.lambda_plus - 321.9968944).abs() < 1e-7);
    assert!((e2.lambda_minus - 0.0031056).abs() < 1e-7);
    assert!((e2.lambda_plus * e2.lambda_minus - 1.0).abs() < 1e-12);
}

#[test]
fn eigen_rejects_bad_input() {
    assert_eq!(eig_sym2(&Mat2Int::new(0, 1, 0, 0)).err(), Some(DynError::NotSymmetric));
    assert_eq!(
        eig_real2(&[[0.0, -1.0], [1.0, 0.0]]).err(),
        Some(DynError::ComplexEigenvalues)
    );
}

#[test]
fn bump_properties_on_grid() {
    for &(eps, d) in &[(0.05, 1u32), (0.1, 3), (0.25, 8)] {
        let p = BumpProfile::smooth(eps, d, DEFAULT_DELTA).unwrap();
        let zone = p.linear_zone_half_width();
        for i in 0..10_000 {
            let x = i as f64 / 10_000.0 - 0.5;
            let (h, hp) = p.eval(x);
            assert!(hp.abs() <= eps * (1.0 + 1e-12), "sup |h'| at {x}");
            assert!((p.h(-x) + h).abs() < 1e-14, "oddness at {x}");
            assert!((p.h(x + 0.5) - h).abs() < 1e-14, "half period at {x}");
            assert!((p.h(x + 1.0) - h).abs() < 1e-14, "period at {x}");
            if x.abs() < zone {
                assert!((h - eps * x).abs() < 1e-15);
                assert_eq!(hp, eps);
            }
        }
    }
}

#[test]
fn bump_derivative_matches_difference_quotient() {
    let p = BumpProfile::smooth(0.2, 2, DEFAULT_DELTA).unwrap();
    let mut r = rng(1);
    for _ in 0..1000 {
        let x: f64 = r.gen();
        let step = 1e-6;
        let fd = (p.h(x + step) - p.h(x - step)) / (2.0 * step);
        assert!((fd - p.h_prime(x)).abs() < 1e-7);
    }
}

#[test]
fn bump_rejects_bad_parameters() {
    assert!(BumpProfile::smooth(0.1, 1, 0.125).is_err());
    assert!(BumpProfile::smooth(0.1, 1, 0.0).is_err());
    assert!(BumpProfile::smooth(-0.1, 1, DEFAULT_DELTA).is_err());
    assert!(BumpProfile::smooth(0.1, 0, DEFAULT_DELTA).is_err());
}

#[test]
fn analytic_sin_profile() {
    let (eps, d) = (0.3, 3u32);
    let p = BumpProfile::analytic_sin(eps, d).unwrap();
    let x = 1.0 / (8.0 * d as f64);
    assert!((p.h(x) - eps / (4.0 * d as f64 * std::f64::consts::PI)).abs() < 1e-15);
    assert_eq!(p.eval(0.0), (0.0, eps));
    let mut r = rng(2);
    for _ in 0..1000 {
        let x: f64 = r.gen();
        assert!(p.h_prime(x).abs() <= eps);
        assert!((p.h(-x) + p.h(x)).abs() < 1e-15);
    }
}

#[test]
fn origin_and_half_lattice_fixed() {
    let params = PerturbedMapParams::diagonal(0.0, 1).unwrap();
    assert_eq!(perturbed_apply(&params, &Torus4Point([0.0; 4])), Torus4Point([0.0; 4]));
    assert!(Mat2Int::B13_8.is_identity_mod2());
    for &eps in &[0.0, 0.05, 0.2] {
        for d in [1u32, 2, 5] {
            let params = PerturbedMapParams::diagonal(eps, d).unwrap();
            for i in 0..16 {
                let p = Torus4Point::half_lattice(i);
                let q = perturbed_apply(&params, &p);
                assert!(p.dist(&q) < 1e-12, "half-lattice point {i} moved");
            }
        }
    }
}

#[test]
fn first_factor_half_point() {
    let params = PerturbedMapParams::diagonal(0.1, 1).unwrap();
    let q = perturbed_apply(&params, &Torus4Point([0.5, 0.5, 0.0, 0.0]));
    assert!(circle_close(q.0[0], 0.5, 1e-15) && circle_close(q.0[1], 0.5, 1e-15));
}

#[test]
fn differential_at_origin() {
    let eps = 0.07;
    for (dir, a, b) in [((1, 1), 1.0, 1.0), ((8, 5), 8.0, 5.0)] {
        let bump = BumpProfile::smooth(eps, 2, DEFAULT_DELTA).unwrap();
        let params = PerturbedMapParams::new(Mat2Int::B13_8, bump, dir).unwrap();
        let m = params.block(0.0);
        assert!((m[0][0] - (13.0 - a * eps)).abs() < 1e-15);
        assert_eq!(m[0][1], 8.0);
        assert!((m[1][0] - (8.0 - b * eps)).abs() < 1e-15);
        assert_eq!(m[1][1], 5.0);
        let df = perturbed_diff(&params, &Torus4Point([0.01, 0.3, 0.0, 0.9]));
        // both factors are in the linear zone in their first coordinate
        assert!((df[(0, 0)] - m[0][0]).abs() < 1e-15);
        assert!((df[(2, 2)] - m[0][0]).abs() < 1e-15);
        assert_eq!(df[(0, 2)], 0.0);
    }
}

#[test]
fn unperturbed_is_block_linear() {
    let params = PerturbedMapParams::diagonal(0.0, 3).unwrap();
    let mut r = rng(3);
    for _ in 0..100 {
        let p = Torus4Point::new(r.gen());
        let df = perturbed_diff(&params, &p);
        for (i, j, v) in [(0, 0, 13.0), (0, 1, 8.0), (1, 0, 8.0), (1, 1, 5.0)] {
            assert_eq!(df[(i, j)], v);
            assert_eq!(df[(i + 2, j + 2)], v);
        }
        assert_eq!(jacobian_det(&params, p.0[0]), 1.0);
    }
}

#[test]
fn diff_matches_finite_differences() {
    let params = PerturbedMapParams::diagonal(0.2, 2).unwrap();
    let mut r = rng(4);
    let step = 1e-7;
    for _ in 0..1000 {
        let p: [f64; 4] = r.gen();
        let df = perturbed_diff(&params, &Torus4Point::new(p));
        for j in 0..4 {
            let mut hi = p;
            let mut lo = p;
            hi[j] += step;
            lo[j] -= step;
            let fh = perturbed_apply(&params, &Torus4Point::new(hi));
            let fl = perturbed_apply(&params, &Torus4Point::new(lo));
            for i in 0..4 {
                let mut diff = fh.0[i] - fl.0[i];
                diff -= diff.round();
                let fd = diff / (2.0 * step);
                assert!((fd - df[(i, j)]).abs() < 1e-6, "entry ({i},{j})");
            }
        }
    }
}

#[test]
fn determinant_by_direction() {
    let mut r = rng(5);
    let eps = 0.25;
    let diag = PerturbedMapParams::diagonal(eps, 3).unwrap();
    let area = PerturbedMapParams::area_preserving(eps, 3).unwrap();
    assert_eq!(diag.det_coefficient(), 3);
    assert_eq!(area.det_coefficient(), 0);
    for _ in 0..1000 {
        let x: f64 = r.gen();
        let hp = diag.bump().h_prime(x);
        assert!((jacobian_det(&diag, x) - (1.0 + 3.0 * hp)).abs() < 1e-12);
        assert!((jacobian_det(&area, x) - 1.0).abs() < 1e-12);
        // finite-difference determinant of the first factor
        let step = 1e-6;
        let f = |x: f64, y: f64| perturbed_apply(&diag, &Torus4Point::new([x, y, 0.0, 0.0]));
        let y: f64 = r.gen();
        let col = |dx: f64, dy: f64| {
            let a = f(x + dx, y + dy).0;
            let b = f(x - dx, y - dy).0;
            let u = (a[0] - b[0]) - (a[0] - b[0]).round();
            let v = (a[1] - b[1]) - (a[1] - b[1]).round();
            (u / (2.0 * step), v / (2.0 * step))
        };
        let (a, c) = col(step, 0.0);
        let (b, d) = col(0.0, step);
        assert!((a * d - b * c - (1.0 + 3.0 * hp)).abs() < 1e-5);
    }
}

#[test]
fn diffeomorphism_threshold() {
    assert!(PerturbedMapParams::diagonal(0.33, 1).is_ok());
    match PerturbedMapParams::diagonal(1.0 / 3.0, 1) {
        Err(DynError::NotDiffeomorphism { coefficient, .. }) => assert_eq!(coefficient, 3),
        other => panic!("expected NotDiffeomorphism, got {other:?}"),
    }
    assert!(PerturbedMapParams::area_preserving(0.9, 1).is_ok());
    let bump = BumpProfile::smooth(0.1, 1, DEFAULT_DELTA).unwrap();
    assert!(PerturbedMapParams::new(Mat2Int::new(2, 1, 1, 2), bump, (1, 1)).is_err());
}

#[test]
fn unperturbed_inverse_is_adjugate() {
    let params = PerturbedMapParams::diagonal(0.0, 1).unwrap();
    let inv = Mat2Int::B13_8.adjugate();
    assert_eq!(inv, Mat2Int::new(5, -8, -8, 13));
    let mut r = rng(6);
    for _ in 0..200 {
        let q: [f64; 4] = r.gen();
        let p = perturbed_inverse(&params, &Torus4Point::new(q)).unwrap();
        let expect = [
            5.0 * q[0] - 8.0 * q[1],
            -8.0 * q[0] + 13.0 * q[1],
            5.0 * q[2] - 8.0 * q[3],
            -8.0 * q[2] + 13.0 * q[3],
        ];
        for i in 0..4 {
            assert!(circle_close(p.0[i], expect[i], 1e-12));
        }
    }
    assert_eq!(perturbed_inverse(&params, &Torus4Point([0.0; 4])).unwrap(), Torus4Point([0.0; 4]));
}

#[test]
fn inverse_round_trip() {
    let mut r = rng(7);
    for params in [
        PerturbedMapParams::diagonal(0.3, 1).unwrap(),
        PerturbedMapParams::diagonal(0.05, 4).unwrap(),
        PerturbedMapParams::area_preserving(0.5, 2).unwrap(),
    ] {
        for _ in 0..1000 {
            let p = Torus4Point::new(r.gen());
            let q = perturbed_apply(&params, &p);
            let back = perturbed_inverse(&params, &q).unwrap();
            assert!(back.dist(&p) < 1e-12);
        }
    }
}

#[test]
fn eigenvalues_of_perturbed_block_not_reciprocal() {
    // (13 - eps, 8; 8 - eps, 5) has determinant 1 + 3 eps
    let eps = 0.1;
    let bump = BumpProfile::smooth(eps, 1, DEFAULT_DELTA).unwrap();
    let params = PerturbedMapParams::new(Mat2Int::B13_8, bump, (1, 1)).unwrap();
    let e = eig_real2(&params.linear_block()).unwrap();
    let (hi, lo) = oracle_eigs([[13.0 - eps, 8.0], [8.0 - eps, 5.0]]);
    assert!((e.lambda_plus - hi).abs() < 1e-12);
    assert!((e.lambda_minus - lo).abs() < 1e-12);
    assert!((e.lambda_plus * e.lambda_minus - (1.0 + 3.0 * eps)).abs() < 1e-12);
}

proptest! {
    #[test]
    fn linear_map_is_additive(p in prop::array::uniform4(0.0f64..1.0), q in prop::array::uniform4(0.0f64..1.0)) {
        let params = PerturbedMapParams::diagonal(0.0, 1).unwrap();
        let sum: [f64; 4] = core::array::from_fn(|i| p[i] + q[i]);
        let lhs = perturbed_apply(&params, &Torus4Point::new(sum));
        let fp = perturbed_apply(&params, &Torus4Point::new(p));
        let fq = perturbed_apply(&params, &Torus4Point::new(q));
        for i in 0..4 {
            prop_assert!(circle_close(lhs.0[i], fp.0[i] + fq.0[i], 1e-12));
        }
    }

    #[test]
    fn points_reduce_into_unit_cube(c in prop::array::uniform4(-50.0f64..50.0)) {
        let p = Torus4Point::new(c);
        for x in p.0 {
            prop_assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn bump_odd_and_bounded(x in -3.0f64..3.0, eps in 0.0f64..0.3, d in 1u32..20) {
        let p = BumpProfile::smooth(eps, d, DEFAULT_DELTA).unwrap();
        prop_assert!((p.h(x) + p.h(-x)).abs() < 1e-14);
        prop_assert!(p.h_prime(x).abs() <= eps * (1.0 + 1e-12));
    }

    #[test]
    fn inverse_inverts(c in prop::array::uniform4(0.0f64..1.0), eps in 0.0f64..0.33, d in 1u32..16) {
        let params = PerturbedMapParams::diagonal(eps, d).unwrap();
        let p = Torus4Point::new(c);
        let back = perturbed_inverse(&params, &perturbed_apply(&params, &p)).unwrap();
        prop_assert!(back.dist(&p) < 1e-11);
    }
}
