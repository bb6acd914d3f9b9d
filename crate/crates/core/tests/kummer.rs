use num_complex::Complex64;
use phk_core::dyncore::{perturbed_apply, PerturbedMapParams, Torus4Point};
use phk_core::kummer::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn atlas(eps: f64, d: u32) -> Atlas {
    Atlas::new(PerturbedMapParams::diagonal(eps, d).unwrap()).unwrap()
}

fn area_atlas(eps: f64, d: u32) -> Atlas {
    Atlas::new(PerturbedMapParams::area_preserving(eps, d).unwrap()).unwrap()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_v(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> Complex64 {
    let m = lo * (hi / lo).powf(r.gen::<f64>());
    Complex64::from_polar(m, std::f64::consts::TAU * r.gen::<f64>())
}

/// A psi-chart point in the chart domain with `|w|` a fraction of the
/// largest admissible height.
fn random_psi(a: &Atlas, r: &mut ChaCha8Rng, chart: ChartId) -> KummerPoint {
    let v = random_v(r, 1e-3, 1.0);
    let max_h = (a.model_radius() / (2f64.sqrt() * a.frame_norm())).powi(2);
    let w = Complex64::from_polar(max_h * r.gen_range(1e-4..0.99), std::f64::consts::TAU * r.gen::<f64>());
    let pt = KummerPoint::psi(chart, v, w);
    assert!(a.in_psi_domain(&pt));
    pt
}

fn close_c(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

#[test]
fn transition_formula_and_round_trip() {
    let mut r = ChaCha8Rng::seed_from_u64(10);
    let (v, w) = blowup_chart_map(ChartId::Psi1(2), ChartId::Psi2(2), c(2.0, 0.0), c(0.5, 0.0)).unwrap();
    assert_eq!((v, w), (c(0.5, 0.0), c(2.0, 0.0)));
    for _ in 0..1000 {
        let v = random_v(&mut r, 0.5, 2.0);
        let w = c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let (v2, w2) = blowup_chart_map(ChartId::Psi1(0), ChartId::Psi2(0), v, w).unwrap();
        assert!(close_c(v2, 1.0 / v, 1e-15) && close_c(w2, v * v * w, 1e-15));
        let (v3, w3) = blowup_chart_map(ChartId::Psi2(0), ChartId::Psi1(0), v2, w2).unwrap();
        assert!((v3 - v).norm() < 1e-13 && (w3 - w).norm() < 1e-13);
        assert_eq!(blowup_chart_map(ChartId::Psi1(0), ChartId::Psi1(0), v, w).unwrap(), (v, w));
    }
}

#[test]
fn eta_values_and_consistency() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    assert_eq!(eta_coefficient(&KummerPoint { chart: ChartId::Torus, coords: [0.2; 4] }), c(1.0, 0.0));
    for _ in 0..1000 {
        let v = random_v(&mut r, 0.1, 10.0);
        let w = c(r.gen(), r.gen());
        let p1 = KummerPoint::psi(ChartId::Psi1(7), v, w);
        assert_eq!(eta_coefficient(&p1), c(0.5, 0.0));
        let (v2, w2) = blowup_chart_map(ChartId::Psi1(7), ChartId::Psi2(7), v, w).unwrap();
        let p2 = KummerPoint::psi(ChartId::Psi2(7), v2, w2);
        // d(1/v) ^ d(v^2 w) by a finite-difference Jacobian of the map
        let h = 1e-6;
        let jv = ((1.0 / (v + h)) - (1.0 / (v - h))) / (2.0 * h);
        let jw = ((v * v * (w + h)) - (v * v * (w - h))) / (2.0 * h);
        let det_fd = jv * jw;
        assert!((det_fd - transition_jacobian_det(v)).norm() < 1e-6);
        let pulled = eta_coefficient(&p2) * transition_jacobian_det(v);
        assert!((pulled - eta_coefficient(&p1)).norm() < 1e-12);
        assert!(eta_coefficient(&p2).norm() >= 0.5);
    }
}

#[test]
fn sigma_is_iota_invariant() {
    let a = atlas(0.05, 2);
    let mut r = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let t = Torus4Point::new(r.gen());
        let p = a.sigma_project(&t).unwrap();
        let q = a.sigma_project(&t.negate()).unwrap();
        assert!(p.approx_eq(&q, 1e-12), "{p:?} vs {q:?}");
        let fp = a.apply(&p).unwrap();
        let fq = a.apply(&q).unwrap();
        assert!(fp.approx_eq(&fq, 1e-10));
    }
}

#[test]
fn torus_chart_uses_canonical_representative() {
    let a = atlas(0.05, 2);
    let t = Torus4Point::new([0.7, 0.2, 0.3, 0.9]);
    let p = a.sigma_project(&t).unwrap();
    assert_eq!(p.chart, ChartId::Torus);
    let neg = t.negate();
    let expect = if t.0 <= neg.0 { t } else { neg };
    assert!(Torus4Point(p.coords).dist(&expect) < 1e-15);
}

#[test]
fn exceptional_points_are_rejected() {
    let a = atlas(0.1, 1);
    assert_eq!(a.sigma_project(&Torus4Point([0.0; 4])), Err(KummerError::ExceptionalInput));
    assert_eq!(
        a.sigma_project(&Torus4Point([0.5, 0.0, 0.5, 0.5])),
        Err(KummerError::ExceptionalInput)
    );
}

#[test]
fn commutes_with_torus_map_outside_blowups() {
    let mut r = ChaCha8Rng::seed_from_u64(13);
    for (eps, d) in [(0.05, 1), (0.2, 3), (0.05, 8)] {
        let a = atlas(eps, d);
        let mut tested = 0;
        while tested < 1000 {
            let t = Torus4Point::new(r.gen());
            let p = a.sigma_project(&t).unwrap();
            if p.chart != ChartId::Torus {
                continue;
            }
            tested += 1;
            let lhs = a.apply(&p).unwrap();
            let rhs = a.sigma_project(&perturbed_apply(a.params(), &t)).unwrap();
            assert!(lhs.approx_eq(&rhs, 1e-10));
        }
    }
}

#[test]
fn chart_step_agrees_with_torus_route() {
    // psi points: multiplier formula vs lift, torus map, project
    let mut r = ChaCha8Rng::seed_from_u64(14);
    for (eps, d) in [(0.05, 1), (0.25, 2), (0.1, 5)] {
        let a = atlas(eps, d);
        for i in 0..500 {
            let chart = if i % 2 == 0 { ChartId::Psi1((i % 16) as u8) } else { ChartId::Psi2((i % 16) as u8) };
            let p = random_psi(&a, &mut r, chart);
            let via_chart = a.apply(&p).unwrap();
            let t = a.torus_lift(&p).unwrap();
            let via_torus = a.sigma_project(&perturbed_apply(a.params(), &t)).unwrap();
            assert_eq!(via_chart.chart, via_torus.chart);
            if via_chart.chart == ChartId::Torus {
                assert!(via_chart.approx_eq(&via_torus, 1e-10));
            } else {
                assert!(close_c(via_chart.v(), via_torus.v(), 1e-9));
                assert!(close_c(via_chart.w(), via_torus.w(), 1e-9));
            }
        }
    }
}

#[test]
fn exceptional_line_invariant() {
    let mut r = ChaCha8Rng::seed_from_u64(15);
    for (eps, d) in [(0.0, 1), (0.05, 2), (0.3, 7)] {
        let a = atlas(eps, d);
        for i in 0..200 {
            let chart = if i % 2 == 0 { ChartId::Psi1(3) } else { ChartId::Psi2(9) };
            let p = KummerPoint::psi(chart, random_v(&mut r, 1e-3, 1.0), c(0.0, 0.0));
            let q = a.apply(&p).unwrap();
            assert!(q.on_exceptional_line());
            let back = a.apply_inverse(&q).unwrap();
            assert!(back.on_exceptional_line());
        }
    }
}

#[test]
fn exceptional_line_multiplier() {
    let a = area_atlas(0.05, 4);
    let mu = a.mu_hat();
    assert!((a.mu_check() * mu - 1.0).abs() < 1e-12);
    let v = c(1e-4, 2e-4);
    let q = a.apply(&KummerPoint::psi(ChartId::Psi1(0), v, c(0.0, 0.0))).unwrap();
    assert_eq!(q.chart, ChartId::Psi1(0));
    assert!(close_c(q.v(), v * mu * mu, 1e-12));
    let zero = KummerPoint::psi(ChartId::Psi1(5), c(0.0, 0.0), c(0.0, 0.0));
    assert_eq!(atlas(0.0, 1).apply(&zero).unwrap(), zero);
}

#[test]
fn multipliers_not_reciprocal_for_diagonal_direction() {
    let a = atlas(0.1, 1);
    let (fv, fw) = a.chart_multipliers(ChartId::Psi1(0));
    assert!((fv - a.mu_hat() / a.mu_check()).abs() < 1e-12);
    assert!((fw - a.mu_check().powi(2)).abs() < 1e-15);
    assert!((a.mu_hat() * a.mu_check() - 1.3).abs() < 1e-12);
}

#[test]
fn chart_independent_near_unit_circle() {
    let mut r = ChaCha8Rng::seed_from_u64(16);
    let a = atlas(0.05, 2);
    for _ in 0..500 {
        let mut p = random_psi(&a, &mut r, ChartId::Psi1(4));
        let v = Complex64::from_polar(r.gen_range(0.9..1.0), r.gen_range(0.0..std::f64::consts::TAU));
        p.coords[0] = v.re;
        p.coords[1] = v.im;
        let comp: [f64; 4] = r.gen();
        let vec = TangentVec { base: p, components: comp };
        let other = a.change_chart(&vec, ChartId::Psi2(4)).unwrap();
        let f1 = a.diff(&vec).unwrap();
        let f2 = a.diff(&other).unwrap();
        assert_eq!(f1.base.chart, f2.base.chart);
        if f1.base.chart == ChartId::Torus {
            assert!(f1.base.approx_eq(&f2.base, 1e-10));
            continue;
        }
        assert!(close_c(f1.base.v(), f2.base.v(), 1e-10));
        assert!(close_c(f1.base.w(), f2.base.w(), 1e-10));
        assert!(close_c(f1.dv(), f2.dv(), 1e-10));
        assert!(close_c(f1.dw(), f2.dw(), 1e-10));
    }
}

#[test]
fn differential_matches_finite_differences() {
    let mut r = ChaCha8Rng::seed_from_u64(17);
    let a = atlas(0.2, 2);
    let h = 1e-7;
    let mut checked = 0;
    while checked < 100 {
        let t = Torus4Point::new(r.gen());
        let base = a.sigma_project(&t).unwrap();
        let base = if checked % 2 == 1 { random_psi(&a, &mut r, ChartId::Psi2(1)) } else { base };
        let comp: [f64; 4] = core::array::from_fn(|_| r.gen_range(-1.0..1.0));
        let image = a.diff(&TangentVec { base, components: comp }).unwrap();
        let shift = |s: f64| {
            let mut b = base;
            for i in 0..4 {
                b.coords[i] += s * comp[i];
            }
            if b.chart == ChartId::Torus {
                a.sigma_project(&Torus4Point::new(b.coords)).unwrap()
            } else {
                b
            }
        };
        let hi = a.apply(&shift(h)).unwrap();
        let lo = a.apply(&shift(-h)).unwrap();
        if hi.chart != image.base.chart || lo.chart != image.base.chart {
            continue;
        }
        let scale = image.components.iter().map(|x| x.abs()).fold(1.0, f64::max);
        for i in 0..4 {
            let mut diff = hi.coords[i] - lo.coords[i];
            if hi.chart == ChartId::Torus {
                diff -= diff.round();
            }
            let fd = diff / (2.0 * h);
            assert!((fd - image.components[i]).abs() < 1e-6 * scale, "component {i}: {fd} vs {}", image.components[i]);
        }
        checked += 1;
    }
}

#[test]
fn inverse_round_trip() {
    let mut r = ChaCha8Rng::seed_from_u64(18);
    let a = atlas(0.1, 3);
    for i in 0..500 {
        let p = if i % 2 == 0 {
            a.sigma_project(&Torus4Point::new(r.gen())).unwrap()
        } else {
            random_psi(&a, &mut r, ChartId::Psi1(8))
        };
        let q = a.apply(&p).unwrap();
        let back = a.apply_inverse(&q).unwrap();
        if back.chart == p.chart {
            if p.chart == ChartId::Torus {
                assert!(back.approx_eq(&p, 1e-9));
            } else {
                assert!(close_c(back.v(), p.v(), 1e-9) && close_c(back.w(), p.w(), 1e-9));
            }
        } else {
            let x = a.torus_lift(&back).unwrap();
            let y = a.torus_lift(&p).unwrap();
            assert!(x.dist(&y) < 1e-9 || x.dist(&y.negate()) < 1e-9);
        }
    }
}

#[test]
fn blowup_radius_scales_like_one_over_d() {
    for d in [1u32, 2, 4, 16, 64] {
        let a = atlas(0.05, d);
        assert!((a.handoff_radius() * d as f64 - 1.0 / 16.0).abs() < 1e-15);
    }
}

#[test]
fn analytic_profile_has_no_atlas() {
    use phk_core::dyncore::{BumpProfile, Mat2Int};
    let bump = BumpProfile::analytic_sin(0.05, 1).unwrap();
    let params = PerturbedMapParams::new(Mat2Int::B13_8, bump, (1, 1)).unwrap();
    assert_eq!(Atlas::new(params).err(), Some(KummerError::UnsupportedProfile));
}

proptest! {
    #[test]
    fn canonical_rep_is_lexicographic_min(t in prop::array::uniform4(0.0f64..1.0)) {
        let t = Torus4Point::new(t);
        let (rep, _) = canonical_rep(&t);
        let (rep2, _) = canonical_rep(&t.negate());
        prop_assert!(rep.dist(&rep2) < 1e-15);
        prop_assert!(rep.0 <= t.0 || rep.dist(&t.negate()) < 1e-15);
    }

    #[test]
    fn transition_is_involutive(re in -3.0f64..3.0, im in -3.0f64..3.0, wr in -1.0f64..1.0, wi in -1.0f64..1.0) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let (v, w) = (c(re, im), c(wr, wi));
        let (a, b) = blowup_chart_map(ChartId::Psi1(0), ChartId::Psi2(0), v, w).unwrap();
        let (v2, w2) = blowup_chart_map(ChartId::Psi2(0), ChartId::Psi1(0), a, b).unwrap();
        prop_assert!((v2 - v).norm() < 1e-12 * (1.0 + v.norm()));
        prop_assert!((w2 - w).norm() < 1e-12 * (1.0 + w.norm()));
    }
}
