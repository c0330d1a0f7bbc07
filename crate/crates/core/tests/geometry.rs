//! Curvature realization and projective-pair properties.

use nalgebra::DMatrix;
use secto_core::holonomy::{
    curvature_at, extension_checks, extension_tensor, formal_curvature, realize_metric, BERGER_TOL,
};
use secto_core::projective::{
    bmk_check, comparison_tensor, compatibility_residual, constant_curvature_fit, curvature_operator, dini_pair,
    gbar_roundtrip, product_pair, Rational, RationalMetric, RoundSphere, Term,
};
use secto_core::random;
use secto_core::sectional::{bianchi_residual, centralizer};
use secto_core::{JordanBlock, JordanSpec, MetricField};

fn catalog() -> Vec<JordanSpec> {
    vec![
        JordanSpec::diagonal(&[0.5, 0.5, 0.5]),
        JordanSpec::new(vec![JordanBlock::new(0.0, 2)]),
        JordanSpec::new(vec![JordanBlock::new(0.0, 2), JordanBlock::new(0.0, 2)]),
        JordanSpec::new(vec![JordanBlock::new(1.0, 3)]),
        JordanSpec::diagonal(&[1.0, 1.0, 2.0]),
        JordanSpec::new(vec![JordanBlock::new(0.0, 2), JordanBlock::new(0.0, 1)]),
        JordanSpec::new(vec![JordanBlock::new(0.0, 2).with_sign(-1), JordanBlock::new(1.0, 2)]),
        JordanSpec::new(vec![JordanBlock::new(-1.0, 1), JordanBlock::new(-1.0, 1).with_sign(-1), JordanBlock::new(2.0, 2)]),
    ]
}

#[test]
fn formal_curvature_identities_hold_on_the_catalog() {
    for spec in catalog() {
        let rj = spec.realize().unwrap();
        let fc = formal_curvature(&rj);
        let b = extension_tensor(&rj);
        let e = extension_checks(&rj, &b, &fc);
        assert!(e.eq_symmetric <= 1e-12 * e.scale, "{spec:?}");
        assert!(e.eq_parallel <= 1e-12 * e.scale, "{spec:?}");
        assert!(e.eq_curvature <= 1e-12 * e.scale, "{spec:?}");
        assert!(bianchi_residual(&fc.rep, &rj.g, 200, 1) <= BERGER_TOL);
        let cz = centralizer(&rj.a, &rj.g).unwrap();
        let img = secto_core::holonomy::image_in_centralizer_residual(&fc.rep, &rj.a, &rj.g).unwrap();
        assert!(img <= BERGER_TOL, "{spec:?}: {img} (dim g_A {})", cz.dim());
    }
}

#[test]
fn both_curvature_implementations_agree_at_the_origin() {
    for spec in catalog() {
        let rj = spec.realize().unwrap();
        let metric = realize_metric(&rj, &extension_tensor(&rj)).unwrap().metric;
        let origin = vec![0.0; rj.dim()];
        let a = curvature_at(&metric, &origin).unwrap();
        let b = curvature_operator(&metric, &origin).unwrap();
        let c = metric.curvature_at_origin();
        assert!((a.matrix() - b.matrix()).norm() <= 1e-10, "{spec:?}");
        assert!((a.matrix() - c.matrix()).norm() <= 1e-10, "{spec:?}");
    }
}

fn scaled(m: &RationalMetric, c: f64) -> RationalMetric {
    let coeffs = m
        .coeffs
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| Rational { num: e.num.iter().map(|Term(k, ex)| Term(k * c, ex.clone())).collect(), den: e.den.clone() })
                .collect()
        })
        .collect();
    RationalMetric::new(coeffs).unwrap()
}

type Pair = (Box<dyn MetricField>, Box<dyn MetricField>, Vec<[f64; 2]>);

fn pairs() -> Vec<Pair> {
    let (g, gb) = dini_pair();
    let (h, hb) = product_pair(2.0, 3.0);
    vec![
        (Box::new(g.clone()), Box::new(gb), vec![[2.0, 3.0], [1.0, 2.0]]),
        (Box::new(h), Box::new(hb), vec![[-1.0, 1.0], [0.5, 2.0], [-1.0, 1.0]]),
        (Box::new(g.clone()), Box::new(scaled(&g, 4.0)), vec![[2.0, 3.0], [1.0, 2.0]]),
    ]
}

fn sample(rng: &mut random::SeededRng, bx: &[[f64; 2]]) -> Vec<f64> {
    bx.iter().map(|[lo, hi]| lo + (hi - lo) * (0.05 + 0.9 * (random::uniform(rng) + 1.0) / 2.0)).collect()
}

#[test]
fn comparison_tensor_round_trips() {
    let mut rng = random::rng(12);
    let mut count = 0;
    for (g, gb, bx) in pairs() {
        for _ in 0..34 {
            let x = sample(&mut rng, &bx);
            let ct = comparison_tensor(g.as_ref(), gb.as_ref(), &x).unwrap();
            assert!(ct.symmetry_residual <= 1e-12);
            let orig = gb.metric(&x);
            let back = gbar_roundtrip(&g.metric(&x), &ct.a).unwrap();
            assert!((back - &orig).norm() <= 1e-10 * orig.norm());
            count += 1;
        }
    }
    assert!(count >= 100);
}

#[test]
fn compatible_points_satisfy_the_sectional_identity() {
    let mut rng = random::rng(13);
    let tol = 1e-6;
    for (g, gb, bx) in pairs() {
        for _ in 0..10 {
            let x = sample(&mut rng, &bx);
            let r = curvature_operator(g.as_ref(), &x).unwrap();
            assert!(r.symmetry_residual() <= 1e-10);
            if compatibility_residual(g.as_ref(), gb.as_ref(), &x).unwrap().residual <= tol {
                assert!(bmk_check(g.as_ref(), gb.as_ref(), &x).unwrap().residual <= 100.0 * tol);
            }
        }
    }
}

#[test]
fn non_equivalent_pair_is_rejected() {
    let (g, _) = dini_pair();
    let other = RationalMetric::diagonal(vec![Rational::constant(1.0), Rational::polynomial(vec![Term(1.0, vec![1, 0])])]);
    let rep = compatibility_residual(&g, &other, &[2.5, 1.5]).unwrap();
    assert!(rep.residual > 1e-2 * rep.scale.max(1.0));
}

#[test]
fn sphere_has_constant_curvature_everywhere() {
    for theta in [0.2, 0.7, 1.3, 1.9, 2.8] {
        let r = curvature_operator(&RoundSphere, &[theta, 0.4]).unwrap();
        let (k, resid) = constant_curvature_fit(&r);
        assert!(resid <= 1e-8 && (k - 1.0).abs() <= 1e-8);
        assert!((r.matrix() - DMatrix::identity(1, 1)).norm() <= 1e-8);
    }
}
