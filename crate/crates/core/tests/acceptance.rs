//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use secto_core::flow::{integral_indices, integrate, lax_residual, poisson_bracket, FlowConfig};
use secto_core::holonomy::{verify_realization, RealizationOptions};
use secto_core::linalg::{commutator, unit, wedge};
use secto_core::projective::{bmk_check, compatibility_residual, curvature_operator, dini_pair, geodesic_coincidence, RoundSphere};
use secto_core::random::{self, SeededRng};
use secto_core::scenario::run_text;
use secto_core::sectional::{
    bianchi_residual, build_rep, centralizer, express_polynomial, scalar_line_dimension, sectional_residual,
    solution_space, spectrum_predict, spectrum_verify, uniqueness_test,
};
use secto_core::{BilinearForm, JordanBlock, JordanSpec, MatrixPolynomial, RealizedJordan, SectionalRep};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_row_slice(v))
}

/// The seeded catalog shared by the first criteria.
fn catalog() -> Vec<(RealizedJordan, MatrixPolynomial)> {
    let mut rng = random::rng(20_240_601);
    (0..100)
        .map(|_| {
            let spec = random::jordan_spec(&mut rng, 8);
            let degree = rng.random_range(0..=5);
            let p = random::polynomial(&mut rng, degree);
            (spec.realize().expect("catalog spec realizes"), p)
        })
        .collect()
}

fn sectional_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut max_dim = 0;
    for (rj, p) in catalog() {
        let r = build_rep(&rj.a, &p, &rj.g).unwrap();
        worst = worst.max(sectional_residual(&r, &rj.a, &p.eval_matrix(&rj.a)));
        max_dim = max_dim.max(rj.dim());
    }
    outcome(worst <= 1e-10, format!("max residual {worst:.2e} over 100 cases, n ≤ {max_dim} (tol 1e-10)"))
}

fn bianchi() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, (rj, p)) in catalog().into_iter().enumerate() {
        let r = build_rep(&rj.a, &p, &rj.g).unwrap();
        worst = worst.max(bianchi_residual(&r, &rj.g, 200, k as u64));
    }
    outcome(worst <= 1e-10, format!("max residual {worst:.2e}, 200 triples x 100 cases (tol 1e-10)"))
}

fn spectrum() -> Outcome {
    let mut cases: Vec<(RealizedJordan, MatrixPolynomial)> = Vec::new();
    let t2 = MatrixPolynomial::monomial(2);
    let d3 = JordanSpec::diagonal(&[1.0, 2.0, 3.0]).realize().unwrap();
    let mut named = true;
    let mut predicted: Vec<f64> = spectrum_predict(&d3, &t2).iter().map(|e| e.value).collect();
    predicted.sort_by(f64::total_cmp);
    named &= predicted == vec![3.0, 4.0, 5.0];
    cases.push((d3, t2.clone()));
    for lambda in [0.0, 0.7, -1.3] {
        let j2 = JordanSpec::new(vec![JordanBlock::new(lambda, 2)]).realize().unwrap();
        let pr = spectrum_predict(&j2, &t2);
        named &= pr.len() == 1 && (pr[0].value - 2.0 * lambda).abs() < 1e-15;
        cases.push((j2, t2.clone()));
    }
    let mut rng = random::rng(77);
    while cases.len() < 24 {
        let spec = random::jordan_spec(&mut rng, 6);
        let degree = rng.random_range(1..=4);
        cases.push((spec.realize().unwrap(), random::polynomial(&mut rng, degree)));
    }
    let mut worst: f64 = 0.0;
    let mut failed = 0;
    let mut count = 0;
    for (rj, p) in &cases {
        let rep = spectrum_verify(rj, p, 1e-8).unwrap();
        count += rep.matches.len();
        failed += rep.matches.iter().filter(|m| !m.pass).count();
        worst = rep.matches.iter().map(|m| m.backward_error).fold(worst, f64::max);
    }
    outcome(
        named && failed == 0,
        format!(
            "{} cases, {count} predicted eigenvalues, {failed} unmatched, max backward error {worst:.2e} (tol 1e-8); diag(1,2,3)/t² -> {{3,4,5}} and J2(λ) -> {{2λ}} {}",
            cases.len(),
            if named { "ok" } else { "WRONG" }
        ),
    )
}

/// `R0 + C K C^T G`: a trace-symmetric perturbation with image in the centralizer.
fn user_operator(rj: &RealizedJordan, p: &MatrixPolynomial, rng: &mut SeededRng) -> SectionalRep {
    let r0 = build_rep(&rj.a, p, &rj.g).unwrap();
    let cz = centralizer(&rj.a, &rj.g).unwrap();
    let d = cz.dim();
    if d == 0 {
        return r0;
    }
    let k = random::matrix(rng, d, d);
    let k = (&k + k.transpose()) * 0.5;
    let s = &cz.coords * k * cz.coords.transpose() * r0.basis().gram();
    SectionalRep::from_matrix(r0.matrix() + s, &rj.g).unwrap()
}

fn polynomial_recovery() -> Outcome {
    let mut rng = random::rng(4);
    let (mut sect, mut comm, mut fit): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut perturbed = 0;
    for (rj, p) in catalog() {
        let b = p.eval_matrix(&rj.a);
        let r = user_operator(&rj, &p, &mut rng);
        if (r.matrix() - build_rep(&rj.a, &p, &rj.g).unwrap().matrix()).norm() > 1e-6 {
            perturbed += 1;
        }
        let s = sectional_residual(&r, &rj.a, &b);
        sect = sect.max(s);
        if s > 1e-10 {
            continue;
        }
        comm = comm.max(commutator(&rj.a, &b).norm() / (1.0 + rj.a.norm() * b.norm()));
        fit = fit.max(express_polynomial(&rj.a, &b).unwrap().1);
    }
    outcome(
        sect <= 1e-10 && comm <= 1e-10 && fit <= 1e-9,
        format!(
            "100 user operators ({perturbed} off the polynomial one): sectional {sect:.2e}, [A,B] {comm:.2e} (tol 1e-10), polynomial fit {fit:.2e} (tol 1e-9)"
        ),
    )
}

fn fubini_core() -> Outcome {
    let g = BilinearForm::identity(3);
    let a = diag(&[1.0, 2.0, 3.0]);
    let a2 = diag(&[1.0, 4.0, 9.0]);
    let v = uniqueness_test(&a, &(&a * 2.0), &a2, &(&a2 * 2.0), &g).unwrap();
    let (line, has_id) = scalar_line_dimension(&a, &a2, &g).unwrap();
    let k_err = (v.scalar - 2.0).abs().max(v.scalar_residual);
    let scalar_ok = v.solution_dimension == 0 && k_err <= 1e-9 && line == 1 && has_id;

    let mut dims = Vec::new();
    for a in [diag(&[1.0, 2.0, 3.0]), diag(&[1.0, 1.0, 2.0]), diag(&[0.5, 0.5, 0.5, -1.0])] {
        let n = a.nrows();
        let g = BilinearForm::identity(n);
        let b = &a * &a;
        let a2 = &a * 2.0 + DMatrix::identity(n, n);
        let joint = uniqueness_test(&a, &b, &a2, &(&b * 2.0), &g).unwrap().solution_dimension;
        let single = solution_space(&a, &b, &g).unwrap().freedom_dimension;
        dims.push((joint, single));
    }
    let dims_ok = dims.iter().all(|(j, s)| j == s);
    outcome(
        scalar_ok && dims_ok,
        format!(
            "independent pair: dim {}, k = {:.12} (err {k_err:.1e}, tol 1e-9), scalar line dim {line}; A' = 2A+I joint/single dims {dims:?}",
            v.solution_dimension, v.scalar
        ),
    )
}

fn rigid_body() -> (BilinearForm, DMatrix<f64>, SectionalRep, DMatrix<f64>) {
    let g = BilinearForm::identity(3);
    let a = diag(&[1.0, 2.0, 3.0]);
    let r = build_rep(&a, &MatrixPolynomial::monomial(2), &g).unwrap();
    let x0 = wedge(&unit(3, 0), &unit(3, 1), &g) + wedge(&unit(3, 1), &unit(3, 2), &g);
    (g, a, r, x0)
}

fn max_abs_drift(x0: &DMatrix<f64>, r: &SectionalRep, a: &DMatrix<f64>, g: &BilinearForm, h: f64) -> f64 {
    let t = integrate(x0, r, a, g, FlowConfig::new(h, 10.0)).unwrap();
    t.diagnostics.integrals.iter().filter(|d| !d.trivial).map(|d| d.max_abs_drift).fold(0.0, f64::max)
}

fn euler_flow() -> Outcome {
    let (g, a, r, x0) = rigid_body();
    let t = integrate(&x0, &r, &a, &g, FlowConfig::new(1e-3, 10.0)).unwrap();
    let drift = t.diagnostics.max_integral_rel_drift;

    // At the canonical start the drift sits at roundoff, so the convergence order
    // is measured on a faster orbit through the scaled start 5 x0.
    let fast = &x0 * 5.0;
    let (dh, dh2) = (max_abs_drift(&fast, &r, &a, &g, 1e-3), max_abs_drift(&fast, &r, &a, &g, 5e-4));
    let ratio = dh / dh2;

    let mut bracket: f64 = 0.0;
    let mut rng = random::rng(6);
    let g4 = BilinearForm::diagonal(&[1.0, -1.0, 1.0, 1.0]).unwrap();
    let a4 = random::g_symmetric(&mut rng, &g4);
    for (g, a) in [(g.clone(), a.clone()), (BilinearForm::identity(4), diag(&[1.0, 2.0, 3.0, 4.0])), (g4, a4)] {
        let idx = integral_indices(g.dim());
        for _ in 0..50 {
            let x = random::g_skew(&mut rng, &g);
            for (i, f) in idx.iter().enumerate() {
                for h in &idx[i + 1..] {
                    let (v, scale) = poisson_bracket(*f, *h, &x, &a, &g);
                    if scale > 0.0 {
                        bracket = bracket.max(v.abs() / scale);
                    }
                }
            }
        }
    }

    let b = &a * &a;
    let grid: Vec<f64> = (-12..=12).map(|i| i as f64 * 0.25).collect();
    let mut lax: f64 = 0.0;
    for s in t.samples.iter().chain([&t.final_state]) {
        for &l in &grid {
            lax = lax.max(lax_residual(&s.x, &r, &a, &b, l));
        }
    }
    outcome(
        drift <= 1e-6 && (12.0..=20.0).contains(&ratio) && bracket <= 1e-9 && lax <= 1e-11,
        format!(
            "drift {drift:.2e} (tol 1e-6), drift(h)/drift(h/2) = {ratio:.2} (window [12, 20]), brackets {bracket:.2e}·scale (tol 1e-9, n = 3, 4), Lax {lax:.2e} on {} λ (tol 1e-11)",
            grid.len()
        ),
    )
}

fn realization() -> Outcome {
    let specs: Vec<(&str, JordanSpec)> = vec![
        ("λI3", JordanSpec::diagonal(&[1.0, 1.0, 1.0])),
        ("J2(0)", JordanSpec::new(vec![JordanBlock::new(0.0, 2)])),
        ("J2(0)+J2(0)", JordanSpec::new(vec![JordanBlock::new(0.0, 2), JordanBlock::new(0.0, 2)])),
        ("J3(1)", JordanSpec::new(vec![JordanBlock::new(1.0, 3)])),
        ("diag(1,1,2)", JordanSpec::diagonal(&[1.0, 1.0, 2.0])),
        ("J2(0)+J1(0)", JordanSpec::new(vec![JordanBlock::new(0.0, 2), JordanBlock::new(0.0, 1)])),
    ];
    let opts = RealizationOptions::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, spec) in specs {
        let rep = verify_realization(&spec.realize().unwrap(), &opts).unwrap();
        pass &= rep.pass;
        let b = &rep.berger;
        let berger = if b.within_two_block_bound {
            format!("rank {}={}", b.image_dimension, b.centralizer_dimension)
        } else {
            format!("rank {}/{} flagged", b.image_dimension, b.centralizer_dimension)
        };
        let failed: Vec<&str> = rep.verdicts.iter().filter(|(_, ok)| !ok).map(|(k, _)| k.as_str()).collect();
        parts.push(format!(
            "{name}: {berger}, ∇A {:.1e}, R(0) {:.1e}, fd {:.1e}{}",
            rep.covariant_constancy_residual,
            rep.curvature_residual,
            rep.fd_residual.unwrap_or(f64::NAN),
            if failed.is_empty() { String::new() } else { format!(" FAILED {failed:?}") }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn projective() -> Outcome {
    let (g, gb) = dini_pair();
    let geo = geodesic_coincidence(&g, &gb, &[2.5, 1.5], 20, 0.3, 1e-3).unwrap();
    let points = [[2.5, 1.5], [2.2, 1.2], [2.8, 1.8], [2.3, 1.7], [2.7, 1.3]];
    let (mut compat, mut bmk): (f64, f64) = (0.0, 0.0);
    for x in &points {
        compat = compat.max(compatibility_residual(&g, &gb, x).unwrap().residual);
        bmk = bmk.max(bmk_check(&g, &gb, x).unwrap().residual);
    }
    let mut sphere: f64 = 0.0;
    for theta in [0.3, 0.9, 1.5, 2.4] {
        let r = curvature_operator(&RoundSphere, &[theta, 0.0]).unwrap();
        sphere = sphere.max((r.matrix() - DMatrix::identity(1, 1)).norm());
    }
    outcome(
        geo.max_hausdorff <= 1e-4 && compat <= 1e-6 && bmk <= 1e-6 && sphere <= 1e-8,
        format!(
            "Dini: Hausdorff {:.2e} over 20 directions (tol 1e-4), compatibility {compat:.2e}, sectional {bmk:.2e} at 5 points (tol 1e-6); sphere ‖R - id‖ {sphere:.2e} (tol 1e-8)",
            geo.max_hausdorff
        ),
    )
}

fn determinism() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.retain(|p| p.extension().is_some_and(|e| e == "json"));
    files.sort();
    let mut differing = Vec::new();
    for f in &files {
        let text = std::fs::read_to_string(f).unwrap();
        let first = run_text(&text).map(|r| r.to_json());
        let again = std::thread::scope(|s| s.spawn(|| run_text(&text).map(|r| r.to_json())).join().unwrap());
        if first.is_err() || first != again {
            differing.push(f.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    outcome(differing.is_empty(), format!("{} scenarios re-run, non-identical: {differing:?}", files.len()))
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(u32, &str, f64, Check); 9] = [
        (1, "sectional identity", 10.0, sectional_identity),
        (2, "Bianchi identity", f64::INFINITY, bianchi),
        (3, "spectrum prediction", f64::INFINITY, spectrum),
        (4, "polynomial recovery", f64::INFINITY, polynomial_recovery),
        (5, "two-pair uniqueness", f64::INFINITY, fubini_core),
        (6, "Euler flow integrals", 60.0, euler_flow),
        (7, "curvature realization", 30.0, realization),
        (8, "projective pair", 60.0, projective),
        (9, "determinism", f64::INFINITY, determinism),
    ];
    let mut failures = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let o = check();
        let secs = start.elapsed().as_secs_f64();
        let in_time = secs <= limit;
        let pass = o.pass && in_time;
        if !pass {
            failures += 1;
        }
        let budget = if limit.is_finite() { format!(", limit {limit} s") } else { String::new() };
        println!(
            "[{}] {id} {name}: {} ({secs:.2} s{budget})",
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("{} of 9 criteria passed", 9 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
