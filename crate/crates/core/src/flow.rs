//! The Euler equation `x' = [R(x), x]` on `so(g)` and its shift integrals.
//!
//! For a sectional `R` associated with `(A, B)` the coefficients of `λ^m` in
//! `tr (x + λA)^k` are first integrals which commute under the Lie–Poisson
//! bracket `{f, h}(x) = <x, [∇f, ∇h]>`. The integrator here is plain RK4; the
//! integrals are monitored, never enforced.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{commutator, g_adjoint, role_residual, to_rows, trace_pairing, BilinearForm, Role};
use crate::sectional::SectionalRep;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub x: DMatrix<f64>,
    pub t: f64,
}

/// `[R(x), x]`.
pub fn euler_rhs(x: &DMatrix<f64>, r: &SectionalRep) -> DMatrix<f64> {
    commutator(&r.apply(x), x)
}

/// `H(x) = ½ <R(x), x>`.
pub fn energy(x: &DMatrix<f64>, r: &SectionalRep) -> f64 {
    0.5 * trace_pairing(&r.apply(x), x)
}

/// `<x, x>`, a Casimir of the Lie–Poisson structure.
pub fn casimir(x: &DMatrix<f64>) -> f64 {
    trace_pairing(x, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct IntegralIndex {
    pub k: usize,
    pub m: usize,
}

/// Coefficients of `λ^m` in `tr (x + λA)^k` for `k = 2..=n`, `m = 0..=k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralSet {
    pub indices: Vec<IntegralIndex>,
    pub values: Vec<f64>,
}

impl IntegralSet {
    pub fn get(&self, k: usize, m: usize) -> Option<f64> {
        self.indices.iter().position(|i| *i == IntegralIndex { k, m }).map(|p| self.values[p])
    }
}

/// `coeffs[j][m]` is the coefficient of `λ^m` in `(x + λA)^j`, for `j <= max_power`.
fn power_coefficients(x: &DMatrix<f64>, a: &DMatrix<f64>, max_power: usize) -> Vec<Vec<DMatrix<f64>>> {
    let n = x.nrows();
    let mut out = vec![vec![DMatrix::identity(n, n)]];
    for j in 1..=max_power {
        let prev = &out[j - 1];
        let next: Vec<DMatrix<f64>> = (0..=j)
            .map(|m| {
                let mut c = DMatrix::zeros(n, n);
                if m < j {
                    c += &prev[m] * x;
                }
                if m > 0 {
                    c += &prev[m - 1] * a;
                }
                c
            })
            .collect();
        out.push(next);
    }
    out
}

pub fn integral_indices(n: usize) -> Vec<IntegralIndex> {
    (2..=n).flat_map(|k| (0..=k).map(move |m| IntegralIndex { k, m })).collect()
}

pub fn shift_integrals(x: &DMatrix<f64>, a: &DMatrix<f64>) -> IntegralSet {
    let n = x.nrows();
    let coeffs = power_coefficients(x, a, n);
    let indices = integral_indices(n);
    let values = indices.iter().map(|i| coeffs[i.k][i.m].trace()).collect();
    IntegralSet { indices, values }
}

/// Value of a single shift integral.
pub fn shift_integral(x: &DMatrix<f64>, a: &DMatrix<f64>, idx: IntegralIndex) -> f64 {
    power_coefficients(x, a, idx.k)[idx.k][idx.m].trace()
}

/// Gradient in `so(g)` with respect to the trace pairing: `k (D - D*) / 2` where
/// `D` is the coefficient of `λ^m` in `(x + λA)^{k-1}`.
pub fn integral_gradient(x: &DMatrix<f64>, a: &DMatrix<f64>, idx: IntegralIndex, g: &BilinearForm) -> DMatrix<f64> {
    let n = x.nrows();
    if idx.m > idx.k {
        return DMatrix::zeros(n, n);
    }
    let coeffs = power_coefficients(x, a, idx.k - 1);
    let d = coeffs[idx.k - 1].get(idx.m).cloned().unwrap_or_else(|| DMatrix::zeros(n, n));
    (&d - g_adjoint(&d, g)) * (0.5 * idx.k as f64)
}

/// Central-difference gradient along the wedge basis, solved through the Gram matrix.
pub fn integral_gradient_fd(
    x: &DMatrix<f64>,
    a: &DMatrix<f64>,
    idx: IntegralIndex,
    g: &BilinearForm,
    step: f64,
) -> DMatrix<f64> {
    let basis = crate::linalg::SoBasis::new(g);
    let df = DVector::from_iterator(
        basis.len(),
        basis.elements().iter().map(|e| {
            let fp = shift_integral(&(x + e * step), a, idx);
            let fm = shift_integral(&(x - e * step), a, idx);
            (fp - fm) / (2.0 * step)
        }),
    );
    let coords = basis.gram().clone().lu().solve(&df).expect("Gram matrix of so(g) is invertible");
    basis.combine(&coords)
}

/// `k C(k-1, m) |x|^{k-1-m} |A|^m`, the size of the products summed into the
/// gradient of `f_{k,m}`. Unlike `|∇f|` it does not vanish for the trivial integrals.
pub fn gradient_magnitude(x: &DMatrix<f64>, a: &DMatrix<f64>, idx: IntegralIndex) -> f64 {
    if idx.m >= idx.k {
        return 0.0;
    }
    let binom = (0..idx.m).fold(1.0, |acc, i| acc * (idx.k - 1 - i) as f64 / (i + 1) as f64);
    idx.k as f64 * binom * x.norm().powi((idx.k - 1 - idx.m) as i32) * a.norm().powi(idx.m as i32)
}

/// Lie–Poisson bracket `<x, [∇f, ∇h]>` and the scale `|x| s_f s_h`, with `s` from
/// [`gradient_magnitude`].
pub fn poisson_bracket(
    f: IntegralIndex,
    h: IntegralIndex,
    x: &DMatrix<f64>,
    a: &DMatrix<f64>,
    g: &BilinearForm,
) -> (f64, f64) {
    let gf = integral_gradient(x, a, f, g);
    let gh = integral_gradient(x, a, h, g);
    let value = trace_pairing(x, &commutator(&gf, &gh));
    (value, x.norm() * gradient_magnitude(x, a, f) * gradient_magnitude(x, a, h))
}

/// `[R(x), x] - [R(x) + λB, x + λA]`.
pub fn lax_defect(x: &DMatrix<f64>, r: &SectionalRep, a: &DMatrix<f64>, b: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let rx = r.apply(x);
    commutator(&rx, x) - commutator(&(&rx + b * lambda), &(x + a * lambda))
}

/// `||lax_defect||` divided by the size of the terms it is made of (at least 1).
pub fn lax_residual(x: &DMatrix<f64>, r: &SectionalRep, a: &DMatrix<f64>, b: &DMatrix<f64>, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let rx = r.apply(x);
    let l = lambda.abs();
    let scale = rx.norm() * x.norm()
        + l * (rx.norm() * a.norm() + b.norm() * x.norm())
        + l * l * a.norm() * b.norm();
    lax_defect(x, r, a, b, lambda).norm() / scale.max(1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct FlowConfig {
    pub h: f64,
    pub t_end: f64,
    /// Store every `sample_every`-th state (the final state is always stored).
    pub sample_every: usize,
}

impl FlowConfig {
    pub fn new(h: f64, t_end: f64) -> Self {
        Self { h, t_end, sample_every: 100 }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.h).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralDrift {
    pub index: IntegralIndex,
    pub initial: f64,
    pub max_abs_drift: f64,
    pub max_rel_drift: f64,
    /// Identically constant along every flow: `m = k`, or odd total degree in `x`
    /// for the traces that vanish on `so(g)`.
    pub trivial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowDiagnostics {
    pub steps: usize,
    pub max_skewness: f64,
    pub energy_rel_drift: f64,
    pub casimir_rel_drift: f64,
    pub integrals: Vec<IntegralDrift>,
    /// Maximum relative drift over the nontrivial shift integrals.
    pub max_integral_rel_drift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<FlowState>,
    pub final_state: FlowState,
    pub diagnostics: FlowDiagnostics,
}

impl Trajectory {
    pub fn sample_rows(&self) -> Vec<Sample> {
        self.samples.iter().map(|s| Sample { t: s.t, x: to_rows(&s.x) }).collect()
    }
}

fn rel(drift: f64, reference: f64) -> f64 {
    if drift == 0.0 {
        0.0
    } else {
        drift / reference.max(f64::MIN_POSITIVE)
    }
}

fn is_trivial(idx: IntegralIndex) -> bool {
    // tr of a product with an odd number of g-skew factors and g-symmetric rest vanishes.
    idx.m == idx.k || (idx.k - idx.m) % 2 == 1
}

/// Fixed-step RK4 from `x0`, tracking skewness, energy, Casimir and the shift
/// integrals built from `a`.
pub fn integrate(
    x0: &DMatrix<f64>,
    r: &SectionalRep,
    a: &DMatrix<f64>,
    g: &BilinearForm,
    cfg: FlowConfig,
) -> Result<Trajectory> {
    if !(cfg.h > 0.0 && cfg.h.is_finite()) || !(cfg.t_end > 0.0 && cfg.t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("step {} and horizon {} must be positive", cfg.h, cfg.t_end)));
    }
    let steps = cfg.steps();
    let every = cfg.sample_every.max(1);

    let h0 = energy(x0, r);
    let c0 = casimir(x0);
    let i0 = shift_integrals(x0, a);
    let xn = x0.norm();
    let an = a.norm();
    // Natural size of each integral: |x|^{k-m} |A|^m, floored by its initial value.
    let refs: Vec<f64> = i0
        .indices
        .iter()
        .zip(&i0.values)
        .map(|(i, v)| v.abs().max(xn.powi((i.k - i.m) as i32) * an.powi(i.m as i32)))
        .collect();
    let h_ref = h0.abs().max(0.5 * r.matrix().norm() * xn * xn);
    let c_ref = c0.abs().max(xn * xn);

    let mut x = x0.clone();
    let mut samples = vec![FlowState { x: x.clone(), t: 0.0 }];
    let mut max_skew: f64 = role_residual(&x, Role::GSkew, g);
    let mut e_drift: f64 = 0.0;
    let mut c_drift: f64 = 0.0;
    let mut i_drift = vec![0.0f64; i0.values.len()];

    let h = cfg.h;
    for step in 1..=steps {
        let k1 = euler_rhs(&x, r);
        let k2 = euler_rhs(&(&x + &k1 * (0.5 * h)), r);
        let k3 = euler_rhs(&(&x + &k2 * (0.5 * h)), r);
        let k4 = euler_rhs(&(&x + &k3 * h), r);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step });
        }
        max_skew = max_skew.max(role_residual(&x, Role::GSkew, g));
        e_drift = e_drift.max((energy(&x, r) - h0).abs());
        c_drift = c_drift.max((casimir(&x) - c0).abs());
        let iv = shift_integrals(&x, a);
        for (d, (v, v0)) in i_drift.iter_mut().zip(iv.values.iter().zip(&i0.values)) {
            *d = d.max((v - v0).abs());
        }
        if step % every == 0 || step == steps {
            samples.push(FlowState { x: x.clone(), t: step as f64 * h });
        }
    }

    let integrals: Vec<IntegralDrift> = i0
        .indices
        .iter()
        .enumerate()
        .map(|(p, &index)| IntegralDrift {
            index,
            initial: i0.values[p],
            max_abs_drift: i_drift[p],
            max_rel_drift: rel(i_drift[p], refs[p]),
            trivial: is_trivial(index),
        })
        .collect();
    let max_integral_rel_drift = integrals.iter().filter(|d| !d.trivial).map(|d| d.max_rel_drift).fold(0.0, f64::max);
    let final_state = FlowState { x, t: steps as f64 * h };
    Ok(Trajectory {
        samples,
        final_state,
        diagnostics: FlowDiagnostics {
            steps,
            max_skewness: max_skew,
            energy_rel_drift: rel(e_drift, h_ref),
            casimir_rel_drift: rel(c_drift, c_ref),
            integrals,
            max_integral_rel_drift,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{unit, wedge};
    use crate::poly::MatrixPolynomial;
    use crate::sectional::build_rep;

    fn rigid_body() -> (BilinearForm, DMatrix<f64>, SectionalRep, DMatrix<f64>) {
        let g = BilinearForm::identity(3);
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let r = build_rep(&a, &MatrixPolynomial::monomial(2), &g).unwrap();
        let x = wedge(&unit(3, 0), &unit(3, 1), &g) + wedge(&unit(3, 1), &unit(3, 2), &g);
        (g, a, r, x)
    }

    #[test]
    fn rhs_examples() {
        let (g, _, r, x) = rigid_body();
        assert_eq!(euler_rhs(&DMatrix::zeros(3, 3), &r), DMatrix::zeros(3, 3));
        let e12 = wedge(&unit(3, 0), &unit(3, 1), &g);
        let e23 = wedge(&unit(3, 1), &unit(3, 2), &g);
        let expect = commutator(&(e12 * 3.0 + e23 * 5.0), &x);
        let got = euler_rhs(&x, &r);
        assert!(got.norm() > 0.1);
        assert!((got - expect).norm() < 1e-14);
        // e1∧e3 is an eigenvector with eigenvalue 4.
        let e13 = wedge(&unit(3, 0), &unit(3, 2), &g);
        assert_eq!(euler_rhs(&e13, &r), DMatrix::zeros(3, 3));
    }

    #[test]
    fn integrals_examples() {
        let (_, a, _, x) = rigid_body();
        let s = shift_integrals(&x, &a);
        assert!(s.get(2, 1).unwrap().abs() < 1e-15);
        assert_eq!(s.get(2, 2).unwrap(), 14.0);
        assert_eq!(s.get(2, 0).unwrap(), -4.0);
        assert_eq!(s.indices.len(), 3 + 4);
    }

    #[test]
    fn zero_and_scalar_flows_are_constant() {
        let (g, a, r, x) = rigid_body();
        let t = integrate(&DMatrix::zeros(3, 3), &r, &a, &g, FlowConfig::new(1e-2, 1.0)).unwrap();
        assert_eq!(t.final_state.x, DMatrix::zeros(3, 3));
        assert_eq!(t.diagnostics.max_integral_rel_drift, 0.0);
        assert_eq!(t.diagnostics.energy_rel_drift, 0.0);

        let mut id = SectionalRep::identity(&g);
        id = SectionalRep::from_matrix(id.matrix() * 2.5, &g).unwrap();
        let t = integrate(&x, &id, &a, &g, FlowConfig::new(1e-2, 1.0)).unwrap();
        assert_eq!(t.final_state.x, x);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = crate::random::rng(7);
        let g = BilinearForm::diagonal(&[1.0, -1.0, 1.0, 1.0]).unwrap();
        let a = crate::random::g_symmetric(&mut rng, &g);
        let x = crate::random::g_skew(&mut rng, &g);
        for idx in integral_indices(4) {
            let exact = integral_gradient(&x, &a, idx, &g);
            let fd = integral_gradient_fd(&x, &a, idx, &g, 1e-5);
            assert!((&exact - &fd).norm() <= 1e-6 * (1.0 + exact.norm()), "{idx:?}");
        }
    }

    #[test]
    fn brackets_vanish() {
        let (g, a, _, x) = rigid_body();
        let c = IntegralIndex { k: 2, m: 0 };
        for idx in integral_indices(3) {
            assert_eq!(poisson_bracket(idx, idx, &x, &a, &g).0, 0.0);
            let (v, scale) = poisson_bracket(idx, c, &x, &a, &g);
            assert!(v.abs() <= 1e-13 * scale.max(1.0));
        }
    }

    #[test]
    fn lax_examples() {
        let (g, a, r, x) = rigid_body();
        let b = &a * &a;
        assert_eq!(lax_residual(&x, &r, &a, &b, 0.0), 0.0);
        for lambda in [-1.0, 0.5, 2.0] {
            assert!(lax_residual(&x, &r, &a, &b, lambda) <= 1e-11);
        }
        let id = SectionalRep::identity(&g);
        let zero = DMatrix::zeros(3, 3);
        let defect = lax_defect(&x, &id, &a, &zero, 1.0);
        let expect = commutator(&x, &a).norm();
        assert!(expect > 0.0);
        assert!((defect.norm() - expect).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_steps() {
        let (g, a, r, x) = rigid_body();
        assert!(integrate(&x, &r, &a, &g, FlowConfig::new(0.0, 1.0)).is_err());
        assert!(integrate(&x, &r, &a, &g, FlowConfig::new(1e-3, -1.0)).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let g = BilinearForm::identity(3);
        let r = SectionalRep::from_matrix(DMatrix::from_row_slice(3, 3, &[0.0, 1e200, 0.0, 0.0, 0.0, 1e200, 1e200, 0.0, 0.0]), &g)
            .unwrap();
        let (_, a, _, x) = rigid_body();
        let err = integrate(&(x * 1e100), &r, &a, &g, FlowConfig::new(1.0, 10.0)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }
}
