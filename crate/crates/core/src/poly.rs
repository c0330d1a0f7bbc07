//! Real polynomials, their action on matrices, and numerically computed minimal
//! polynomials.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lstsq, vec_of};

/// Relative Krylov residual below which a power of `A` counts as dependent.
pub const KRYLOV_TOL: f64 = 1e-10;
/// Residuals in `[KRYLOV_TOL, KRYLOV_AMBIGUOUS)` are treated as unresolvable clustering.
pub const KRYLOV_AMBIGUOUS: f64 = 1e-6;

/// `p(t) = a_0 + a_1 t + ... + a_d t^d`, stored with trailing zeros trimmed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct MatrixPolynomial {
    coeffs: Vec<f64>,
}

impl From<Vec<f64>> for MatrixPolynomial {
    fn from(v: Vec<f64>) -> Self {
        Self::new(v)
    }
}

impl From<MatrixPolynomial> for Vec<f64> {
    fn from(p: MatrixPolynomial) -> Self {
        p.coeffs
    }
}

impl MatrixPolynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// `t^k`.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Self { coeffs: c }
    }

    /// `prod (t - root_i)^{mult_i}`.
    pub fn from_roots(roots: &[(f64, usize)]) -> Self {
        let mut p = Self::constant(1.0);
        for &(r, k) in roots {
            for _ in 0..k {
                p = p.mul(&Self::new(vec![-r, 1.0]));
            }
        }
        p
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// Horner evaluation `p(A)`.
    pub fn eval_matrix(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut acc = DMatrix::zeros(n, n);
        for &c in self.coeffs.iter().rev() {
            acc = &acc * a;
            for i in 0..n {
                acc[(i, i)] += c;
            }
        }
        acc
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..len)
                .map(|k| self.coeffs.get(k).unwrap_or(&0.0) + other.coeffs.get(k).unwrap_or(&0.0))
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `t -> p(scale * t + shift)`.
    pub fn compose_affine(&self, scale: f64, shift: f64) -> Self {
        let lin = Self::new(vec![shift, scale]);
        self.coeffs
            .iter()
            .rev()
            .fold(Self::zero(), |acc, &c| acc.mul(&lin).add(&Self::constant(c)))
    }

    /// Divided difference `(p(a) - p(b)) / (a - b)`, or `p'(a)` when `a == b`.
    pub fn divided_difference(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return self.derivative().eval(a);
        }
        // sum_m c_m (a^m - b^m)/(a - b) = sum_m c_m sum_{j<m} a^{m-1-j} b^j
        let mut acc = 0.0;
        for (m, &c) in self.coeffs.iter().enumerate().skip(1) {
            let mut s = 0.0;
            for j in 0..m {
                s += a.powi((m - 1 - j) as i32) * b.powi(j as i32);
            }
            acc += c * s;
        }
        acc
    }
}

/// Monic minimal polynomial of `a`, found as the first power of a shifted and
/// scaled copy of `a` that falls into the span of the lower powers.
///
/// Fails with [`Error::IllConditioned`] when a Krylov residual lands between
/// `rel_tol` and [`KRYLOV_AMBIGUOUS`], which is where clustered eigenvalues make
/// the degree undecidable.
pub fn minimal_polynomial(a: &DMatrix<f64>, rel_tol: f64) -> Result<MatrixPolynomial> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(MatrixPolynomial::constant(1.0));
    }
    let shift = a.trace() / n as f64;
    let centered = a - DMatrix::identity(n, n) * shift;
    let scale = centered.norm();
    if scale <= f64::EPSILON * a.norm().max(1.0) {
        return Ok(MatrixPolynomial::new(vec![-shift, 1.0]));
    }
    let scaled = centered / scale;

    let mut powers: Vec<DVector<f64>> = vec![vec_of(&DMatrix::identity(n, n))];
    let mut current = DMatrix::identity(n, n);
    for k in 1..=n {
        current = &scaled * &current;
        let target = vec_of(&current);
        let basis = DMatrix::from_columns(&powers);
        let x = lstsq(&basis, &target, 1e-14);
        let resid = (&basis * &x - &target).norm() / target.norm().max(f64::MIN_POSITIVE);
        if resid <= rel_tol || target.norm() <= rel_tol {
            let mut q: Vec<f64> = x.iter().map(|c| -c).collect();
            q.push(1.0);
            let q = MatrixPolynomial::new(q);
            // p(t) = scale^k q((t - shift)/scale)
            let p = q
                .compose_affine(1.0 / scale, -shift / scale)
                .scale(scale.powi(k as i32));
            return Ok(p);
        }
        if resid < KRYLOV_AMBIGUOUS {
            return Err(Error::IllConditioned { residual: resid, low: rel_tol, high: KRYLOV_AMBIGUOUS });
        }
        powers.push(target);
    }
    Err(Error::IllConditioned { residual: f64::NAN, low: rel_tol, high: KRYLOV_AMBIGUOUS })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_and_derivative() {
        let p = MatrixPolynomial::new(vec![1.0, -2.0, 3.0]);
        assert_eq!(p.eval(2.0), 9.0);
        assert_eq!(p.derivative(), MatrixPolynomial::new(vec![-2.0, 6.0]));
        assert_eq!(MatrixPolynomial::new(vec![1.0, 0.0, 0.0]).degree(), Some(0));
        assert_eq!(MatrixPolynomial::zero().degree(), None);
    }

    #[test]
    fn matrix_evaluation_matches_powers() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let p = MatrixPolynomial::new(vec![1.0, 1.0, 1.0]);
        let expect = DMatrix::identity(2, 2) + &a + &a * &a;
        assert!((p.eval_matrix(&a) - expect).norm() < 1e-14);
    }

    #[test]
    fn compose_affine_matches_direct_evaluation() {
        let p = MatrixPolynomial::new(vec![0.5, -1.0, 2.0, 0.25]);
        let q = p.compose_affine(3.0, -0.5);
        for t in [-1.0, 0.0, 0.7, 2.0] {
            assert!((q.eval(t) - p.eval(3.0 * t - 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn divided_differences() {
        let p = MatrixPolynomial::monomial(2);
        assert_eq!(p.divided_difference(1.0, 2.0), 3.0);
        assert_eq!(p.divided_difference(1.5, 1.5), 3.0);
    }

    #[test]
    fn minimal_polynomial_examples() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert_eq!(minimal_polynomial(&id, KRYLOV_TOL).unwrap(), MatrixPolynomial::new(vec![-1.0, 1.0]));

        let lam = 2.5;
        let j = DMatrix::from_row_slice(2, 2, &[lam, 1.0, 0.0, lam]);
        let p = minimal_polynomial(&j, KRYLOV_TOL).unwrap();
        let expect = MatrixPolynomial::from_roots(&[(lam, 2)]);
        assert_eq!(p.degree(), Some(2));
        for (a, b) in p.coeffs().iter().zip(expect.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 2.0]));
        let p = minimal_polynomial(&d, KRYLOV_TOL).unwrap();
        assert_eq!(p.degree(), Some(2));
        assert!((p.eval(1.0)).abs() < 1e-12 && (p.eval(2.0)).abs() < 1e-12);
    }

    #[test]
    fn clustered_eigenvalues_fail_loudly() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0 + 1e-9, 2.0]));
        assert!(matches!(minimal_polynomial(&d, KRYLOV_TOL), Err(Error::IllConditioned { .. })));
    }
}
