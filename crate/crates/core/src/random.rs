//! Seeded generators for reproducible test data. Entries are uniform in `[-1, 1]`
//! and then symmetrized or skewed with respect to `g` as needed.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::jordan::{JordanBlock, JordanSpec};
use crate::linalg::{g_adjoint, BilinearForm};
use crate::poly::MatrixPolynomial;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut SeededRng) -> f64 {
    rng.random_range(-1.0..=1.0)
}

pub fn vector(rng: &mut SeededRng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| uniform(rng))
}

pub fn matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| uniform(rng))
}

pub fn g_symmetric(rng: &mut SeededRng, g: &BilinearForm) -> DMatrix<f64> {
    let m = matrix(rng, g.dim(), g.dim());
    (&m + g_adjoint(&m, g)) * 0.5
}

pub fn g_skew(rng: &mut SeededRng, g: &BilinearForm) -> DMatrix<f64> {
    let m = matrix(rng, g.dim(), g.dim());
    (&m - g_adjoint(&m, g)) * 0.5
}

/// Polynomial of exact degree `degree` with coefficients in `[-1, 1]`.
pub fn polynomial(rng: &mut SeededRng, degree: usize) -> MatrixPolynomial {
    let mut c: Vec<f64> = (0..=degree).map(|_| uniform(rng)).collect();
    if c[degree].abs() < 0.1 {
        c[degree] = if c[degree] < 0.0 { -0.5 } else { 0.5 };
    }
    MatrixPolynomial::new(c)
}

/// Random diagonal form with entries `±(0.5..1.5)`, at least one of each sign when `n >= 2`.
pub fn indefinite_form(rng: &mut SeededRng, n: usize) -> BilinearForm {
    let entries: Vec<f64> = (0..n)
        .map(|i| {
            let mag = 0.5 + rng.random_range(0.0..1.0);
            let sign = if n >= 2 && i == 0 {
                1.0
            } else if n >= 2 && i == 1 {
                -1.0
            } else if rng.random_bool(0.5) {
                1.0
            } else {
                -1.0
            };
            sign * mag
        })
        .collect();
    BilinearForm::diagonal(&entries).expect("nonzero diagonal")
}

/// Random Jordan specification of total dimension in `2..=max_dim`, eigenvalues
/// drawn from the grid `{-1.5, -1, ..., 1.5}` so that distinct eigenvalues stay
/// well separated.
pub fn jordan_spec(rng: &mut SeededRng, max_dim: usize) -> JordanSpec {
    let n = rng.random_range(2..=max_dim.max(2));
    let grid = [-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5];
    let mut blocks = Vec::new();
    let mut left = n;
    while left > 0 {
        let size = rng.random_range(1..=left.min(3));
        let lambda = grid[rng.random_range(0..grid.len())];
        let sign = if rng.random_bool(0.5) { 1 } else { -1 };
        blocks.push(JordanBlock::new(lambda, size).with_sign(sign));
        left -= size;
    }
    JordanSpec::new(blocks)
}
