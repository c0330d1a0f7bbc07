//! Dense matrix algebra relative to a nondegenerate symmetric bilinear form `g`.
//!
//! Every matrix here is an endomorphism of `V = R^n` written in a fixed basis.
//! The form `g` enters through the `g`-adjoint `M* = g^-1 M^T g`, which splits
//! `gl(V)` into `Sym(g)` (`M* = M`) and `so(g)` (`M* = -M`).

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for role checks on operators.
pub const ROLE_TOL: f64 = 1e-10;
/// Default threshold on `|det g|` below which a form is rejected.
pub const DET_TOL: f64 = 1e-12;
/// Default relative singular-value cutoff for ranks and null spaces.
pub const RANK_TOL: f64 = 1e-10;

/// A nondegenerate symmetric bilinear form of signature `(p, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearForm {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    signature: (usize, usize),
}

impl BilinearForm {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(matrix, DET_TOL)
    }

    pub fn with_tolerance(matrix: DMatrix<f64>, det_tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        if matrix.nrows() == 0 {
            return Err(Error::InvalidArgument("bilinear form of dimension 0".into()));
        }
        let asym = (&matrix - matrix.transpose()).norm();
        if asym > 1e-12 * (1.0 + matrix.norm()) {
            return Err(Error::FormNotSymmetric { residual: asym });
        }
        let det = matrix.determinant();
        if !det.is_finite() || det.abs() <= det_tol {
            return Err(Error::SingularForm { det });
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or(Error::SingularForm { det })?;
        let eig = SymmetricEigen::new(matrix.clone());
        let p = eig.eigenvalues.iter().filter(|&&v| v > 0.0).count();
        let q = eig.eigenvalues.iter().filter(|&&v| v < 0.0).count();
        Ok(Self { matrix, inverse, signature: (p, q) })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is a valid form")
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// Number of positive and negative eigenvalues of the Gram matrix.
    pub fn signature(&self) -> (usize, usize) {
        self.signature
    }

    /// `g(u, v) = u^T g v`.
    pub fn apply(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.matrix * v))
    }
}

/// Algebraic role of an operator with respect to `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    GSymmetric,
    GSkew,
    General,
}

impl Role {
    fn name(self) -> &'static str {
        match self {
            Role::GSymmetric => "g-symmetric",
            Role::GSkew => "g-skew",
            Role::General => "general",
        }
    }
}

/// A square matrix tagged with its role relative to a bilinear form.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOperator {
    entries: DMatrix<f64>,
    role: Role,
}

impl MatrixOperator {
    /// Validates `entries` against `role` at the default tolerance.
    pub fn new(entries: DMatrix<f64>, role: Role, g: &BilinearForm) -> Result<Self> {
        check_role(&entries, role, g, ROLE_TOL)?;
        Ok(Self { entries, role })
    }

    pub fn general(entries: DMatrix<f64>) -> Self {
        Self { entries, role: Role::General }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }
}

/// Residual of the role invariant: `||gM - M^T g||` or `||gM + M^T g||`.
pub fn role_residual(m: &DMatrix<f64>, role: Role, g: &BilinearForm) -> f64 {
    let gm = g.matrix() * m;
    let mtg = m.transpose() * g.matrix();
    match role {
        Role::GSymmetric => (gm - mtg).norm(),
        Role::GSkew => (gm + mtg).norm(),
        Role::General => 0.0,
    }
}

/// Checks `m` against `role` with tolerance relative to `||g|| ||M||`.
pub fn check_role(m: &DMatrix<f64>, role: Role, g: &BilinearForm, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.nrows() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), found: m.nrows() });
    }
    let residual = role_residual(m, role, g);
    if residual > tol * g.matrix().norm() * m.norm().max(1.0) {
        return Err(Error::RoleMismatch { expected: role.name(), residual });
    }
    Ok(())
}

/// The `g`-adjoint `M* = g^-1 M^T g`, characterized by `g(M* u, v) = g(u, M v)`.
pub fn g_adjoint(m: &DMatrix<f64>, g: &BilinearForm) -> DMatrix<f64> {
    g.inverse() * m.transpose() * g.matrix()
}

/// `v ∧ u = v (g u)^T - u (g v)^T`, an element of `so(g)`.
pub fn wedge(v: &DVector<f64>, u: &DVector<f64>, g: &BilinearForm) -> DMatrix<f64> {
    let gu = g.matrix() * u;
    let gv = g.matrix() * v;
    v * gu.transpose() - u * gv.transpose()
}

/// The invariant pairing `<X, Y> = tr(XY)`.
pub fn trace_pairing(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    // tr(XY) = sum_ij X_ij Y_ji, without forming the product.
    let n = x.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..x.ncols() {
            acc += x[(i, j)] * y[(j, i)];
        }
    }
    acc
}

/// `[X, Y] = XY - YX`.
pub fn commutator(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    x * y - y * x
}

/// Lexicographic basis `e_i ∧ e_j` (`i < j`) of `so(g)` with its Gram matrix
/// under the trace pairing.
#[derive(Debug, Clone)]
pub struct SoBasis {
    n: usize,
    pairs: Vec<(usize, usize)>,
    elements: Vec<DMatrix<f64>>,
    gram: DMatrix<f64>,
    g_inv: DMatrix<f64>,
}

impl SoBasis {
    pub fn new(g: &BilinearForm) -> Self {
        let n = g.dim();
        let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        let mut elements = Vec::with_capacity(pairs.capacity());
        for i in 0..n {
            for j in (i + 1)..n {
                let ei = unit(n, i);
                let ej = unit(n, j);
                pairs.push((i, j));
                elements.push(wedge(&ei, &ej, g));
            }
        }
        let dim = elements.len();
        let gram = DMatrix::from_fn(dim, dim, |k, l| trace_pairing(&elements[k], &elements[l]));
        Self { n, pairs, elements, gram, g_inv: g.inverse().clone() }
    }

    /// Dimension `n` of the underlying vector space.
    pub fn n(&self) -> usize {
        self.n
    }

    /// `n(n-1)/2`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[DMatrix<f64>] {
        &self.elements
    }

    pub fn element(&self, k: usize) -> &DMatrix<f64> {
        &self.elements[k]
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        self.pairs.iter().position(|&p| p == (i, j))
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Coordinates of a `g`-skew matrix. Since `e_i ∧ e_j = (e_i e_j^T - e_j e_i^T) g`,
    /// the coordinate on `(i, j)` is `(X g^-1)_ij`.
    pub fn coordinates(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let y = x * &self.g_inv;
        DVector::from_iterator(self.pairs.len(), self.pairs.iter().map(|&(i, j)| {
            // Average the two antisymmetric entries; exact for skew input.
            0.5 * (y[(i, j)] - y[(j, i)])
        }))
    }

    pub fn combine(&self, coords: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for (c, e) in coords.iter().zip(&self.elements) {
            if *c != 0.0 {
                out += e * *c;
            }
        }
        out
    }

    /// Columns are the vectorized basis elements (`n^2 x N`).
    pub fn stacked(&self) -> DMatrix<f64> {
        let nn = self.n * self.n;
        DMatrix::from_fn(nn, self.len(), |r, k| self.elements[k].as_slice()[r])
    }
}

pub fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

fn singular_values_and_v(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    // Pad to at least as many rows as columns so that V is complete.
    let padded;
    let work = if m.nrows() < m.ncols() {
        padded = {
            let mut p = DMatrix::zeros(m.ncols(), m.ncols());
            p.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
            p
        };
        &padded
    } else {
        m
    };
    let svd = SVD::new(work.clone(), false, true);
    let v = svd.v_t.expect("requested V^T").transpose();
    (svd.singular_values.iter().copied().collect(), v)
}

/// Orthonormal basis (as columns) of the null space of `m`, using a singular-value
/// cutoff of `rel_tol * sigma_max`.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let (sv, v) = singular_values_and_v(m);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let cutoff = rel_tol * smax;
    let null_idx: Vec<usize> = (0..cols)
        .filter(|&k| sv.get(k).is_none_or(|&s| smax == 0.0 || s <= cutoff))
        .collect();
    DMatrix::from_fn(cols, null_idx.len(), |r, c| v[(r, null_idx[c])])
}

/// Numerical rank with relative cutoff.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Minimum-norm least-squares solution of `m x = b` with relative cutoff.
pub fn lstsq(m: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    if m.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = SVD::new(m.clone(), true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return DVector::zeros(m.ncols());
    }
    svd.solve(b, rel_tol * smax).expect("U and V were computed")
}

/// Smallest singular value.
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let s = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if m.nrows() < m.ncols() {
        0.0
    } else {
        s
    }
}

/// Vectorize (column-major) a matrix.
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Row-major nested arrays, the interchange layout for matrices.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|row| row.len() != c) {
        return Err(Error::DimensionMismatch { expected: c, found: bad.len() });
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}
