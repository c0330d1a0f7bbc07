//! Sectional operators `R: so(g) -> so(g)` with `[R(X), A] = [X, B]`.
//!
//! The canonical solution for `B = p(A)` is the derivative
//! `R0(X) = d/dt p(A + tX)|_{t=0}`. Everything else in this module either
//! verifies the defining identity and its consequences or describes the space
//! of all solutions as an affine subspace of operators on `so(g)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jordan::RealizedJordan;
use crate::linalg::{
    check_role, commutator, lstsq, null_space, rank, sigma_min, to_rows, vec_of, BilinearForm, Role,
    SoBasis, RANK_TOL, ROLE_TOL,
};
use crate::poly::{minimal_polynomial, MatrixPolynomial, KRYLOV_TOL};
use crate::random;

/// Relative residual above which a linear system is declared inconsistent.
pub const CONSISTENCY_TOL: f64 = 1e-8;
/// Relative tolerance for `[A, B] = 0` and `p(A) = B`.
pub const COMMUTE_TOL: f64 = 1e-10;
pub const POLY_FIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub enum Provenance {
    /// Built as `R0` from `A` and `p`, with `B = p(A)`.
    Polynomial { a: DMatrix<f64>, b: DMatrix<f64>, p: MatrixPolynomial },
    UserSupplied,
}

/// A linear operator on `so(g)` written in the lexicographic wedge basis.
/// Column `k` holds the coordinates of the image of basis element `k`.
#[derive(Debug, Clone)]
pub struct SectionalRep {
    matrix: DMatrix<f64>,
    basis: SoBasis,
    provenance: Provenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct SectionalRepJson {
    pub n: usize,
    pub basis: &'static str,
    pub matrix: Vec<Vec<f64>>,
}

impl SectionalRep {
    pub fn from_matrix(matrix: DMatrix<f64>, g: &BilinearForm) -> Result<Self> {
        let basis = SoBasis::new(g);
        if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), found: matrix.nrows() });
        }
        Ok(Self { matrix, basis, provenance: Provenance::UserSupplied })
    }

    /// Builds the operator from its action on `so(g)`.
    pub fn from_action(g: &BilinearForm, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        let basis = SoBasis::new(g);
        let dim = basis.len();
        let mut matrix = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let image = f(basis.element(k));
            matrix.set_column(k, &basis.coordinates(&image));
        }
        Self { matrix, basis, provenance: Provenance::UserSupplied }
    }

    pub fn identity(g: &BilinearForm) -> Self {
        let basis = SoBasis::new(g);
        let dim = basis.len();
        Self { matrix: DMatrix::identity(dim, dim), basis, provenance: Provenance::UserSupplied }
    }

    pub fn zero(g: &BilinearForm) -> Self {
        let basis = SoBasis::new(g);
        let dim = basis.len();
        Self { matrix: DMatrix::zeros(dim, dim), basis, provenance: Provenance::UserSupplied }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn basis(&self) -> &SoBasis {
        &self.basis
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.basis.combine(&(&self.matrix * self.basis.coordinates(x)))
    }

    /// `||G R - R^T G||`: zero iff `<R X, Y> = <X, R Y>`.
    pub fn symmetry_residual(&self) -> f64 {
        let g = self.basis.gram();
        (g * &self.matrix - self.matrix.transpose() * g).norm()
    }

    pub fn to_json(&self) -> SectionalRepJson {
        SectionalRepJson { n: self.n(), basis: "lex-wedge", matrix: to_rows(&self.matrix) }
    }
}

/// `sum_m a_m sum_{j<m} A^{m-1-j} X A^j` for any square `X`.
pub fn r0_action(a: &DMatrix<f64>, p: &MatrixPolynomial, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    // S_1 = X, S_m = A S_{m-1} + X A^{m-1}
    let mut s = x.clone();
    let mut a_pow = DMatrix::identity(n, n);
    for (m, &c) in p.coeffs().iter().enumerate().skip(1) {
        if m > 1 {
            a_pow = &a_pow * a;
            s = a * &s + x * &a_pow;
        }
        if c != 0.0 {
            out += &s * c;
        }
    }
    out
}

/// `R0(X) = d/dt p(A + tX)` at `t = 0`, with role checks on `A` and `X`.
pub fn apply_r0(a: &DMatrix<f64>, p: &MatrixPolynomial, x: &DMatrix<f64>, g: &BilinearForm) -> Result<DMatrix<f64>> {
    check_role(a, Role::GSymmetric, g, ROLE_TOL)?;
    check_role(x, Role::GSkew, g, ROLE_TOL)?;
    Ok(r0_action(a, p, x))
}

/// Matrix of `R0` on the lexicographic wedge basis.
pub fn build_rep(a: &DMatrix<f64>, p: &MatrixPolynomial, g: &BilinearForm) -> Result<SectionalRep> {
    check_role(a, Role::GSymmetric, g, ROLE_TOL)?;
    let mut rep = SectionalRep::from_action(g, |x| r0_action(a, p, x));
    rep.provenance = Provenance::Polynomial { a: a.clone(), b: p.eval_matrix(a), p: p.clone() };
    Ok(rep)
}

/// `max_X ||[R(X), A] - [X, B]|| / (1 + ||A|| + ||B||)` over the basis.
pub fn sectional_residual(r: &SectionalRep, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = 1.0 + a.norm() + b.norm();
    r.basis
        .elements()
        .iter()
        .map(|x| (commutator(&r.apply(x), a) - commutator(x, b)).norm() / scale)
        .fold(0.0, f64::max)
}

/// Cyclic sum `R(u∧v)w + R(v∧w)u + R(w∧u)v`.
pub fn bianchi_sum(r: &SectionalRep, g: &BilinearForm, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    use crate::linalg::wedge;
    r.apply(&wedge(u, v, g)) * w + r.apply(&wedge(v, w, g)) * u + r.apply(&wedge(w, u, g)) * v
}

/// Maximum of `||cyclic sum|| / (|u||v||w|)` over all coordinate triples and
/// `samples` seeded random triples.
pub fn bianchi_residual(r: &SectionalRep, g: &BilinearForm, samples: usize, seed: u64) -> f64 {
    use crate::linalg::unit;
    let n = g.dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let s = bianchi_sum(r, g, &unit(n, i), &unit(n, j), &unit(n, k));
                worst = worst.max(s.norm());
            }
        }
    }
    let mut rng = random::rng(seed);
    for _ in 0..samples {
        let u = random::vector(&mut rng, n);
        let v = random::vector(&mut rng, n);
        let w = random::vector(&mut rng, n);
        let denom = u.norm() * v.norm() * w.norm();
        if denom > 0.0 {
            worst = worst.max(bianchi_sum(r, g, &u, &v, &w).norm() / denom);
        }
    }
    worst
}

/// Basis of `g_A = { Y in so(g) : [Y, A] = 0 }`.
#[derive(Debug, Clone)]
pub struct CentralizerBasis {
    /// Orthonormal coordinate vectors (columns) in the wedge basis.
    pub coords: DMatrix<f64>,
    pub elements: Vec<DMatrix<f64>>,
}

impl CentralizerBasis {
    pub fn dim(&self) -> usize {
        self.elements.len()
    }
}

/// Columns: `vec([E_k, A])` for each wedge basis element.
fn commutator_map(basis: &SoBasis, a: &DMatrix<f64>) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = basis.elements().iter().map(|e| vec_of(&commutator(e, a))).collect();
    if cols.is_empty() {
        return DMatrix::zeros(a.len(), 0);
    }
    DMatrix::from_columns(&cols)
}

pub fn centralizer(a: &DMatrix<f64>, g: &BilinearForm) -> Result<CentralizerBasis> {
    check_role(a, Role::GSymmetric, g, ROLE_TOL)?;
    let basis = SoBasis::new(g);
    let map = commutator_map(&basis, a);
    let coords = if basis.is_empty() { DMatrix::zeros(0, 0) } else { null_space(&map, RANK_TOL) };
    let elements = coords.column_iter().map(|c| basis.combine(&c.into_owned())).collect();
    Ok(CentralizerBasis { coords, elements })
}

/// Dimension of the centralizer of `a` in `gl(n)`; `a` is regular iff this equals `n`.
pub fn gl_centralizer_dim(a: &DMatrix<f64>) -> usize {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    // vec(YA - AY) = (A^T ⊗ I - I ⊗ A) vec(Y)
    let op = a.transpose().kronecker(&id) - id.kronecker(a);
    null_space(&op, RANK_TOL).ncols()
}

pub fn is_regular(a: &DMatrix<f64>) -> bool {
    gl_centralizer_dim(a) == a.nrows()
}

/// Least-degree `p` with `p(A) = B`, with its relative residual `||p(A) - B|| / (1 + ||B||)`.
///
/// Degrees are tried in increasing order up to `deg p_min - 1`; within a degree the
/// minimum-norm least-squares coefficients are taken.
pub fn express_polynomial(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(MatrixPolynomial, f64)> {
    let comm = commutator(a, b).norm() / (1.0 + a.norm() * b.norm());
    if comm > COMMUTE_TOL {
        return Err(Error::NotCommuting { residual: comm });
    }
    let n = a.nrows();
    let pmin = minimal_polynomial(a, KRYLOV_TOL)?;
    let d = pmin.degree().unwrap_or(0).max(1);

    // Work in s = (t - c)/σ for conditioning, then map back to t.
    let shift = a.trace() / n as f64;
    let centered = a - DMatrix::identity(n, n) * shift;
    let sigma = centered.norm().max(f64::MIN_POSITIVE);
    let scaled = &centered / sigma;
    let mut powers = vec![vec_of(&DMatrix::identity(n, n))];
    let mut cur = DMatrix::identity(n, n);
    for _ in 1..d {
        cur = &scaled * &cur;
        powers.push(vec_of(&cur));
    }
    let target = vec_of(b);
    let mut best = (MatrixPolynomial::zero(), f64::INFINITY);
    for deg in 0..d {
        let basis = DMatrix::from_columns(&powers[..=deg]);
        let x = lstsq(&basis, &target, 1e-13);
        let q = MatrixPolynomial::new(x.iter().copied().collect());
        let p = q.compose_affine(1.0 / sigma, -shift / sigma);
        let resid = (p.eval_matrix(a) - b).norm() / (1.0 + b.norm());
        if resid <= POLY_FIT_TOL {
            // Drop coefficients that are pure round-off so B = 0 gives the zero polynomial.
            let cleaned = MatrixPolynomial::new(
                p.coeffs().iter().map(|&c| if c.abs() <= 1e-14 * (1.0 + b.norm()) { 0.0 } else { c }).collect(),
            );
            let resid = (cleaned.eval_matrix(a) - b).norm() / (1.0 + b.norm());
            return Ok((cleaned, resid));
        }
        if resid < best.1 {
            best = (p, resid);
        }
    }
    Err(Error::NotPolynomial { residual: best.1 })
}

/// Linear system for an operator `R` on `so(g)` (unknown `vec(R)`, column-major):
/// symmetry under the trace pairing plus `[R(E_k), A] = k_scale [E_k, B]` per pair.
struct OperatorSystem {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    unknowns: usize,
}

impl OperatorSystem {
    fn new(basis: &SoBasis, extra_unknowns: usize) -> Self {
        let dim = basis.len();
        let unknowns = dim * dim + extra_unknowns;
        let gram = basis.gram();
        let scale = gram.amax().max(f64::MIN_POSITIVE);
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        // (G R - R^T G)_{ij} = 0 for i < j
        for i in 0..dim {
            for j in (i + 1)..dim {
                let mut row = vec![0.0; unknowns];
                for l in 0..dim {
                    row[j * dim + l] += gram[(i, l)] / scale;
                    row[i * dim + l] -= gram[(l, j)] / scale;
                }
                rows.push(row);
                rhs.push(0.0);
            }
        }
        Self { rows, rhs, unknowns }
    }

    /// Adds `sum_l R_lk [E_l, A] = [E_k, B]` for every `k`. When `scalar_column` is
    /// given, the right-hand side is multiplied by that unknown instead.
    fn add_identity(&mut self, basis: &SoBasis, a: &DMatrix<f64>, b: &DMatrix<f64>, scalar_column: Option<usize>) {
        let dim = basis.len();
        let ca = commutator_map(basis, a);
        let cb = commutator_map(basis, b);
        let scale = ca.amax().max(cb.amax()).max(f64::MIN_POSITIVE);
        for k in 0..dim {
            for r in 0..ca.nrows() {
                let mut row = vec![0.0; self.unknowns];
                let mut any = false;
                for l in 0..dim {
                    let v = ca[(r, l)] / scale;
                    if v != 0.0 {
                        row[k * dim + l] = v;
                        any = true;
                    }
                }
                let target = cb[(r, k)] / scale;
                match scalar_column {
                    Some(col) => {
                        row[col] = -target;
                        any |= target != 0.0;
                        if any {
                            self.rows.push(row);
                            self.rhs.push(0.0);
                        }
                    }
                    None => {
                        if any || target != 0.0 {
                            self.rows.push(row);
                            self.rhs.push(target);
                        }
                    }
                }
            }
        }
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), self.unknowns, |r, c| self.rows[r][c])
    }

    /// Particular least-squares solution, relative residual and null-space dimension.
    fn solve(&self) -> (DVector<f64>, f64, usize) {
        let m = self.matrix();
        let rhs = DVector::from_column_slice(&self.rhs);
        let x = lstsq(&m, &rhs, RANK_TOL);
        let resid = (&m * &x - &rhs).norm() / rhs.norm().max(1.0);
        let null_dim = null_space(&m, RANK_TOL).ncols();
        (x, resid, null_dim)
    }
}

fn unvec_operator(x: &DVector<f64>, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |l, k| x[k * dim + l])
}

#[derive(Debug, Clone)]
pub struct SolutionSpace {
    pub polynomial: MatrixPolynomial,
    pub particular: SectionalRep,
    /// Dimension of trace-symmetric operators on `so(g)` with image in `g_A`.
    pub freedom_dimension: usize,
}

/// All sectional operators for `(A, B)`: `R0` plus symmetric operators into `g_A`.
pub fn solution_space(a: &DMatrix<f64>, b: &DMatrix<f64>, g: &BilinearForm) -> Result<SolutionSpace> {
    check_role(a, Role::GSymmetric, g, ROLE_TOL)?;
    check_role(b, Role::GSymmetric, g, ROLE_TOL)?;
    let (polynomial, _) = express_polynomial(a, b).map_err(|e| match e {
        Error::NotCommuting { .. } | Error::NotPolynomial { .. } => {
            Error::NotSectionalCompatible(format!("B is not a polynomial in A: {e}"))
        }
        other => other,
    })?;
    let particular = build_rep(a, &polynomial, g)?;
    let basis = SoBasis::new(g);
    let zero = DMatrix::zeros(g.dim(), g.dim());
    let mut sys = OperatorSystem::new(&basis, 0);
    sys.add_identity(&basis, a, &zero, None);
    let (_, _, freedom_dimension) = sys.solve();
    Ok(SolutionSpace { polynomial, particular, freedom_dimension })
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessVerdict {
    /// Dimension of the affine solution set of the joint system.
    pub solution_dimension: usize,
    pub residual: f64,
    pub a_regular: bool,
    /// `A'` is not in `span{A, I}`.
    pub independent: bool,
    /// Fitted `k` in `R ≈ k id` for the particular solution.
    pub scalar: f64,
    pub scalar_residual: f64,
    /// Regular, independent, zero-dimensional and `R = k id` within tolerance.
    pub certified_scalar: bool,
    #[serde(skip)]
    pub particular: DMatrix<f64>,
}

/// Joint system `[R(X), A] = [X, B]`, `[R(X), A'] = [X, B']`, `R` symmetric.
pub fn uniqueness_test(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    b2: &DMatrix<f64>,
    g: &BilinearForm,
) -> Result<UniquenessVerdict> {
    for m in [a, b, a2, b2] {
        check_role(m, Role::GSymmetric, g, ROLE_TOL)?;
    }
    let basis = SoBasis::new(g);
    let dim = basis.len();
    let mut sys = OperatorSystem::new(&basis, 0);
    sys.add_identity(&basis, a, b, None);
    sys.add_identity(&basis, a2, b2, None);
    let (x, residual, solution_dimension) = sys.solve();
    if residual > CONSISTENCY_TOL {
        return Err(Error::NoCommonSectional { residual });
    }
    let particular = unvec_operator(&x, dim);
    let n = g.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let stacked = DMatrix::from_columns(&[vec_of(&id), vec_of(a), vec_of(a2)]);
    let independent = rank(&stacked, 1e-9) == 3;
    let a_regular = is_regular(a);
    let scalar = if dim == 0 { 0.0 } else { particular.trace() / dim as f64 };
    let scalar_residual =
        (&particular - DMatrix::identity(dim, dim) * scalar).norm() / (1.0 + particular.norm());
    let certified_scalar = a_regular && independent && solution_dimension == 0 && scalar_residual <= 1e-9;
    Ok(UniquenessVerdict {
        solution_dimension,
        residual,
        a_regular,
        independent,
        scalar,
        scalar_residual,
        certified_scalar,
        particular,
    })
}

/// Dimension of `{(R, k)}` with `R` symmetric, `[R(X), A] = k [X, A]` and
/// `[R(X), A'] = k [X, A']`. For regular `A` and `A' ∉ span{A, I}` this is the
/// single line through `(id, 1)`.
pub fn scalar_line_dimension(a: &DMatrix<f64>, a2: &DMatrix<f64>, g: &BilinearForm) -> Result<(usize, bool)> {
    check_role(a, Role::GSymmetric, g, ROLE_TOL)?;
    check_role(a2, Role::GSymmetric, g, ROLE_TOL)?;
    let basis = SoBasis::new(g);
    let dim = basis.len();
    let mut sys = OperatorSystem::new(&basis, 1);
    sys.add_identity(&basis, a, a, Some(dim * dim));
    sys.add_identity(&basis, a2, a2, Some(dim * dim));
    let m = sys.matrix();
    let ns = null_space(&m, RANK_TOL);
    // (vec(id), 1) must lie in the null space.
    let mut probe = DVector::zeros(dim * dim + 1);
    for k in 0..dim {
        probe[k * dim + k] = 1.0;
    }
    probe[dim * dim] = 1.0;
    let contains_identity = (&m * &probe).norm() <= 1e-10 * probe.norm();
    Ok((ns.ncols(), contains_identity))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictedEigenvalue {
    /// Indices into the distinct-eigenvalue list, `i <= j`.
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Divided differences over distinct eigenvalue pairs, plus `p'(λ_i)` for each
/// eigenvalue owning a Jordan block of size at least 2.
pub fn spectrum_predict(r: &RealizedJordan, p: &MatrixPolynomial) -> Vec<PredictedEigenvalue> {
    let lams = r.distinct_eigenvalues();
    let mut out = Vec::new();
    for i in 0..lams.len() {
        if r.max_block_size(lams[i]) >= 2 {
            out.push(PredictedEigenvalue { i, j: i, value: p.derivative().eval(lams[i]) });
        }
        for j in (i + 1)..lams.len() {
            out.push(PredictedEigenvalue { i, j, value: p.divided_difference(lams[i], lams[j]) });
        }
    }
    out
}

/// One summand `m_ij` of the split of `so(g)` induced by the generalized
/// eigenspaces of `A`.
#[derive(Debug, Clone, Serialize)]
pub struct SplitPart {
    pub i: usize,
    pub j: usize,
    /// Wedge-basis indices spanning the part.
    pub indices: Vec<usize>,
    pub predicted: f64,
    /// `false` for `m_ii` with scalar `A_i`, which lies inside `g_A`.
    pub survives: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantSplit {
    pub parts: Vec<SplitPart>,
}

pub fn invariant_split(r: &RealizedJordan, p: &MatrixPolynomial, basis: &SoBasis) -> InvariantSplit {
    let lams = r.distinct_eigenvalues();
    let owner: Vec<usize> = (0..r.dim())
        .map(|c| lams.iter().position(|&l| r.eigenspace_indices(l).contains(&c)).expect("covered"))
        .collect();
    let mut parts = Vec::new();
    for i in 0..lams.len() {
        for j in i..lams.len() {
            let indices: Vec<usize> = basis
                .pairs()
                .iter()
                .enumerate()
                .filter(|(_, &(a, b))| {
                    let (oa, ob) = (owner[a].min(owner[b]), owner[a].max(owner[b]));
                    (oa, ob) == (i, j)
                })
                .map(|(k, _)| k)
                .collect();
            if indices.is_empty() {
                continue;
            }
            parts.push(SplitPart {
                i,
                j,
                indices,
                predicted: p.divided_difference(lams[i], lams[j]),
                survives: i != j || r.max_block_size(lams[i]) >= 2,
            });
        }
    }
    InvariantSplit { parts }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenvalueMatch {
    pub predicted: f64,
    /// `sigma_min(R - μ I) / max(1, ||R||)`.
    pub backward_error: f64,
    /// Distance to the nearest computed eigenvalue (ill-conditioned for defective ones).
    pub nearest_dense: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartCheck {
    pub i: usize,
    pub j: usize,
    pub dim: usize,
    pub predicted: f64,
    /// `||R restricted to m_ij, projected off m_ij|| / max(1, ||R||)`.
    pub invariance_residual: f64,
    /// `|tr(R_ij)/dim - predicted|`.
    pub mean_eigenvalue_error: f64,
    /// `max |eig(R_ij) - predicted|`, informational.
    pub max_eigenvalue_spread: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub matches: Vec<EigenvalueMatch>,
    pub parts: Vec<PartCheck>,
    pub dense_spectrum: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Dense check of the predicted spectrum of `R0` and of the invariant split.
pub fn spectrum_verify(r: &RealizedJordan, p: &MatrixPolynomial, tol: f64) -> Result<SpectrumReport> {
    let rep = build_rep(&r.a, p, &r.g)?;
    let rm = rep.matrix();
    let dim = rm.nrows();
    let scale = rm.norm().max(1.0);
    let dense: Vec<nalgebra::Complex<f64>> = if dim == 0 {
        Vec::new()
    } else {
        rm.complex_eigenvalues().iter().copied().collect()
    };
    let mut dense_spectrum: Vec<f64> = dense.iter().map(|c| c.re).collect();
    dense_spectrum.sort_by(f64::total_cmp);

    let matches: Vec<EigenvalueMatch> = spectrum_predict(r, p)
        .into_iter()
        .map(|pe| {
            let mu = pe.value;
            let shifted = rm - DMatrix::identity(dim, dim) * mu;
            let backward_error = sigma_min(&shifted) / scale;
            let nearest_dense = dense.iter().map(|c| (c - mu).norm()).fold(f64::INFINITY, f64::min);
            EigenvalueMatch { predicted: mu, backward_error, nearest_dense, pass: backward_error <= tol }
        })
        .collect();

    let split = invariant_split(r, p, rep.basis());
    let parts: Vec<PartCheck> = split
        .parts
        .iter()
        .map(|part| {
            let inside = &part.indices;
            let outside: Vec<usize> = (0..dim).filter(|k| !inside.contains(k)).collect();
            let mut leak: f64 = 0.0;
            for &c in inside {
                for &r_ in &outside {
                    leak += rm[(r_, c)].powi(2);
                }
            }
            let invariance_residual = leak.sqrt() / scale;
            let sub = rm.select_rows(inside).select_columns(inside);
            let d = inside.len();
            let mean_eigenvalue_error = (sub.trace() / d as f64 - part.predicted).abs();
            let max_eigenvalue_spread = sub
                .complex_eigenvalues()
                .iter()
                .map(|c| (c - part.predicted).norm())
                .fold(0.0, f64::max);
            PartCheck {
                i: part.i,
                j: part.j,
                dim: d,
                predicted: part.predicted,
                invariance_residual,
                mean_eigenvalue_error,
                max_eigenvalue_spread,
                pass: invariance_residual <= tol && mean_eigenvalue_error <= tol * scale,
            }
        })
        .collect();
    let pass = matches.iter().all(|m| m.pass) && parts.iter().all(|p| p.pass);
    Ok(SpectrumReport { matches, parts, dense_spectrum, tolerance: tol, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jordan::{JordanBlock, JordanSpec};
    use crate::linalg::{trace_pairing, unit, wedge};

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn r0_examples() {
        let g = BilinearForm::identity(3);
        let a = diag(&[1.0, 2.0, 3.0]);
        let x = wedge(&unit(3, 0), &unit(3, 1), &g);
        let y = apply_r0(&a, &MatrixPolynomial::monomial(2), &x, &g).unwrap();
        assert!((y - &x * 3.0).norm() < 1e-15);

        let z = apply_r0(&a, &MatrixPolynomial::monomial(1), &x, &g).unwrap();
        assert_eq!(z, x);

        let g2 = BilinearForm::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let n2 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let x2 = diag(&[1.0, -1.0]);
        let y2 = apply_r0(&n2, &MatrixPolynomial::monomial(2), &x2, &g2).unwrap();
        assert_eq!(y2, DMatrix::zeros(2, 2));
    }

    #[test]
    fn r0_rejects_role_mismatch() {
        let g = BilinearForm::identity(2);
        let not_sym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let x = wedge(&unit(2, 0), &unit(2, 1), &g);
        assert!(matches!(
            apply_r0(&not_sym, &MatrixPolynomial::monomial(2), &x, &g),
            Err(Error::RoleMismatch { .. })
        ));
        assert!(apply_r0(&diag(&[1.0, 2.0]), &MatrixPolynomial::monomial(2), &diag(&[1.0, 0.0]), &g).is_err());
    }

    #[test]
    fn build_rep_examples() {
        let g = BilinearForm::identity(2);
        let a = diag(&[0.7, 0.7]);
        let p = MatrixPolynomial::new(vec![1.0, -2.0, 0.5, 1.0]);
        let rep = build_rep(&a, &p, &g).unwrap();
        assert!((rep.matrix()[(0, 0)] - p.derivative().eval(0.7)).abs() < 1e-14);

        let g3 = BilinearForm::identity(3);
        let rep = build_rep(&diag(&[1.0, 2.0, 3.0]), &MatrixPolynomial::monomial(2), &g3).unwrap();
        assert!((rep.matrix() - diag(&[3.0, 4.0, 5.0])).norm() < 1e-14);

        let rep = build_rep(&diag(&[1.0, 2.0, 3.0]), &MatrixPolynomial::constant(4.0), &g3).unwrap();
        assert_eq!(rep.matrix(), &DMatrix::zeros(3, 3));
    }

    #[test]
    fn sectional_residual_examples() {
        let g = BilinearForm::identity(3);
        let a = diag(&[1.0, -0.5, 2.0]);
        let p = MatrixPolynomial::new(vec![0.3, 1.0, -1.0, 0.5]);
        let rep = build_rep(&a, &p, &g).unwrap();
        assert!(sectional_residual(&rep, &a, &p.eval_matrix(&a)) <= 1e-12);

        let id = SectionalRep::identity(&g);
        assert_eq!(sectional_residual(&id, &(DMatrix::identity(3, 3) * 2.0), &DMatrix::zeros(3, 3)), 0.0);

        let g2 = BilinearForm::identity(2);
        let a2 = diag(&[1.0, 2.0]);
        let x = wedge(&unit(2, 0), &unit(2, 1), &g2);
        let expected = commutator(&x, &a2).norm() / (1.0 + a2.norm());
        let got = sectional_residual(&SectionalRep::identity(&g2), &a2, &DMatrix::zeros(2, 2));
        assert!(got > 0.0);
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn bianchi_examples() {
        let g = BilinearForm::identity(3);
        assert_eq!(bianchi_residual(&SectionalRep::zero(&g), &g, 50, 1), 0.0);

        // e1∧e2 -> e1∧e3, everything else -> 0
        let mut m = DMatrix::zeros(3, 3);
        m[(1, 0)] = 1.0;
        let r = SectionalRep::from_matrix(m, &g).unwrap();
        let s = bianchi_sum(&r, &g, &unit(3, 0), &unit(3, 1), &unit(3, 2));
        assert_eq!(s, unit(3, 0));
        assert!(bianchi_residual(&r, &g, 0, 1) >= 1.0);
    }

    #[test]
    fn centralizer_examples() {
        let g = BilinearForm::identity(3);
        assert_eq!(centralizer(&diag(&[1.0, 2.0, 3.0]), &g).unwrap().dim(), 0);
        let c = centralizer(&diag(&[1.0, 1.0, 2.0]), &g).unwrap();
        assert_eq!(c.dim(), 1);
        let y = &c.elements[0];
        let e12 = wedge(&unit(3, 0), &unit(3, 1), &g);
        let cos = trace_pairing(y, &e12).abs() / (y.norm() * e12.norm());
        assert!((cos - 1.0).abs() < 1e-12);
        assert_eq!(centralizer(&(DMatrix::identity(4, 4) * 0.3), &BilinearForm::identity(4)).unwrap().dim(), 6);
    }

    #[test]
    fn express_polynomial_examples() {
        let a = diag(&[1.0, 2.0]);
        let (p, res) = express_polynomial(&a, &diag(&[1.0, 4.0])).unwrap();
        assert_eq!(p.degree(), Some(1));
        assert!((p.coeffs()[0] + 2.0).abs() < 1e-12 && (p.coeffs()[1] - 3.0).abs() < 1e-12);
        assert!(res < 1e-12);

        let a3 = diag(&[1.0, -2.0, 0.5]);
        let (p, _) = express_polynomial(&a3, &a3).unwrap();
        assert_eq!(p.degree(), Some(1));
        assert!(p.coeffs()[0].abs() < 1e-12 && (p.coeffs()[1] - 1.0).abs() < 1e-12);

        let (p, _) = express_polynomial(&a3, &DMatrix::zeros(3, 3)).unwrap();
        assert!(p.is_zero());
    }

    #[test]
    fn express_polynomial_errors() {
        let a = diag(&[1.0, 2.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(express_polynomial(&a, &b), Err(Error::NotCommuting { .. })));
        // Commutes with A = diag(1,1,2) but is not a polynomial in it.
        let a = diag(&[1.0, 1.0, 2.0]);
        let b = diag(&[1.0, 3.0, 2.0]);
        assert!(matches!(express_polynomial(&a, &b), Err(Error::NotPolynomial { .. })));
    }

    #[test]
    fn solution_space_examples() {
        let g = BilinearForm::identity(3);
        let a = diag(&[1.0, 2.0, 3.0]);
        let s = solution_space(&a, &(&a * &a), &g).unwrap();
        assert_eq!(s.freedom_dimension, 0);

        let a = diag(&[1.0, 1.0, 2.0]);
        let s = solution_space(&a, &a, &g).unwrap();
        assert_eq!(s.freedom_dimension, 1);

        let id = DMatrix::identity(3, 3);
        let s = solution_space(&id, &id, &g).unwrap();
        assert_eq!(s.freedom_dimension, 6);

        let bad = diag(&[1.0, 3.0, 2.0]);
        assert!(matches!(solution_space(&a, &bad, &g), Err(Error::NotSectionalCompatible(_))));
    }

    #[test]
    fn uniqueness_examples() {
        let g = BilinearForm::identity(3);
        let a = diag(&[1.0, 2.0, 3.0]);
        let a2 = diag(&[1.0, 4.0, 9.0]);
        let k = 2.0;
        let v = uniqueness_test(&a, &(&a * k), &a2, &(&a2 * k), &g).unwrap();
        assert_eq!(v.solution_dimension, 0);
        assert!(v.certified_scalar);
        assert!((v.scalar - k).abs() < 1e-9);

        let a2 = &a * 2.0 + DMatrix::identity(3, 3);
        let b = &a * 0.5;
        let v = uniqueness_test(&a, &b, &a2, &(&b * 2.0), &g).unwrap();
        assert!(!v.independent);
        assert_eq!(v.solution_dimension, solution_space(&a, &b, &g).unwrap().freedom_dimension);

        let a2 = diag(&[1.0, 4.0, 9.0]);
        assert!(matches!(
            uniqueness_test(&a, &(&a * &a), &a2, &(&a2 * &a2), &g),
            Err(Error::NoCommonSectional { .. })
        ));
    }

    #[test]
    fn spectrum_predictions() {
        let r = JordanSpec::diagonal(&[1.0, 2.0, 3.0]).realize().unwrap();
        let vals: Vec<f64> = spectrum_predict(&r, &MatrixPolynomial::monomial(2)).iter().map(|p| p.value).collect();
        assert_eq!(vals, vec![3.0, 4.0, 5.0]);

        let lam = 0.75;
        let r = JordanSpec::new(vec![JordanBlock::new(lam, 2)]).realize().unwrap();
        let vals: Vec<f64> = spectrum_predict(&r, &MatrixPolynomial::monomial(2)).iter().map(|p| p.value).collect();
        assert_eq!(vals, vec![2.0 * lam]);

        let r = JordanSpec::new(vec![JordanBlock::new(1.0, 3), JordanBlock::new(-0.5, 1), JordanBlock::new(2.0, 2)])
            .realize()
            .unwrap();
        assert!(spectrum_predict(&r, &MatrixPolynomial::monomial(1)).iter().all(|p| p.value == 1.0));
    }

    #[test]
    fn spectrum_verify_examples() {
        let p2 = MatrixPolynomial::monomial(2);
        let r = JordanSpec::diagonal(&[1.0, 2.0, 3.0]).realize().unwrap();
        let rep = spectrum_verify(&r, &p2, 1e-8).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.parts.len(), 3);
        assert!(rep.parts.iter().all(|p| p.dim == 1));

        let r = JordanSpec::diagonal(&[1.0, 1.0, 2.0]).realize().unwrap();
        let rep = spectrum_verify(&r, &p2, 1e-8).unwrap();
        assert!(rep.pass);
        let m12 = rep.parts.iter().find(|p| (p.i, p.j) == (0, 1)).unwrap();
        assert_eq!((m12.dim, m12.predicted), (2, 3.0));
        assert_eq!(rep.dense_spectrum.iter().filter(|&&v| (v - 3.0).abs() < 1e-12).count(), 2);

        let r = JordanSpec::new(vec![JordanBlock::new(1.0, 2)]).realize().unwrap();
        let rep = spectrum_verify(&r, &p2, 1e-8).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.dense_spectrum, vec![2.0]);
    }
}
