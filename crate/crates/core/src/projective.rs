//! Projectively equivalent metric pairs.
//!
//! For metrics `g`, `ḡ` the comparison tensor is
//! `A = |det ḡ / det g|^{1/(n+1)} ḡ^-1 g`. The pair shares unparametrized
//! geodesics iff `∇_u A = ½(u ⊗ d tr A + (u ⊗ d tr A)*)` for all `u`, where
//! `u ⊗ d tr A` is the rank-one operator `w -> d tr A(w) u` and `*` is the
//! `g`-adjoint. In that case the curvature operator of `g` is sectional for `A`
//! and `B = -½ ∇ grad tr A` (with `R(u ∧ v) = R(u, v)` and `(u ∧ v) w = g(v, w) u - g(u, w) v`).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{christoffel_from_jet, operator_from_riemann, raise_first, Christoffel, MetricField, Riemann};
use crate::jet::{MatJet, ScalarJet};
use crate::linalg::{commutator, g_adjoint, null_space, unit, BilinearForm, SoBasis, RANK_TOL};
use crate::sectional::{sectional_residual, SectionalRep};

/// `coef * prod x_i^{e_i}`, written `[coef, [e_1, ..., e_n]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term(pub f64, pub Vec<u32>);

fn one() -> Vec<Term> {
    vec![Term(1.0, Vec::new())]
}

/// Quotient of two polynomials in the coordinates. An empty `num` is zero; a
/// missing `den` is one. Exponent lists shorter than the dimension are padded with zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rational {
    #[serde(default)]
    pub num: Vec<Term>,
    #[serde(default = "one")]
    pub den: Vec<Term>,
}

impl Rational {
    pub fn polynomial(num: Vec<Term>) -> Self {
        Self { num, den: one() }
    }

    pub fn zero() -> Self {
        Self::polynomial(Vec::new())
    }

    pub fn constant(c: f64) -> Self {
        Self::polynomial(vec![Term(c, Vec::new())])
    }

    fn max_arity(&self) -> usize {
        self.num.iter().chain(&self.den).map(|t| t.1.len()).max().unwrap_or(0)
    }

    pub fn jet(&self, x: &[f64]) -> ScalarJet {
        let n = poly_jet(&self.num, x);
        if self.den == one() {
            return n;
        }
        n.div(&poly_jet(&self.den, x))
    }
}

fn power_jet(x: &[f64], i: usize, e: u32) -> ScalarJet {
    let c = ScalarJet::coordinate(x, i);
    let v = x[i];
    let ef = f64::from(e);
    match e {
        0 => ScalarJet::constant(1.0, x.len()),
        1 => c,
        _ => c.compose(v.powi(e as i32), ef * v.powi(e as i32 - 1), ef * (ef - 1.0) * v.powi(e as i32 - 2)),
    }
}

fn poly_jet(terms: &[Term], x: &[f64]) -> ScalarJet {
    let dim = x.len();
    let mut acc = ScalarJet::constant(0.0, dim);
    for Term(c, exps) in terms {
        let mut t = ScalarJet::constant(*c, dim);
        for (i, &e) in exps.iter().enumerate() {
            if e > 0 {
                t = t.mul(&power_jet(x, i, e));
            }
        }
        acc = acc.add(&t);
    }
    acc
}

/// Metric with rational entries, differentiated exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationalMetric {
    pub coeffs: Vec<Vec<Rational>>,
}

impl RationalMetric {
    pub fn new(coeffs: Vec<Vec<Rational>>) -> Result<Self> {
        let m = Self { coeffs };
        m.validate()?;
        Ok(m)
    }

    pub fn diagonal(entries: Vec<Rational>) -> Self {
        let n = entries.len();
        let mut coeffs = vec![vec![Rational::zero(); n]; n];
        for (i, e) in entries.into_iter().enumerate() {
            coeffs[i][i] = e;
        }
        Self { coeffs }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.coeffs.len();
        if n == 0 {
            return Err(Error::InvalidArgument("metric has no rows".into()));
        }
        for (i, row) in self.coeffs.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
            for (j, e) in row.iter().enumerate() {
                if e.max_arity() > n {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) uses more than {n} coordinates")));
                }
                if e.den.is_empty() {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) has an empty denominator")));
                }
                if *e != self.coeffs[j][i] {
                    return Err(Error::InvalidArgument(format!("entries ({i}, {j}) and ({j}, {i}) differ")));
                }
            }
        }
        Ok(())
    }
}

impl MetricField for RationalMetric {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn jet(&self, x: &[f64]) -> MatJet {
        let n = self.dim();
        MatJet::from_entries(n, n, n, |i, j| self.coeffs[i][j].jet(x))
    }
}

/// `dθ² + sin²θ dφ²` in coordinates `(θ, φ)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundSphere;

impl MetricField for RoundSphere {
    fn dim(&self) -> usize {
        2
    }

    fn jet(&self, x: &[f64]) -> MatJet {
        let t = x[0];
        let mut j = MatJet::constant(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, t.sin().powi(2)]), 2);
        j.d[0][(1, 1)] = (2.0 * t).sin();
        j.dd[0][0][(1, 1)] = 2.0 * (2.0 * t).cos();
        j
    }
}

fn term(c: f64, e: &[u32]) -> Term {
    Term(c, e.to_vec())
}

/// The Dini pair on `x ∈ (2, 3)`, `y ∈ (1, 2)`:
/// `g = (x - y)(dx² + dy²)` and `ḡ = (1/y - 1/x)(dx²/x + dy²/y)`.
pub fn dini_pair() -> (RationalMetric, RationalMetric) {
    let diff = vec![term(1.0, &[1, 0]), term(-1.0, &[0, 1])];
    let g = RationalMetric::diagonal(vec![Rational::polynomial(diff.clone()), Rational::polynomial(diff.clone())]);
    let gbar = RationalMetric::diagonal(vec![
        Rational { num: diff.clone(), den: vec![term(1.0, &[2, 1])] },
        Rational { num: diff, den: vec![term(1.0, &[1, 2])] },
    ]);
    (g, gbar)
}

/// Hyperbolic half-plane times a line, `g = (dx² + dy²)/y² + dz²`, and the
/// affinely equivalent `ḡ = c1 (dx² + dy²)/y² + c2 dz²`.
pub fn product_pair(c1: f64, c2: f64) -> (RationalMetric, RationalMetric) {
    let hyp = |c: f64| Rational { num: vec![term(c, &[])], den: vec![term(1.0, &[0, 2])] };
    let g = RationalMetric::diagonal(vec![hyp(1.0), hyp(1.0), Rational::constant(1.0)]);
    let gbar = RationalMetric::diagonal(vec![hyp(c1), hyp(c1), Rational::constant(c2)]);
    (g, gbar)
}

fn singular(x: &[f64]) -> Error {
    Error::SingularMetric { point: x.to_vec() }
}

/// Jet of `A = |det ḡ / det g|^{1/(n+1)} ḡ^-1 g`.
pub fn comparison_jet(g: &dyn MetricField, gbar: &dyn MetricField, x: &[f64]) -> Result<MatJet> {
    let n = g.dim();
    if gbar.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: gbar.dim() });
    }
    let gj = g.jet(x);
    let bj = gbar.jet(x);
    let dg = gj.determinant().ok_or_else(|| singular(x))?;
    let db = bj.determinant().ok_or_else(|| singular(x))?;
    if dg.v == 0.0 || db.v == 0.0 {
        return Err(singular(x));
    }
    let factor = db.div(&dg).abs_powf(1.0 / (n as f64 + 1.0));
    Ok(bj.inverse().ok_or_else(|| singular(x))?.mul(&gj).scale_by(&factor))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTensor {
    pub a: DMatrix<f64>,
    /// `||g A - A^T g|| / (||g|| ||A||)`.
    pub symmetry_residual: f64,
}

pub fn comparison_tensor(g: &dyn MetricField, gbar: &dyn MetricField, x: &[f64]) -> Result<ComparisonTensor> {
    let a = comparison_jet(g, gbar, x)?.v;
    let gm = g.metric(x);
    let symmetry_residual = (&gm * &a - a.transpose() * &gm).norm() / (gm.norm() * a.norm()).max(f64::MIN_POSITIVE);
    Ok(ComparisonTensor { a, symmetry_residual })
}

/// `ḡ(u, v) = g(A^-1 u, v) / |det A|`.
pub fn gbar_roundtrip(g: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let det = a.determinant();
    let inv = a.clone().try_inverse().filter(|_| det != 0.0).ok_or(Error::Singular("comparison tensor"))?;
    Ok(inv.transpose() * g / det.abs())
}

/// `∇_p A = ∂_p A + Γ_p A - A Γ_p`.
fn covariant_derivatives(aj: &MatJet, c: &Christoffel) -> Vec<DMatrix<f64>> {
    (0..aj.dim())
        .map(|p| {
            let gp = c.along(p);
            &aj.d[p] + &gp * &aj.v - &aj.v * &gp
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityReport {
    /// `||∇_p A - ½(e_p ⊗ d tr A + (e_p ⊗ d tr A)*)||` for each coordinate direction.
    pub per_direction: Vec<f64>,
    pub residual: f64,
    /// `max_p ||∇_p A||`, for judging the size of the residual.
    pub scale: f64,
}

pub fn compatibility_residual(g: &dyn MetricField, gbar: &dyn MetricField, x: &[f64]) -> Result<CompatibilityReport> {
    let n = g.dim();
    let aj = comparison_jet(g, gbar, x)?;
    let gj = g.jet(x);
    let c = christoffel_from_jet(&gj, x)?;
    let form = BilinearForm::new(gj.v.clone()).map_err(|_| singular(x))?;
    let dtr = aj.trace().d;
    let nabla = covariant_derivatives(&aj, &c);
    let per_direction: Vec<f64> = (0..n)
        .map(|p| {
            let rank_one = unit(n, p) * dtr.transpose();
            let rhs = (&rank_one + g_adjoint(&rank_one, &form)) * 0.5;
            (&nabla[p] - rhs).norm()
        })
        .collect();
    let residual = per_direction.iter().copied().fold(0.0, f64::max);
    let scale = nabla.iter().map(|m| m.norm()).fold(0.0, f64::max);
    Ok(CompatibilityReport { per_direction, residual, scale })
}

/// `B = -½ g^-1 (∂²tr A - Γ^m ∂_m tr A)`.
pub fn hessian_operator(g: &dyn MetricField, gbar: &dyn MetricField, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = g.dim();
    let tr = comparison_jet(g, gbar, x)?.trace();
    let gj = g.jet(x);
    let c = christoffel_from_jet(&gj, x)?;
    let ginv = gj.v.clone().try_inverse().ok_or_else(|| singular(x))?;
    let mut hess = tr.dd.clone();
    for m in 0..n {
        hess -= &c.gamma[m] * tr.d[m];
    }
    Ok(ginv * hess * -0.5)
}

/// Fully covariant Riemann tensor `R_{ijkl} = g(R(∂_k, ∂_l) ∂_j, ∂_i)` from the
/// second derivatives of `g` and the quadratic `Γ` terms.
pub fn riemann_lowered(jet: &MatJet, x: &[f64]) -> Result<Riemann> {
    let n = jet.v.nrows();
    let c = christoffel_from_jet(jet, x)?;
    let g = &jet.v;
    let dd = &jet.dd;
    let mut r = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = 0.5
                        * (dd[j][k][(i, l)] + dd[i][l][(j, k)] - dd[j][l][(i, k)] - dd[i][k][(j, l)]);
                    for a in 0..n {
                        for b in 0..n {
                            v += g[(a, b)]
                                * (c.gamma[a][(j, k)] * c.gamma[b][(i, l)] - c.gamma[a][(j, l)] * c.gamma[b][(i, k)]);
                        }
                    }
                    r[i][j][k][l] = v;
                }
            }
        }
    }
    Ok(r)
}

/// Curvature operator on `so(g(x))`, computed through the lowered tensor.
pub fn curvature_operator(metric: &dyn MetricField, x: &[f64]) -> Result<SectionalRep> {
    let jet = metric.jet(x);
    let form = BilinearForm::new(jet.v.clone()).map_err(|_| singular(x))?;
    let low = riemann_lowered(&jet, x)?;
    Ok(operator_from_riemann(&raise_first(&low, form.inverse()), &form))
}

/// `R = k id` fit: returns `(k, ||R - k id||)`.
pub fn constant_curvature_fit(r: &SectionalRep) -> (f64, f64) {
    let m = r.matrix();
    let dim = m.nrows();
    if dim == 0 {
        return (0.0, 0.0);
    }
    let k = m.trace() / dim as f64;
    (k, (m - DMatrix::identity(dim, dim) * k).norm())
}

#[derive(Debug, Clone, Serialize)]
pub struct BmkReport {
    pub point: Vec<f64>,
    pub compatibility: f64,
    /// `max_X ||[R(X), A] - [X, B]|| / (1 + ||A|| + ||B||)`.
    pub residual: f64,
    pub a_symmetry: f64,
    #[serde(skip)]
    pub a: DMatrix<f64>,
    #[serde(skip)]
    pub b: DMatrix<f64>,
}

pub fn bmk_check(g: &dyn MetricField, gbar: &dyn MetricField, x: &[f64]) -> Result<BmkReport> {
    let ct = comparison_tensor(g, gbar, x)?;
    let b = hessian_operator(g, gbar, x)?;
    let r = curvature_operator(g, x)?;
    let compatibility = compatibility_residual(g, gbar, x)?.residual;
    let residual = sectional_residual(&r, &ct.a, &b);
    Ok(BmkReport { point: x.to_vec(), compatibility, residual, a_symmetry: ct.symmetry_residual, a: ct.a, b })
}

/// Basis of `Sym(g)`: `g^-1 (E_ij + E_ji)` for `i <= j`.
pub fn sym_basis(g: &BilinearForm) -> Vec<DMatrix<f64>> {
    let n = g.dim();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n {
            let mut s = DMatrix::zeros(n, n);
            s[(i, j)] = 1.0;
            s[(j, i)] = 1.0;
            out.push(g.inverse() * s);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSpace {
    /// Dimension of `{(A, B) in Sym(g)^2 : [R(X), A] = [X, B] for all X}`.
    pub dimension: usize,
    /// `dimension - 2`: the pairs `(a I, b I)` always solve the identity.
    pub nontrivial: usize,
}

/// Whether `R` admits any sectional pair beyond the scalar ones.
pub fn sectional_pair_space(r: &SectionalRep, g: &BilinearForm) -> PairSpace {
    let sym = sym_basis(g);
    let basis = SoBasis::new(g);
    let s = sym.len();
    let n = g.dim();
    let rows = basis.len() * n * n;
    let mut m = DMatrix::zeros(rows, 2 * s);
    for (k, x) in basis.elements().iter().enumerate() {
        let rx = r.apply(x);
        for (c, e) in sym.iter().enumerate() {
            let ca = commutator(&rx, e);
            let cb = -commutator(x, e);
            for (t, (va, vb)) in ca.iter().zip(cb.iter()).enumerate() {
                m[(k * n * n + t, c)] = *va;
                m[(k * n * n + t, s + c)] = *vb;
            }
        }
    }
    let dimension = null_space(&m, RANK_TOL).ncols();
    PairSpace { dimension, nontrivial: dimension.saturating_sub(2) }
}

/// Geodesic from `x0` with initial direction `v0`, traced until its coordinate
/// length reaches `length`. Steps are chosen so each covers about `ds`.
pub fn geodesic_polyline(metric: &dyn MetricField, x0: &[f64], v0: &[f64], length: f64, ds: f64) -> Result<Vec<DVector<f64>>> {
    let n = metric.dim();
    let accel = |x: &DVector<f64>, v: &DVector<f64>| -> Result<DVector<f64>> {
        let xs = x.as_slice();
        let c = christoffel_from_jet(&metric.jet(xs), xs)?;
        Ok(DVector::from_fn(n, |k, _| -(v.transpose() * &c.gamma[k] * v)[(0, 0)]))
    };
    let mut x = DVector::from_column_slice(x0);
    let mut v = DVector::from_column_slice(v0);
    let mut pts = vec![x.clone()];
    let mut travelled = 0.0;
    let max_steps = (100.0 * length / ds).ceil() as usize + 10;
    for _ in 0..max_steps {
        let h = ds / v.norm();
        let (k1x, k1v) = (v.clone(), accel(&x, &v)?);
        let (x2, v2) = (&x + &k1x * (h / 2.0), &v + &k1v * (h / 2.0));
        let (k2x, k2v) = (v2.clone(), accel(&x2, &v2)?);
        let (x3, v3) = (&x + &k2x * (h / 2.0), &v + &k2v * (h / 2.0));
        let (k3x, k3v) = (v3.clone(), accel(&x3, &v3)?);
        let (x4, v4) = (&x + &k3x * h, &v + &k3v * h);
        let (k4x, k4v) = (v4.clone(), accel(&x4, &v4)?);
        let nx = &x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        let nv = &v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        let seg = (&nx - &x).norm();
        if travelled + seg >= length {
            let t = (length - travelled) / seg;
            pts.push(&x + (&nx - &x) * t);
            return Ok(pts);
        }
        travelled += seg;
        x = nx;
        v = nv;
        pts.push(x.clone());
    }
    Err(Error::InvalidArgument(format!("geodesic did not reach length {length}")))
}

fn point_segment(p: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 == 0.0 { 0.0 } else { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) };
    (p - (a + ab * t)).norm()
}

fn directed(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    a.iter()
        .map(|p| {
            if b.len() == 1 {
                return (p - &b[0]).norm();
            }
            b.windows(2).map(|w| point_segment(p, &w[0], &w[1])).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two polylines, measured from the vertices of each
/// to the segments of the other.
pub fn hausdorff(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    directed(a, b).max(directed(b, a))
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicReport {
    pub directions: usize,
    pub length: f64,
    pub per_direction: Vec<f64>,
    pub max_hausdorff: f64,
}

/// Trace geodesics of `g` and `ḡ` from `x0` in `directions` evenly spaced planar
/// directions (first two coordinates) and compare them as point sets.
pub fn geodesic_coincidence(
    g: &dyn MetricField,
    gbar: &dyn MetricField,
    x0: &[f64],
    directions: usize,
    length: f64,
    ds: f64,
) -> Result<GeodesicReport> {
    let n = g.dim();
    let mut per_direction = Vec::with_capacity(directions);
    for d in 0..directions {
        let th = 2.0 * std::f64::consts::PI * d as f64 / directions as f64;
        let mut v = vec![0.0; n];
        v[0] = th.cos();
        if n > 1 {
            v[1] = th.sin();
        }
        let a = geodesic_polyline(g, x0, &v, length, ds)?;
        let b = geodesic_polyline(gbar, x0, &v, length, ds)?;
        per_direction.push(hausdorff(&a, &b));
    }
    let max_hausdorff = per_direction.iter().copied().fold(0.0, f64::max);
    Ok(GeodesicReport { directions, length, per_direction, max_hausdorff })
}
