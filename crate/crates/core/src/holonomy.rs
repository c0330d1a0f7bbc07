//! Formal curvature tensors with image `g_A`, and an explicit metric realizing one.
//!
//! For a pair `(A, g)` in Jordan normal form the operator `R_formal` is the sum
//! over pairs of blocks `α <= β` of `X -> d/dt p_αβ(A_αβ + t X_αβ)`, where
//! `X_αβ` is the component of `X` in the summand of
//! `gl(V) = ⊕ Hom(V_α, V_β) ⊕ Hom(V_β, V_α)` belonging to the pair and `p_αβ` the
//! minimal polynomial of `A` on `V_α ⊕ V_β`. Replacing `X` by a tensor slot gives the extension
//! `B`, and `g_ij(x) = g0_ij + 𝓑_{ij,pq} x^p x^q` with `𝓑` the lowered `B`
//! is a metric with `∇A = 0` and curvature `R_formal` at the origin.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{
    christoffel_from_jet, curvature_from_christoffel, operator_from_riemann, raise_first, MetricField, Riemann,
};
use crate::jet::MatJet;
use crate::jordan::RealizedJordan;
use crate::linalg::{commutator, g_adjoint, rank, sigma_min, BilinearForm, SoBasis};
use crate::poly::MatrixPolynomial;
use crate::random;
use crate::sectional::{bianchi_residual, centralizer, r0_action, SectionalRep};

/// One block-pair contribution to `R_formal`.
#[derive(Debug, Clone, Serialize)]
pub struct BlockPairTerm {
    pub alpha: usize,
    pub beta: usize,
    /// Coordinates of `V_α ⊕ V_β`.
    pub indices: Vec<usize>,
    pub polynomial: MatrixPolynomial,
}

fn block_pairs(rj: &RealizedJordan) -> Vec<BlockPairTerm> {
    let ranges = rj.block_ranges();
    let mut out = Vec::new();
    for alpha in 0..ranges.len() {
        for beta in alpha..ranges.len() {
            let mut indices: Vec<usize> = ranges[alpha].clone().collect();
            if beta != alpha {
                indices.extend(ranges[beta].clone());
            }
            out.push(BlockPairTerm { alpha, beta, indices, polynomial: rj.pair_minimal_polynomial(alpha, beta) });
        }
    }
    out
}

fn restrict(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    m.select_rows(idx).select_columns(idx)
}

fn embed(m: &DMatrix<f64>, idx: &[usize], n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            out[(i, j)] = m[(a, b)];
        }
    }
    out
}

/// `Σ_αβ ι( Σ_m a_m Σ_j A_αβ^{m-1-j} X_αβ A_αβ^j )` for any square `X`, where
/// `X_αβ` is the mixed `(α, β)` part for `α < β` and the diagonal block for `α = β`.
fn blockwise_derivative(rj: &RealizedJordan, terms: &[BlockPairTerm], x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = rj.dim();
    let mut out = DMatrix::zeros(n, n);
    for t in terms {
        let a = restrict(&rj.a, &t.indices);
        let mut xs = restrict(x, &t.indices);
        if t.alpha != t.beta {
            // Keep only the mixed blocks; the diagonal ones belong to (α, α) and (β, β).
            let k = rj.block_ranges()[t.alpha].len();
            let m = xs.nrows();
            xs.view_mut((0, 0), (k, k)).fill(0.0);
            xs.view_mut((k, k), (m - k, m - k)).fill(0.0);
        }
        out += embed(&r0_action(&a, &t.polynomial, &xs), &t.indices, n);
    }
    out
}

#[derive(Debug, Clone)]
pub struct FormalCurvature {
    pub rep: SectionalRep,
    pub terms: Vec<BlockPairTerm>,
}

pub fn formal_curvature(rj: &RealizedJordan) -> FormalCurvature {
    let terms = block_pairs(rj);
    let rep = SectionalRep::from_action(&rj.g, |x| blockwise_derivative(rj, &terms, x));
    FormalCurvature { rep, terms }
}

/// Relative distance of the columns of `rep` from the centralizer of `a`.
pub fn image_in_centralizer_residual(rep: &SectionalRep, a: &DMatrix<f64>, g: &BilinearForm) -> Result<f64> {
    let c = centralizer(a, g)?;
    let m = rep.matrix();
    if m.ncols() == 0 {
        return Ok(0.0);
    }
    let off = m - &c.coords * (c.coords.transpose() * m);
    Ok(off.norm() / m.norm().max(1.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct BergerCertificate {
    pub image_dimension: usize,
    pub centralizer_dimension: usize,
    pub bianchi_residual: f64,
    pub image_residual: f64,
    /// Every eigenvalue has at most two Jordan blocks.
    pub within_two_block_bound: bool,
    pub certified: bool,
    /// Dimensions differ for a spec outside the two-block bound.
    pub flagged: bool,
}

pub const BERGER_TOL: f64 = 1e-10;

pub fn berger_certificate(rj: &RealizedJordan) -> Result<BergerCertificate> {
    let fc = formal_curvature(rj);
    let image_dimension = rank(fc.rep.matrix(), BERGER_TOL);
    let centralizer_dimension = centralizer(&rj.a, &rj.g)?.dim();
    let bianchi = bianchi_residual(&fc.rep, &rj.g, 50, 0);
    let image_residual = image_in_centralizer_residual(&fc.rep, &rj.a, &rj.g)?;
    let within = rj.at_most_two_blocks();
    let equal = image_dimension == centralizer_dimension;
    let certified = equal && bianchi <= BERGER_TOL && image_residual <= BERGER_TOL;
    Ok(BergerCertificate {
        image_dimension,
        centralizer_dimension,
        bianchi_residual: bianchi,
        image_residual,
        within_two_block_bound: within,
        certified,
        flagged: !equal && !within,
    })
}

/// The (2,2) tensor `B`, stored as `B^{i,p}_{j,q} = B(E_jp)_{iq}`.
#[derive(Debug, Clone)]
pub struct ExtensionTensor {
    n: usize,
    /// `data[((i * n + p) * n + j) * n + q]`.
    data: Vec<f64>,
}

impl ExtensionTensor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, p: usize, j: usize, q: usize) -> f64 {
        let n = self.n;
        self.data[((i * n + p) * n + j) * n + q]
    }

    /// `B(X)^i_q = B^{i,p}_{j,q} X^j_p`.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, q| {
            let mut s = 0.0;
            for p in 0..n {
                for j in 0..n {
                    s += self.get(i, p, j, q) * x[(j, p)];
                }
            }
            s
        })
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn extension_tensor(rj: &RealizedJordan) -> ExtensionTensor {
    let n = rj.dim();
    let terms = block_pairs(rj);
    let mut data = vec![0.0; n * n * n * n];
    for j in 0..n {
        for p in 0..n {
            let mut e = DMatrix::zeros(n, n);
            e[(j, p)] = 1.0;
            let bx = blockwise_derivative(rj, &terms, &e) * -0.5;
            for i in 0..n {
                for q in 0..n {
                    data[((i * n + p) * n + j) * n + q] = bx[(i, q)];
                }
            }
        }
    }
    ExtensionTensor { n, data }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtensionChecks {
    /// `max ||A B(X) - B(A X)||` over the unit matrices of `gl(V)`.
    pub eq_symmetric: f64,
    /// `max ||[B(X), A] + [B(X), A]*||` over the same basis.
    pub eq_parallel: f64,
    /// `max ||R_formal(X) + B(X) - B(X)*||` over the wedge basis.
    pub eq_curvature: f64,
    /// `(1 + ||A||)(1 + ||B||)`, the scale the residuals are compared against.
    pub scale: f64,
}

pub fn extension_checks(rj: &RealizedJordan, b: &ExtensionTensor, fc: &FormalCurvature) -> ExtensionChecks {
    let n = rj.dim();
    let a = &rj.a;
    let g = &rj.g;
    let (mut e21, mut e22, mut e23) = (0.0f64, 0.0f64, 0.0f64);
    for j in 0..n {
        for p in 0..n {
            let mut x = DMatrix::zeros(n, n);
            x[(j, p)] = 1.0;
            let bx = b.apply(&x);
            e21 = e21.max((a * &bx - b.apply(&(a * &x))).norm());
            let c = commutator(&bx, a);
            e22 = e22.max((&c + g_adjoint(&c, g)).norm());
        }
    }
    for x in fc.rep.basis().elements() {
        let bx = b.apply(x);
        e23 = e23.max((fc.rep.apply(x) + &bx - g_adjoint(&bx, g)).norm());
    }
    ExtensionChecks { eq_symmetric: e21, eq_parallel: e22, eq_curvature: e23, scale: (1.0 + a.norm()) * (1.0 + b.norm()) }
}

/// `g_ij(x) = g0_ij + 𝓑_{ij,pq} x^p x^q`.
#[derive(Debug, Clone)]
pub struct QuadraticMetric {
    g0: BilinearForm,
    /// `coeffs[((i * n + j) * n + p) * n + q] = 𝓑_{ij,pq}`.
    coeffs: Vec<f64>,
    n: usize,
}

impl QuadraticMetric {
    pub fn new(g0: BilinearForm, coeffs: Vec<f64>) -> Result<Self> {
        let n = g0.dim();
        if coeffs.len() != n.pow(4) {
            return Err(crate::Error::DimensionMismatch { expected: n.pow(4), found: coeffs.len() });
        }
        Ok(Self { g0, coeffs, n })
    }

    pub fn g0(&self) -> &BilinearForm {
        &self.g0
    }

    pub fn coeff(&self, i: usize, j: usize, p: usize, q: usize) -> f64 {
        let n = self.n;
        self.coeffs[((i * n + j) * n + p) * n + q]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest defect of `𝓑_{ij,pq} = 𝓑_{ji,pq} = 𝓑_{ij,qp}`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for p in 0..n {
                    for q in 0..n {
                        let c = self.coeff(i, j, p, q);
                        worst = worst.max((c - self.coeff(j, i, p, q)).abs()).max((c - self.coeff(i, j, q, p)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Radius `0.1 (σ_min(g0) / ||𝓑||)^{1/2}` of the ball in which points are sampled.
    pub fn safe_radius(&self) -> f64 {
        let s = sigma_min(self.g0.matrix());
        let b = self.coeff_norm();
        if b == 0.0 {
            0.1 * s.sqrt()
        } else {
            0.1 * (s / b).sqrt()
        }
    }

    /// Curvature at the origin assembled directly from `𝓑`:
    /// `R_{mjkl} = 𝓑_{ml,kj} - 𝓑_{lj,km} - 𝓑_{mk,lj} + 𝓑_{kj,lm}`.
    pub fn curvature_at_origin(&self) -> SectionalRep {
        let n = self.n;
        let mut low: Riemann = vec![vec![vec![vec![0.0; n]; n]; n]; n];
        for (m, lm) in low.iter_mut().enumerate() {
            for (j, lj) in lm.iter_mut().enumerate() {
                for (k, lk) in lj.iter_mut().enumerate() {
                    for (l, v) in lk.iter_mut().enumerate() {
                        *v = self.coeff(m, l, k, j) - self.coeff(l, j, k, m) - self.coeff(m, k, l, j)
                            + self.coeff(k, j, l, m);
                    }
                }
            }
        }
        operator_from_riemann(&raise_first(&low, self.g0.inverse()), &self.g0)
    }
}

impl MetricField for QuadraticMetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let mut g = self.g0.matrix().clone();
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..n {
                    for q in 0..n {
                        s += self.coeff(i, j, p, q) * x[p] * x[q];
                    }
                }
                g[(i, j)] += s;
            }
        }
        g
    }

    fn jet(&self, x: &[f64]) -> MatJet {
        let n = self.n;
        let mut jet = MatJet::constant(self.metric(x), n);
        for i in 0..n {
            for j in 0..n {
                for p in 0..n {
                    let mut s = 0.0;
                    for q in 0..n {
                        s += (self.coeff(i, j, p, q) + self.coeff(i, j, q, p)) * x[q];
                        jet.dd[p][q][(i, j)] = self.coeff(i, j, p, q) + self.coeff(i, j, q, p);
                    }
                    jet.d[p][(i, j)] = s;
                }
            }
        }
        jet
    }
}

#[derive(Debug, Clone)]
pub struct Realization {
    pub metric: QuadraticMetric,
    /// Symmetry defect of the lowered tensor before symmetrization.
    pub raw_symmetry_defect: f64,
}

/// Average over `ij <-> ji` and `pq <-> qp`.
pub fn symmetrize(raw: &[f64], n: usize) -> Vec<f64> {
    let idx = |i: usize, j: usize, p: usize, q: usize| ((i * n + j) * n + p) * n + q;
    let mut sym = vec![0.0; n.pow(4)];
    for i in 0..n {
        for j in 0..n {
            for p in 0..n {
                for q in 0..n {
                    sym[idx(i, j, p, q)] =
                        0.25 * (raw[idx(i, j, p, q)] + raw[idx(j, i, p, q)] + raw[idx(i, j, q, p)] + raw[idx(j, i, q, p)]);
                }
            }
        }
    }
    sym
}

/// Lower `B` with `g0`: `𝓑_{αj,βq} = g0_{αi} g0_{βp} B^{i,p}_{j,q}`, then symmetrize.
pub fn realize_metric(rj: &RealizedJordan, b: &ExtensionTensor) -> Result<Realization> {
    let n = rj.dim();
    let g0 = rj.g.matrix();
    let mut raw = vec![0.0; n.pow(4)];
    let idx = |i: usize, j: usize, p: usize, q: usize| ((i * n + j) * n + p) * n + q;
    for al in 0..n {
        for j in 0..n {
            for be in 0..n {
                for q in 0..n {
                    let mut s = 0.0;
                    for i in 0..n {
                        if g0[(al, i)] == 0.0 {
                            continue;
                        }
                        for p in 0..n {
                            s += g0[(al, i)] * g0[(be, p)] * b.get(i, p, j, q);
                        }
                    }
                    raw[idx(al, j, be, q)] = s;
                }
            }
        }
    }
    let raw_metric = QuadraticMetric::new(rj.g.clone(), raw.clone())?;
    let raw_symmetry_defect = raw_metric.symmetry_defect();
    let sym = symmetrize(&raw, n);
    Ok(Realization { metric: QuadraticMetric::new(rj.g.clone(), sym)?, raw_symmetry_defect })
}

/// Curvature operator of a metric field at `x`.
pub fn curvature_at(metric: &dyn MetricField, x: &[f64]) -> Result<SectionalRep> {
    curvature_from_christoffel(metric, x)
}

/// Curvature at the origin with `∂²g` taken from central second differences of
/// the metric values (step `h`), an oracle independent of the exact derivatives.
pub fn curvature_at_origin_fd(metric: &QuadraticMetric, h: f64) -> Result<SectionalRep> {
    let n = metric.dim();
    let fd = crate::geometry::FiniteDifferenceMetric::new(n, |x: &[f64]| metric.metric(x)).with_step(h);
    curvature_from_christoffel(&fd, &vec![0.0; n])
}

/// `max_p ||∇_p A||` over `points`; for constant `A` this is `max_p ||[Γ_p, A]||`.
pub fn covariant_constancy_residual(metric: &dyn MetricField, a: &DMatrix<f64>, points: &[Vec<f64>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in points {
        let c = christoffel_from_jet(&metric.jet(x), x)?;
        for p in 0..metric.dim() {
            let gp = c.along(p);
            worst = worst.max((&gp * a - a * &gp).norm());
        }
    }
    Ok(worst)
}

/// Largest `||g(x) A - A^T g(x)||` over `points`.
pub fn symmetry_along_points(metric: &dyn MetricField, a: &DMatrix<f64>, points: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .map(|x| {
            let g = metric.metric(x);
            (&g * a - a.transpose() * &g).norm()
        })
        .fold(0.0, f64::max)
}

/// `count` seeded points uniformly in the ball of radius `radius`.
pub fn sample_points(n: usize, radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = random::rng(seed);
    (0..count)
        .map(|_| {
            let v: DVector<f64> = random::vector(&mut rng, n);
            let r = radius * random::uniform(&mut rng).abs();
            let v = if v.norm() > 0.0 { v.normalize() * r } else { v };
            v.iter().copied().collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct RealizationOptions {
    pub sample_count: usize,
    pub seed: u64,
    pub fd_check: bool,
    pub fd_step: f64,
    pub algebraic_tol: f64,
    pub parallel_tol: f64,
    pub curvature_tol: f64,
    pub fd_tol: f64,
    pub cross_tol: f64,
}

impl Default for RealizationOptions {
    fn default() -> Self {
        Self {
            sample_count: 20,
            seed: 0,
            fd_check: true,
            fd_step: 1e-4,
            algebraic_tol: 1e-12,
            parallel_tol: 1e-8,
            curvature_tol: 1e-8,
            fd_tol: 1e-6,
            cross_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RealizationReport {
    pub dim: usize,
    pub berger: BergerCertificate,
    pub extension: ExtensionChecks,
    pub raw_symmetry_defect: f64,
    pub sample_radius: f64,
    /// `A` stays `g(x)`-symmetric along the sample points.
    pub metric_symmetry_residual: f64,
    pub covariant_constancy_residual: f64,
    /// `||curvature_at(0) - R_formal||`.
    pub curvature_residual: f64,
    /// `||curvature_at(0) - curvature assembled from 𝓑||`.
    pub cross_check_residual: f64,
    pub fd_residual: Option<f64>,
    pub verdicts: Vec<(String, bool)>,
    pub pass: bool,
}

pub fn verify_realization(rj: &RealizedJordan, opts: &RealizationOptions) -> Result<RealizationReport> {
    let fc = formal_curvature(rj);
    let berger = berger_certificate(rj)?;
    let b = extension_tensor(rj);
    let extension = extension_checks(rj, &b, &fc);
    let Realization { metric, raw_symmetry_defect } = realize_metric(rj, &b)?;
    let n = rj.dim();
    let radius = metric.safe_radius();
    let points = sample_points(n, radius, opts.sample_count, opts.seed);
    let metric_symmetry_residual = symmetry_along_points(&metric, &rj.a, &points);
    let cc = covariant_constancy_residual(&metric, &rj.a, &points)?;
    let origin = vec![0.0; n];
    let at0 = curvature_at(&metric, &origin)?;
    let curvature_residual = (at0.matrix() - fc.rep.matrix()).norm();
    let cross_check_residual = (at0.matrix() - metric.curvature_at_origin().matrix()).norm();
    let fd_residual = if opts.fd_check {
        Some((curvature_at_origin_fd(&metric, opts.fd_step)?.matrix() - at0.matrix()).norm())
    } else {
        None
    };

    let s = extension.scale;
    let mut verdicts = vec![
        ("eq_symmetric".to_string(), extension.eq_symmetric <= opts.algebraic_tol * s),
        ("eq_parallel".to_string(), extension.eq_parallel <= opts.algebraic_tol * s),
        ("eq_curvature".to_string(), extension.eq_curvature <= opts.algebraic_tol * s),
        ("bianchi".to_string(), berger.bianchi_residual <= BERGER_TOL),
        ("image_in_centralizer".to_string(), berger.image_residual <= BERGER_TOL),
        ("metric_symmetry".to_string(), metric_symmetry_residual <= opts.algebraic_tol * s),
        ("covariant_constancy".to_string(), cc <= opts.parallel_tol),
        ("curvature_at_origin".to_string(), curvature_residual <= opts.curvature_tol),
        ("curvature_cross_check".to_string(), cross_check_residual <= opts.cross_tol),
    ];
    if berger.within_two_block_bound {
        verdicts.push(("berger_rank".to_string(), berger.image_dimension == berger.centralizer_dimension));
    }
    if let Some(fd) = fd_residual {
        verdicts.push(("fd_hessian".to_string(), fd <= opts.fd_tol));
    }
    let pass = verdicts.iter().all(|(_, ok)| *ok);
    Ok(RealizationReport {
        dim: n,
        berger,
        extension,
        raw_symmetry_defect,
        sample_radius: radius,
        metric_symmetry_residual,
        covariant_constancy_residual: cc,
        curvature_residual,
        cross_check_residual,
        fd_residual,
        verdicts,
        pass,
    })
}

/// Basis-free helper used by tests: `R_formal` as a matrix over `SoBasis::new(g)`.
pub fn formal_matrix(rj: &RealizedJordan) -> DMatrix<f64> {
    let fc = formal_curvature(rj);
    debug_assert_eq!(fc.rep.basis().len(), SoBasis::new(&rj.g).len());
    fc.rep.matrix().clone()
}
