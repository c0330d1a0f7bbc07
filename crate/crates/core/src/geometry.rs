//! Metric fields in local coordinates and their Levi-Civita data.
//!
//! Curvature convention: `R(u, v) = ∇_u ∇_v - ∇_v ∇_u - ∇_[u,v]`, so
//! `R^i_{jkl} = ∂_k Γ^i_{lj} - ∂_l Γ^i_{kj} + Γ^i_{km} Γ^m_{lj} - Γ^i_{lm} Γ^m_{kj}`.
//! As an operator on `so(g)` the tensor acts by `R(X)^i_j = ½ R^i_{jkl} (X g^-1)^{kl}`,
//! which sends `u ∧ v` to the endomorphism `R(u, v)`. With this choice the unit
//! sphere has `R = id`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::jet::MatJet;
use crate::linalg::BilinearForm;
use crate::sectional::SectionalRep;

/// A symmetric, pointwise invertible matrix field with two derivatives.
pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;

    /// `g`, `∂_p g` and `∂_p ∂_q g` at `x`.
    fn jet(&self, x: &[f64]) -> MatJet;

    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        self.jet(x).v
    }
}

/// `Γ^k_{ij}` stored as `gamma[k][(i, j)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    pub gamma: Vec<DMatrix<f64>>,
}

impl Christoffel {
    /// `(Γ_p)^k_j = Γ^k_{pj}`, the connection matrix along `∂_p`.
    pub fn along(&self, p: usize) -> DMatrix<f64> {
        let n = self.gamma.len();
        DMatrix::from_fn(n, n, |k, j| self.gamma[k][(p, j)])
    }

    pub fn symmetry_residual(&self) -> f64 {
        self.gamma.iter().map(|m| (m - m.transpose()).amax()).fold(0.0, f64::max)
    }
}

fn inverse_at(jet: &MatJet, x: &[f64]) -> Result<DMatrix<f64>> {
    let inv = jet.v.clone().try_inverse().ok_or_else(|| Error::SingularMetric { point: x.to_vec() })?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMetric { point: x.to_vec() });
    }
    Ok(inv)
}

/// Christoffel symbols of the first kind `Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_il - ∂_l g_ij)`.
fn first_kind(d: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let n = d.len();
    (0..n)
        .map(|l| DMatrix::from_fn(n, n, |i, j| 0.5 * (d[i][(j, l)] + d[j][(i, l)] - d[l][(i, j)])))
        .collect()
}

pub fn christoffel_from_jet(jet: &MatJet, x: &[f64]) -> Result<Christoffel> {
    let n = jet.v.nrows();
    let ginv = inverse_at(jet, x)?;
    let low = first_kind(&jet.d);
    let gamma = (0..n)
        .map(|k| {
            let mut m = DMatrix::zeros(n, n);
            for (l, lk) in low.iter().enumerate() {
                let c = ginv[(k, l)];
                if c != 0.0 {
                    m += lk * c;
                }
            }
            m
        })
        .collect();
    Ok(Christoffel { gamma })
}

pub fn christoffel(metric: &dyn MetricField, x: &[f64]) -> Result<Christoffel> {
    christoffel_from_jet(&metric.jet(x), x)
}

/// `R^i_{jkl}` stored as `r[i][j][k][l]`.
pub type Riemann = Vec<Vec<Vec<Vec<f64>>>>;

/// Riemann tensor from `Γ` and its exact first derivatives.
pub fn riemann_from_christoffel(jet: &MatJet, x: &[f64]) -> Result<Riemann> {
    let n = jet.v.nrows();
    let ginv = inverse_at(jet, x)?;
    let low = first_kind(&jet.d);
    let gamma = christoffel_from_jet(jet, x)?.gamma;
    // ∂_p Γ^k_{ij} = ∂_p(g^{kl}) Γ_{l,ij} + g^{kl} ∂_p Γ_{l,ij}
    let dgamma: Vec<Vec<DMatrix<f64>>> = (0..n)
        .map(|p| {
            let dginv = -(&ginv * &jet.d[p] * &ginv);
            let dlow = first_kind(&jet.dd[p]);
            (0..n)
                .map(|k| {
                    let mut m = DMatrix::zeros(n, n);
                    for l in 0..n {
                        m += &low[l] * dginv[(k, l)] + &dlow[l] * ginv[(k, l)];
                    }
                    m
                })
                .collect()
        })
        .collect();
    let mut r = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = dgamma[k][i][(l, j)] - dgamma[l][i][(k, j)];
                    for m in 0..n {
                        v += gamma[i][(k, m)] * gamma[m][(l, j)] - gamma[i][(l, m)] * gamma[m][(k, j)];
                    }
                    r[i][j][k][l] = v;
                }
            }
        }
    }
    Ok(r)
}

/// Raise the first index of a fully covariant tensor `R_{ijkl}`.
pub fn raise_first(lowered: &Riemann, ginv: &DMatrix<f64>) -> Riemann {
    let n = lowered.len();
    let mut r = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for i in 0..n {
        for m in 0..n {
            let c = ginv[(i, m)];
            if c == 0.0 {
                continue;
            }
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        r[i][j][k][l] += c * lowered[m][j][k][l];
                    }
                }
            }
        }
    }
    r
}

/// Package `R^i_{jkl}` as an operator on `so(g)`.
pub fn operator_from_riemann(r: &Riemann, g: &BilinearForm) -> SectionalRep {
    let n = r.len();
    let ginv = g.inverse().clone();
    SectionalRep::from_action(g, |x| {
        let w = x * &ginv;
        DMatrix::from_fn(n, n, |i, j| {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += r[i][j][k][l] * w[(k, l)];
                }
            }
            0.5 * s
        })
    })
}

pub fn metric_form(metric: &dyn MetricField, x: &[f64]) -> Result<BilinearForm> {
    BilinearForm::new(metric.metric(x)).map_err(|_| Error::SingularMetric { point: x.to_vec() })
}

/// Curvature operator at `x` from the `∂Γ` expression.
pub fn curvature_from_christoffel(metric: &dyn MetricField, x: &[f64]) -> Result<SectionalRep> {
    let jet = metric.jet(x);
    let form = BilinearForm::new(jet.v.clone()).map_err(|_| Error::SingularMetric { point: x.to_vec() })?;
    let r = riemann_from_christoffel(&jet, x)?;
    Ok(operator_from_riemann(&r, &form))
}

/// Black-box metric differentiated by central differences with one Richardson step.
pub struct FiniteDifferenceMetric<F> {
    dim: usize,
    step: f64,
    eval: F,
}

impl<F> FiniteDifferenceMetric<F>
where
    F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync,
{
    pub const DEFAULT_STEP: f64 = 1e-4;

    pub fn new(dim: usize, eval: F) -> Self {
        Self { dim, step: Self::DEFAULT_STEP, eval }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    fn at(&self, x: &[f64], shifts: &[(usize, f64)]) -> DMatrix<f64> {
        let mut y = x.to_vec();
        for &(p, s) in shifts {
            y[p] += s;
        }
        (self.eval)(&y)
    }

    fn first(&self, x: &[f64], p: usize, h: f64) -> DMatrix<f64> {
        (self.at(x, &[(p, h)]) - self.at(x, &[(p, -h)])) / (2.0 * h)
    }

    fn second(&self, x: &[f64], p: usize, q: usize, h: f64) -> DMatrix<f64> {
        if p == q {
            (self.at(x, &[(p, h)]) - self.at(x, &[]) * 2.0 + self.at(x, &[(p, -h)])) / (h * h)
        } else {
            (self.at(x, &[(p, h), (q, h)]) - self.at(x, &[(p, h), (q, -h)]) - self.at(x, &[(p, -h), (q, h)])
                + self.at(x, &[(p, -h), (q, -h)]))
                / (4.0 * h * h)
        }
    }
}

impl<F> MetricField for FiniteDifferenceMetric<F>
where
    F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        (self.eval)(x)
    }

    fn jet(&self, x: &[f64]) -> MatJet {
        let n = self.dim;
        let h = self.step;
        let mut jet = MatJet::constant((self.eval)(x), n);
        for p in 0..n {
            jet.d[p] = (self.first(x, p, h / 2.0) * 4.0 - self.first(x, p, h)) / 3.0;
            for q in p..n {
                let s = (self.second(x, p, q, h / 2.0) * 4.0 - self.second(x, p, q, h)) / 3.0;
                jet.dd[q][p] = s.clone();
                jet.dd[p][q] = s;
            }
        }
        jet
    }
}
