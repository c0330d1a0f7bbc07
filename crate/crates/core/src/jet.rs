//! Second-order jets: a value together with its first and second partial
//! derivatives in `dim` coordinates. Used to differentiate metrics and the
//! comparison tensor exactly through products, inverses and determinants.

use nalgebra::{DMatrix, DVector};

/// Scalar function with gradient `d` and Hessian `dd` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarJet {
    pub v: f64,
    pub d: DVector<f64>,
    pub dd: DMatrix<f64>,
}

impl ScalarJet {
    pub fn constant(v: f64, dim: usize) -> Self {
        Self { v, d: DVector::zeros(dim), dd: DMatrix::zeros(dim, dim) }
    }

    /// The coordinate function `x_i` at `x`.
    pub fn coordinate(x: &[f64], i: usize) -> Self {
        let mut s = Self::constant(x[i], x.len());
        s.d[i] = 1.0;
        s
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { v: self.v + o.v, d: &self.d + &o.d, dd: &self.dd + &o.dd }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { v: self.v * s, d: &self.d * s, dd: &self.dd * s }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let cross = &self.d * o.d.transpose();
        Self {
            v: self.v * o.v,
            d: &self.d * o.v + &o.d * self.v,
            dd: &self.dd * o.v + &o.dd * self.v + &cross + cross.transpose(),
        }
    }

    /// `f(self)` given `f`, `f'`, `f''` at the value.
    pub fn compose(&self, f: f64, f1: f64, f2: f64) -> Self {
        Self { v: f, d: &self.d * f1, dd: &self.dd * f1 + &self.d * self.d.transpose() * f2 }
    }

    pub fn recip(&self) -> Self {
        let v = self.v;
        self.compose(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    pub fn div(&self, o: &Self) -> Self {
        self.mul(&o.recip())
    }

    /// `|v|^e`, valid away from `v = 0`.
    pub fn abs_powf(&self, e: f64) -> Self {
        let s = self.v.signum();
        let a = self.v.abs();
        // d/dv |v|^e = e s |v|^{e-1}, d²/dv² = e (e-1) |v|^{e-2}
        self.compose(a.powf(e), e * s * a.powf(e - 1.0), e * (e - 1.0) * a.powf(e - 2.0))
    }
}

/// Matrix-valued function with partial derivatives `d[p]` and `dd[p][q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatJet {
    pub v: DMatrix<f64>,
    pub d: Vec<DMatrix<f64>>,
    pub dd: Vec<Vec<DMatrix<f64>>>,
}

impl MatJet {
    pub fn constant(v: DMatrix<f64>, dim: usize) -> Self {
        let z = DMatrix::zeros(v.nrows(), v.ncols());
        Self { d: vec![z.clone(); dim], dd: vec![vec![z; dim]; dim], v }
    }

    /// Assemble a matrix jet entry by entry.
    pub fn from_entries(rows: usize, cols: usize, dim: usize, f: impl Fn(usize, usize) -> ScalarJet) -> Self {
        let mut out = Self::constant(DMatrix::zeros(rows, cols), dim);
        for i in 0..rows {
            for j in 0..cols {
                let s = f(i, j);
                out.v[(i, j)] = s.v;
                for p in 0..dim {
                    out.d[p][(i, j)] = s.d[p];
                    for q in 0..dim {
                        out.dd[p][q][(i, j)] = s.dd[(p, q)];
                    }
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> ScalarJet {
        let dim = self.dim();
        ScalarJet {
            v: self.v[(i, j)],
            d: DVector::from_fn(dim, |p, _| self.d[p][(i, j)]),
            dd: DMatrix::from_fn(dim, dim, |p, q| self.dd[p][q][(i, j)]),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let dim = self.dim();
        let d: Vec<DMatrix<f64>> = (0..dim).map(|p| &self.d[p] * &o.v + &self.v * &o.d[p]).collect();
        let dd = (0..dim)
            .map(|p| {
                (0..dim)
                    .map(|q| {
                        &self.dd[p][q] * &o.v
                            + &self.d[p] * &o.d[q]
                            + &self.d[q] * &o.d[p]
                            + &self.v * &o.dd[p][q]
                    })
                    .collect()
            })
            .collect();
        Self { v: &self.v * &o.v, d, dd }
    }

    pub fn scale_by(&self, s: &ScalarJet) -> Self {
        let dim = self.dim();
        let d = (0..dim).map(|p| &self.d[p] * s.v + &self.v * s.d[p]).collect();
        let dd = (0..dim)
            .map(|p| {
                (0..dim)
                    .map(|q| {
                        &self.dd[p][q] * s.v
                            + &self.d[p] * s.d[q]
                            + &self.d[q] * s.d[p]
                            + &self.v * s.dd[(p, q)]
                    })
                    .collect()
            })
            .collect();
        Self { v: &self.v * s.v, d, dd }
    }

    /// `None` when the value is singular.
    pub fn inverse(&self) -> Option<Self> {
        let dim = self.dim();
        let w = self.v.clone().try_inverse()?;
        let wd: Vec<DMatrix<f64>> = (0..dim).map(|p| &w * &self.d[p] * &w).collect();
        let d = wd.iter().map(|m| -m).collect();
        let dd = (0..dim)
            .map(|p| {
                (0..dim)
                    .map(|q| {
                        // d²(W) = W A_p W A_q W + W A_q W A_p W - W A_pq W
                        &wd[p] * &self.d[q] * &w + &wd[q] * &self.d[p] * &w - &w * &self.dd[p][q] * &w
                    })
                    .collect()
            })
            .collect();
        Some(Self { v: w, d, dd })
    }

    pub fn trace(&self) -> ScalarJet {
        let dim = self.dim();
        ScalarJet {
            v: self.v.trace(),
            d: DVector::from_fn(dim, |p, _| self.d[p].trace()),
            dd: DMatrix::from_fn(dim, dim, |p, q| self.dd[p][q].trace()),
        }
    }

    /// Determinant via Jacobi's formula; needs an invertible value.
    pub fn determinant(&self) -> Option<ScalarJet> {
        let dim = self.dim();
        let det = self.v.determinant();
        let w = self.v.clone().try_inverse()?;
        let t: Vec<DMatrix<f64>> = (0..dim).map(|p| &w * &self.d[p]).collect();
        let tr: Vec<f64> = t.iter().map(|m| m.trace()).collect();
        let d = DVector::from_fn(dim, |p, _| det * tr[p]);
        let dd = DMatrix::from_fn(dim, dim, |p, q| {
            let second = (&w * &self.dd[p][q]).trace() - (&t[q] * &t[p]).trace();
            det * (tr[p] * tr[q] + second)
        });
        Some(ScalarJet { v: det, d, dd })
    }
}
