//! Canonical `(A, g)` pairs built from a list of real Jordan blocks.
//!
//! Each block `J_k(λ)` is upper triangular with `λ` on the diagonal and ones on
//! the superdiagonal; its share of `g` is `sign` times the `k x k` anti-diagonal
//! unit matrix. With this choice `gA = A^T g` holds entry by entry, so the pair
//! is exact in floating point.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::BilinearForm;
use crate::poly::MatrixPolynomial;

fn default_sign() -> i8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JordanBlock {
    pub lambda: f64,
    pub size: usize,
    #[serde(default = "default_sign")]
    pub sign: i8,
    /// Imaginary part of the eigenvalue; only `0` is accepted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imag: Option<f64>,
}

impl JordanBlock {
    pub fn new(lambda: f64, size: usize) -> Self {
        Self { lambda, size, sign: 1, imag: None }
    }

    pub fn with_sign(mut self, sign: i8) -> Self {
        self.sign = sign;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockOrder {
    /// Blocks appear in the order given.
    #[default]
    AsListed,
    /// Stable sort by eigenvalue, larger blocks first within an eigenvalue.
    Grouped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JordanSpec {
    pub blocks: Vec<JordanBlock>,
    #[serde(default)]
    pub order: BlockOrder,
}

impl JordanSpec {
    pub fn new(blocks: Vec<JordanBlock>) -> Self {
        Self { blocks, order: BlockOrder::AsListed }
    }

    /// `diag(values)` with positive signs.
    pub fn diagonal(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&l| JordanBlock::new(l, 1)).collect())
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::InvalidJordanSpec("no blocks".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.size == 0 {
                return Err(Error::InvalidJordanSpec(format!("block {i} has size 0")));
            }
            if b.sign != 1 && b.sign != -1 {
                return Err(Error::InvalidJordanSpec(format!("block {i} has sign {}, expected ±1", b.sign)));
            }
            if !b.lambda.is_finite() {
                return Err(Error::InvalidJordanSpec(format!("block {i} has non-finite eigenvalue")));
            }
            if b.imag.is_some_and(|im| im != 0.0) {
                return Err(Error::InvalidJordanSpec(format!(
                    "block {i}: complex eigenvalues are not supported"
                )));
            }
        }
        Ok(())
    }

    fn ordered_blocks(&self) -> Vec<JordanBlock> {
        let mut blocks = self.blocks.clone();
        if self.order == BlockOrder::Grouped {
            blocks.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(b.size.cmp(&a.size)));
        }
        blocks
    }

    pub fn realize(&self) -> Result<RealizedJordan> {
        realize_jordan(self)
    }
}

/// `(A, g)` in the adapted basis together with the block layout.
#[derive(Debug, Clone)]
pub struct RealizedJordan {
    pub a: DMatrix<f64>,
    pub g: BilinearForm,
    blocks: Vec<JordanBlock>,
    ranges: Vec<Range<usize>>,
    signature: (usize, usize),
}

pub fn realize_jordan(spec: &JordanSpec) -> Result<RealizedJordan> {
    spec.validate()?;
    let blocks = spec.ordered_blocks();
    let n = spec.dim();
    let mut a = DMatrix::zeros(n, n);
    let mut g = DMatrix::zeros(n, n);
    let mut ranges = Vec::with_capacity(blocks.len());
    let (mut p, mut q) = (0, 0);
    let mut off = 0;
    for b in &blocks {
        let k = b.size;
        for i in 0..k {
            a[(off + i, off + i)] = b.lambda;
            if i + 1 < k {
                a[(off + i, off + i + 1)] = 1.0;
            }
            g[(off + i, off + k - 1 - i)] = f64::from(b.sign);
        }
        // Anti-diagonal ±1 block: k/2 of each sign, the middle entry carries `sign`.
        p += k / 2;
        q += k / 2;
        if k % 2 == 1 {
            if b.sign > 0 {
                p += 1;
            } else {
                q += 1;
            }
        }
        ranges.push(off..off + k);
        off += k;
    }
    let g = BilinearForm::new(g)?;
    debug_assert_eq!(g.signature(), (p, q));
    Ok(RealizedJordan { a, g, blocks, ranges, signature: (p, q) })
}

impl RealizedJordan {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn blocks(&self) -> &[JordanBlock] {
        &self.blocks
    }

    /// Coordinate range occupied by each block.
    pub fn block_ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    /// Signature computed combinatorially from the block data.
    pub fn signature(&self) -> (usize, usize) {
        self.signature
    }

    /// Distinct eigenvalues in order of first appearance.
    pub fn distinct_eigenvalues(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for b in &self.blocks {
            if !out.contains(&b.lambda) {
                out.push(b.lambda);
            }
        }
        out
    }

    /// Coordinates spanning the generalized eigenspace of `lambda`.
    pub fn eigenspace_indices(&self, lambda: f64) -> Vec<usize> {
        self.blocks
            .iter()
            .zip(&self.ranges)
            .filter(|(b, _)| b.lambda == lambda)
            .flat_map(|(_, r)| r.clone())
            .collect()
    }

    pub fn max_block_size(&self, lambda: f64) -> usize {
        self.blocks.iter().filter(|b| b.lambda == lambda).map(|b| b.size).max().unwrap_or(0)
    }

    pub fn block_count(&self, lambda: f64) -> usize {
        self.blocks.iter().filter(|b| b.lambda == lambda).count()
    }

    /// `prod (t - λ_i)^{largest block of λ_i}`, assembled from the block data.
    pub fn minimal_polynomial(&self) -> MatrixPolynomial {
        let roots: Vec<(f64, usize)> = self
            .distinct_eigenvalues()
            .into_iter()
            .map(|l| (l, self.max_block_size(l)))
            .collect();
        MatrixPolynomial::from_roots(&roots)
    }

    /// Minimal polynomial of `A` restricted to the sum of blocks `alpha` and `beta`.
    pub fn pair_minimal_polynomial(&self, alpha: usize, beta: usize) -> MatrixPolynomial {
        let (ba, bb) = (&self.blocks[alpha], &self.blocks[beta]);
        if alpha == beta {
            MatrixPolynomial::from_roots(&[(ba.lambda, ba.size)])
        } else if ba.lambda == bb.lambda {
            MatrixPolynomial::from_roots(&[(ba.lambda, ba.size.max(bb.size))])
        } else {
            MatrixPolynomial::from_roots(&[(ba.lambda, ba.size), (bb.lambda, bb.size)])
        }
    }

    /// True when every eigenvalue has at most two Jordan blocks.
    pub fn at_most_two_blocks(&self) -> bool {
        self.distinct_eigenvalues().into_iter().all(|l| self.block_count(l) <= 2)
    }
}
