use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{AssistError, Result};
use crate::matrix::DenseMatrix;
use crate::rng::{derive_seed, rng_from};

/// Θ(i, j) = log(1 + max(i, j)/d) with 1-based indices.
pub fn gen_max_graphon(d: usize) -> DenseMatrix {
    DenseMatrix::from_fn(d, d, |i, j| (1.0 + (i.max(j) + 1) as f64 / d as f64).ln())
}

/// M(i, j) = |i - j|.
pub fn gen_banded(d: usize) -> DenseMatrix {
    DenseMatrix::from_fn(d, d, |i, j| i.abs_diff(j) as f64)
}

pub fn gen_identity(d: usize) -> DenseMatrix {
    DenseMatrix::identity(d)
}

/// Stochastic block matrix with balanced, seeded row and column
/// memberships: entry (i, j) is `means[row_block(i), col_block(j)]`.
pub fn gen_sbm(d: usize, blocks: usize, means: &DenseMatrix, seed: u64) -> Result<DenseMatrix> {
    if blocks == 0 || blocks > d {
        return Err(AssistError::InvalidInput(format!(
            "need 1 <= blocks <= d, got {blocks}"
        )));
    }
    if means.shape() != (blocks, blocks) {
        return Err(AssistError::mismatch(
            format!("{blocks}x{blocks} means"),
            format!("{:?}", means.shape()),
        ));
    }
    let labels = |tag: u64| {
        let mut l: Vec<usize> = (0..d).map(|i| i % blocks).collect();
        l.shuffle(&mut rng_from(derive_seed(seed, &[tag])));
        l
    };
    let (rows, cols) = (labels(0), labels(1));
    Ok(DenseMatrix::from_fn(d, d, |i, j| means.get(rows[i], cols[j])))
}

/// Entrywise logistic g(b) = 1/(1 + exp(-c·b)).
pub fn gen_monotone_transform(m: &DenseMatrix, c: f64) -> DenseMatrix {
    m.map(|b| 1.0 / (1.0 + (-c * b).exp()))
}

/// B = U·Vᵀ with d×r standard normal factors.
pub fn gen_gaussian_low_rank(d: usize, r: usize, seed: u64) -> DenseMatrix {
    let mut rng = rng_from(seed);
    let u = DenseMatrix::from_fn(d, r, |_, _| StandardNormal.sample(&mut rng));
    let v = DenseMatrix::from_fn(d, r, |_, _| StandardNormal.sample(&mut rng));
    u.matmul_transpose(&v).expect("shapes agree")
}
