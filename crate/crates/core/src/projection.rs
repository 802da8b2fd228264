//! Best Frobenius approximation under a joint rank and two-way support budget.
//!
//! The feasible set is {S : rank(S) ≤ r, at most s1 nonzero rows, at most s2
//! nonzero columns}. For a fixed row set R and column set C the best feasible
//! point is the rank-r truncation of `m` restricted to R×C, so the problem
//! reduces to choosing (R, C). Small instances are enumerated exhaustively;
//! larger ones alternate between column selection given rows and row
//! selection given columns, keeping the best candidate seen.

use crate::error::{AssistError, Result};
use crate::matrix::DenseMatrix;
use crate::types::validate_budgets;

/// Supports are enumerated exhaustively when there are at most this many.
pub const EXHAUSTIVE_SUPPORT_LIMIT: u128 = 4096;

/// Relative singular-value cutoff used to decide numerical rank.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSvd {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

impl TruncatedSvd {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        let r = self.singular_values.len();
        for i in 0..us.rows() {
            for k in 0..r {
                us.set(i, k, us.get(i, k) * self.singular_values[k]);
            }
        }
        us.matmul_transpose(&self.v).expect("factor widths agree")
    }
}

/// Thin SVD keeping the top `r` triplets. Each singular pair is oriented so
/// the largest-magnitude entry of its left vector is positive; pairs with a
/// zero singular value are returned as zero vectors.
pub fn truncated_svd(m: &DenseMatrix, r: usize) -> Result<TruncatedSvd> {
    let (d1, d2) = m.shape();
    if r == 0 || r > d1.min(d2) {
        return Err(AssistError::InvalidInput(format!(
            "rank {r} out of range for {d1}x{d2} matrix"
        )));
    }
    let svd = m.to_nalgebra().svd(true, true);
    let (u_full, vt_full) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(AssistError::SolverDivergence("svd failed to converge".into())),
    };
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let mut u = DenseMatrix::zeros(d1, r);
    let mut v = DenseMatrix::zeros(d2, r);
    let mut s = Vec::with_capacity(r);
    for (k, &idx) in order.iter().take(r).enumerate() {
        let sigma = sv[idx];
        s.push(sigma);
        if sigma <= 0.0 {
            continue;
        }
        let mut pivot = 0;
        for i in 0..d1 {
            if u_full[(i, idx)].abs() > u_full[(pivot, idx)].abs() {
                pivot = i;
            }
        }
        let flip = if u_full[(pivot, idx)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d1 {
            u.set(i, k, flip * u_full[(i, idx)]);
        }
        for j in 0..d2 {
            v.set(j, k, flip * vt_full[(idx, j)]);
        }
    }
    Ok(TruncatedSvd {
        u,
        singular_values: s,
        v,
    })
}

/// All singular values in nonincreasing order.
pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.to_nalgebra().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// True when `m` already meets the rank and support budgets.
pub fn is_feasible(m: &DenseMatrix, r: usize, s1: usize, s2: usize) -> bool {
    if m.nonzero_rows() > s1 || m.nonzero_cols() > s2 {
        return false;
    }
    let s = singular_values(m);
    match (s.first(), s.get(r)) {
        (Some(&top), Some(&next)) => next <= RANK_TOL * top,
        _ => true,
    }
}

/// Best sparse low-rank approximation of `m` (see module docs).
pub fn project_sparse_lowrank(m: &DenseMatrix, r: usize, s1: usize, s2: usize, iters: usize) -> Result<DenseMatrix> {
    let (d1, d2) = m.shape();
    validate_budgets(r, s1, s2, d1, d2)?;
    if iters == 0 {
        return Err(AssistError::InvalidInput("projection needs at least one round".into()));
    }
    if is_feasible(m, r, s1, s2) {
        return Ok(m.clone());
    }
    let best = if binomial(d1, s1).saturating_mul(binomial(d2, s2)) <= EXHAUSTIVE_SUPPORT_LIMIT {
        exhaustive(m, r, s1, s2)?
    } else {
        alternating(m, r, s1, s2, iters)?
    };
    Ok(embed(&best.approx, &best.rows, &best.cols, d1, d2))
}

struct Candidate {
    rows: Vec<usize>,
    cols: Vec<usize>,
    approx: DenseMatrix,
    /// Captured energy Σₖ σₖ² of the restricted truncation; larger is closer.
    energy: f64,
}

fn restricted_candidate(m: &DenseMatrix, rows: Vec<usize>, cols: Vec<usize>, r: usize) -> Result<Candidate> {
    let sub = submatrix(m, &rows, &cols);
    let svd = truncated_svd(&sub, r.min(rows.len()).min(cols.len()))?;
    let energy = svd.singular_values.iter().map(|s| s * s).sum();
    Ok(Candidate {
        rows,
        cols,
        approx: svd.reconstruct(),
        energy,
    })
}

fn exhaustive(m: &DenseMatrix, r: usize, s1: usize, s2: usize) -> Result<Candidate> {
    let row_sets = combinations(m.rows(), s1);
    let col_sets = combinations(m.cols(), s2);
    let mut best: Option<Candidate> = None;
    for rows in &row_sets {
        for cols in &col_sets {
            let sub = submatrix(m, rows, cols);
            let energy: f64 = singular_values(&sub).iter().take(r).map(|s| s * s).sum();
            if best.as_ref().is_none_or(|b| energy > b.energy) {
                best = Some(Candidate {
                    rows: rows.clone(),
                    cols: cols.clone(),
                    approx: sub,
                    energy,
                });
            }
        }
    }
    let best = best.expect("at least one support");
    restricted_candidate(m, best.rows, best.cols, r)
}

fn alternating(m: &DenseMatrix, r: usize, s1: usize, s2: usize, iters: usize) -> Result<Candidate> {
    let all_rows: Vec<usize> = (0..m.rows()).collect();
    let all_cols: Vec<usize> = (0..m.cols()).collect();
    let lowrank = truncated_svd(m, r)?.reconstruct();
    let starts = [top_k(&lowrank.row_norms(), s1), top_k(&m.row_norms(), s1)];

    let mut best: Option<Candidate> = None;
    for start in starts {
        let mut rows = start;
        let mut prev: Option<(Vec<usize>, Vec<usize>)> = None;
        for _ in 0..iters {
            let by_rows = submatrix(m, &rows, &all_cols);
            let cols = top_k(&rank_truncate(&by_rows, r)?.col_norms(), s2);
            let by_cols = submatrix(m, &all_rows, &cols);
            let next_rows = top_k(&rank_truncate(&by_cols, r)?.row_norms(), s1);
            let cand = restricted_candidate(m, next_rows.clone(), cols.clone(), r)?;
            if best.as_ref().is_none_or(|b| cand.energy > b.energy) {
                best = Some(cand);
            }
            let state = (next_rows.clone(), cols);
            if prev.as_ref() == Some(&state) {
                break;
            }
            prev = Some(state);
            rows = next_rows;
        }
    }
    Ok(best.expect("at least one round"))
}

fn rank_truncate(m: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    let k = r.min(m.rows()).min(m.cols());
    Ok(truncated_svd(m, k)?.reconstruct())
}

/// Indices of the `k` largest values, ties to the lowest index, returned sorted.
fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

fn submatrix(m: &DenseMatrix, rows: &[usize], cols: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), cols.len(), |i, j| m.get(rows[i], cols[j]))
}

fn embed(sub: &DenseMatrix, rows: &[usize], cols: &[usize], d1: usize, d2: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(d1, d2);
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            out.set(i, j, sub.get(a, b));
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // advance to the next lexicographic k-subset
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}
