use crate::completion::ObservedMatrix;
use crate::error::{AssistError, Result};
use crate::matrix::DenseMatrix;
use crate::projection::truncated_svd;

const STALL_TOL: f64 = 1e-14;

type Cell = (usize, usize, f64);

/// Observed cells (duplicates averaged, raw scale) and the mean-filled start.
fn mean_filled(obs: &ObservedMatrix) -> Result<(Vec<Cell>, DenseMatrix)> {
    if obs.is_empty() {
        return Err(AssistError::InvalidInput("no observed entries".into()));
    }
    let (d1, d2) = obs.dims();
    let mut sum = DenseMatrix::zeros(d1, d2);
    let mut count = vec![0usize; d1 * d2];
    for (i, j, y) in obs.raw_entries() {
        sum.set(i, j, sum.get(i, j) + y);
        count[i * d2 + j] += 1;
    }
    let mut cells = Vec::new();
    for (t, &c) in count.iter().enumerate() {
        if c > 0 {
            let (i, j) = (t / d2, t % d2);
            cells.push((i, j, sum.get(i, j) / c as f64));
        }
    }
    let mean = cells.iter().map(|c| c.2).sum::<f64>() / cells.len() as f64;
    let mut m = DenseMatrix::from_fn(d1, d2, |_, _| mean);
    for &(i, j, y) in &cells {
        m.set(i, j, y);
    }
    Ok((cells, m))
}

fn reset_observed(z: &DenseMatrix, cells: &[Cell]) -> DenseMatrix {
    let mut m = z.clone();
    for &(i, j, y) in cells {
        m.set(i, j, y);
    }
    m
}

/// Hard impute: mean-fill, then alternate rank-r truncation with resetting
/// the observed entries. Returns the final rank-r truncation.
pub fn svd_impute_baseline(obs: &ObservedMatrix, r: usize, iters: usize) -> Result<DenseMatrix> {
    let (d1, d2) = obs.dims();
    if r == 0 || r > d1.min(d2) {
        return Err(AssistError::InfeasibleBudget(format!(
            "rank {r} infeasible for {d1}x{d2}"
        )));
    }
    let (cells, mut m) = mean_filled(obs)?;
    let mut z = truncated_svd(&m, r)?.reconstruct();
    for _ in 0..iters {
        m = reset_observed(&z, &cells);
        let next = truncated_svd(&m, r)?.reconstruct();
        let change = next.sub(&z).frobenius_norm();
        z = next;
        if change <= STALL_TOL * z.frobenius_norm().max(1.0) {
            break;
        }
    }
    Ok(z)
}

/// Soft impute: iterate singular value soft-thresholding with observed
/// entry reset; the threshold is `relative_shrink·σ₁` of the mean-filled
/// start.
pub fn soft_impute_baseline(obs: &ObservedMatrix, relative_shrink: f64, iters: usize) -> Result<DenseMatrix> {
    if !(relative_shrink >= 0.0) {
        return Err(AssistError::InvalidInput(format!(
            "shrinkage must be >= 0, got {relative_shrink}"
        )));
    }
    let (d1, d2) = obs.dims();
    let full = d1.min(d2);
    let (cells, mut m) = mean_filled(obs)?;
    let threshold = relative_shrink * truncated_svd(&m, 1)?.singular_values[0];
    let shrink = |m: &DenseMatrix| -> Result<DenseMatrix> {
        let mut svd = truncated_svd(m, full)?;
        for s in &mut svd.singular_values {
            *s = (*s - threshold).max(0.0);
        }
        Ok(svd.reconstruct())
    };
    let mut z = shrink(&m)?;
    for _ in 0..iters {
        m = reset_observed(&z, &cells);
        let next = shrink(&m)?;
        let change = next.sub(&z).frobenius_norm();
        z = next;
        if change <= STALL_TOL * z.frobenius_norm().max(1.0) {
            break;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_cells(d1: usize, d2: usize) -> Vec<(usize, usize)> {
        (0..d1).flat_map(|i| (0..d2).map(move |j| (i, j))).collect()
    }

    #[test]
    fn fully_observed_low_rank_is_returned() {
        let u = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 1.0], vec![-1.0, 2.0], vec![0.3, 0.3]]).unwrap();
        let v = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, -1.0], vec![0.0, 1.0]]).unwrap();
        let m = u.matmul_transpose(&v).unwrap();
        let obs = ObservedMatrix::from_matrix(&m, &all_cells(4, 3)).unwrap();
        assert!(svd_impute_baseline(&obs, 2, 50).unwrap().sub(&m).max_abs() < 1e-8);
        assert!(svd_impute_baseline(&obs, 3, 50).unwrap().sub(&m).max_abs() < 1e-8);
    }

    #[test]
    fn one_missing_entry_of_rank_one_is_recovered() {
        let m = DenseMatrix::from_fn(4, 4, |i, j| (i + 1) as f64 * (j as f64 + 0.5));
        let cells: Vec<_> = all_cells(4, 4).into_iter().filter(|&c| c != (2, 1)).collect();
        let obs = ObservedMatrix::from_matrix(&m, &cells).unwrap();
        let z = svd_impute_baseline(&obs, 1, 5000).unwrap();
        assert!((z.get(2, 1) - m.get(2, 1)).abs() < 1e-6, "{}", z.get(2, 1));
    }

    #[test]
    fn soft_impute_without_shrinkage_keeps_full_observations() {
        let m = DenseMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64 / 9.0);
        let obs = ObservedMatrix::from_matrix(&m, &all_cells(3, 3)).unwrap();
        assert!(soft_impute_baseline(&obs, 0.0, 10).unwrap().sub(&m).max_abs() < 1e-10);
        let shrunk = soft_impute_baseline(&obs, 0.2, 10).unwrap();
        assert!(shrunk.frobenius_norm() < m.frobenius_norm());
    }

    #[test]
    fn rejects_infeasible_rank() {
        let obs = ObservedMatrix::from_raw(2, 3, &[(0, 0, 1.0)]).unwrap();
        assert!(svd_impute_baseline(&obs, 3, 5).is_err());
    }
}
