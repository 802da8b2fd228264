//! Matrix completion as a sign-series problem: each level fits a rank-r score
//! matrix Z_π to the signs of the observed entries, weighted by |Y(ω) - π|,
//! and the estimate is the mean of sgn(Z_π) over levels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{fit_level, LevelProblem, PrimalPoint};
use crate::error::{AssistError, Result};
use crate::loss::{hinge, psi, sgn, LossKind};
use crate::matrix::DenseMatrix;
use crate::registry::{GlobalRegistry, Registry};
use crate::rng::derive_seed;
use crate::simgen::{soft_impute_baseline, svd_impute_baseline};
use crate::types::{Hyperparams, LevelGrid, ResponseScale};

/// Observed entries of a d1×d2 matrix. Responses are stored rescaled.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedMatrix {
    d1: usize,
    d2: usize,
    entries: Vec<(usize, usize, f64)>,
    scale: ResponseScale,
}

impl ObservedMatrix {
    pub fn from_raw(d1: usize, d2: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let raw: Vec<f64> = triplets.iter().map(|t| t.2).collect();
        let scale = ResponseScale::fit(&raw)?;
        Self::with_scale(d1, d2, triplets, scale)
    }

    pub fn with_scale(d1: usize, d2: usize, triplets: &[(usize, usize, f64)], scale: ResponseScale) -> Result<Self> {
        if triplets.is_empty() {
            return Err(AssistError::InvalidInput("no observed entries".into()));
        }
        let mut entries = Vec::with_capacity(triplets.len());
        for (k, &(i, j, y)) in triplets.iter().enumerate() {
            if i >= d1 || j >= d2 {
                return Err(AssistError::InvalidInput(format!(
                    "entry {k} at ({i}, {j}) outside {d1}x{d2}"
                )));
            }
            if !y.is_finite() {
                return Err(AssistError::InvalidInput(format!("entry {k} is not finite")));
            }
            entries.push((i, j, scale.forward(y)));
        }
        Ok(ObservedMatrix { d1, d2, entries, scale })
    }

    /// Observes `m` at the given cells.
    pub fn from_matrix(m: &DenseMatrix, cells: &[(usize, usize)]) -> Result<Self> {
        let triplets: Vec<_> = cells
            .iter()
            .filter(|&&(i, j)| i < m.rows() && j < m.cols())
            .map(|&(i, j)| (i, j, m.get(i, j)))
            .collect();
        if triplets.len() != cells.len() {
            return Err(AssistError::InvalidInput("cell outside the matrix".into()));
        }
        Self::from_raw(m.rows(), m.cols(), &triplets)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// (i, j, rescaled y) triplets.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn raw_entries(&self) -> Vec<(usize, usize, f64)> {
        self.entries
            .iter()
            .map(|&(i, j, y)| (i, j, self.scale.inverse(y)))
            .collect()
    }

    pub fn scale(&self) -> ResponseScale {
        self.scale
    }
}

/// Factored score matrix Z_π = u·vᵀ of one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignFactor {
    pub level: f64,
    pub u: DenseMatrix,
    pub v: DenseMatrix,
}

impl SignFactor {
    pub fn score_matrix(&self) -> DenseMatrix {
        self.u
            .matmul_transpose(&self.v)
            .expect("factor widths agree by construction")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionModel {
    pub grid: LevelGrid,
    pub sign_factors: Vec<SignFactor>,
    pub scale: ResponseScale,
    pub dims: (usize, usize),
}

/// Level problem over observed cells. The primal step separates over
/// cells and each cell is minimized exactly.
struct CompletionLevel {
    d1: usize,
    d2: usize,
    /// Flat cell index and the (label, weight) pairs observed there.
    cells: Vec<(usize, Vec<(f64, f64)>)>,
    loss: LossKind,
}

impl CompletionLevel {
    fn new(obs: &ObservedMatrix, level: f64, loss: LossKind) -> Self {
        let (d1, d2) = obs.dims();
        let mut sorted: Vec<(usize, f64, f64)> = obs
            .entries()
            .iter()
            .map(|&(i, j, y)| (i * d2 + j, sgn(y - level), (y - level).abs()))
            .collect();
        sorted.sort_by_key(|t| t.0);
        let mut cells: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
        for (idx, label, weight) in sorted {
            match cells.last_mut() {
                Some((last, list)) if *last == idx => list.push((label, weight)),
                _ => cells.push((idx, vec![(label, weight)])),
            }
        }
        CompletionLevel { d1, d2, cells, loss }
    }

    fn cell_loss(&self, obs: &[(f64, f64)], x: f64) -> f64 {
        let f = match self.loss {
            LossKind::Psi => psi,
            _ => hinge,
        };
        obs.iter().map(|&(y, w)| w * f(y * x)).sum()
    }

    fn risk(&self, z: &DenseMatrix) -> f64 {
        let s = z.as_slice();
        self.cells.iter().map(|(idx, obs)| self.cell_loss(obs, s[*idx])).sum()
    }

    /// argmin_x μ(x - s̄)² + Σ w F(y x). The loss part is linear between the
    /// breakpoints {-1, 0, 1}, so the minimizer is a clamped stationary point
    /// of one region or a breakpoint.
    fn cell_argmin(&self, obs: &[(f64, f64)], mu: f64, sbar: f64) -> f64 {
        const KNOTS: [f64; 3] = [-1.0, 0.0, 1.0];
        let total = |x: f64| mu * (x - sbar) * (x - sbar) + self.cell_loss(obs, x);
        let regions = [
            (f64::NEG_INFINITY, -1.0, -2.0),
            (-1.0, 0.0, -0.5),
            (0.0, 1.0, 0.5),
            (1.0, f64::INFINITY, 2.0),
        ];
        let mut best_x = sbar;
        let mut best = total(sbar);
        let consider = |x: f64, best_x: &mut f64, best: &mut f64| {
            let v = total(x);
            if v < *best {
                *best = v;
                *best_x = x;
            }
        };
        for &(lo, hi, probe) in &regions {
            let slope = self.cell_loss(obs, probe + 0.25) - self.cell_loss(obs, probe - 0.25);
            let slope = slope / 0.5;
            let x = (sbar - slope / (2.0 * mu)).clamp(lo, hi);
            consider(x, &mut best_x, &mut best);
        }
        for &k in &KNOTS {
            consider(k, &mut best_x, &mut best);
        }
        best_x
    }
}

impl LevelProblem for CompletionLevel {
    fn dims(&self) -> (usize, usize, usize) {
        (self.d1, self.d2, 0)
    }

    fn primal(&mut self, center: &DenseMatrix, mu: f64, _warm: &PrimalPoint) -> Result<PrimalPoint> {
        let mut z = center.clone();
        let sbar = center.as_slice();
        for (idx, obs) in &self.cells {
            let x = self.cell_argmin(obs, mu, sbar[*idx]);
            z.set(idx / self.d2, idx % self.d2, x);
        }
        Ok(PrimalPoint::new(z, 0))
    }

    fn objective(&self, point: &PrimalPoint, lambda: f64) -> f64 {
        self.risk(&point.coef) + lambda * point.coef.frobenius_norm_sq()
    }

    fn refit_offsets(&self, _point: &mut PrimalPoint) {}

    fn has_intercept(&self) -> bool {
        false
    }

    fn reset(&mut self) {}
}

/// Fits one rank-r score matrix per level, with no support constraint and
/// no intercept.
pub fn fit_completion(obs: &ObservedMatrix, hp: &Hyperparams) -> Result<CompletionModel> {
    let (d1, d2) = obs.dims();
    if obs.is_empty() {
        return Err(AssistError::InvalidInput("no observed entries".into()));
    }
    if hp.r == 0 || hp.r > d1.min(d2) {
        return Err(AssistError::InfeasibleBudget(format!(
            "rank {} infeasible for {d1}x{d2}",
            hp.r
        )));
    }
    let base = Hyperparams {
        s1: d1,
        s2: d2,
        ..hp.clone()
    };
    base.validate_for(d1, d2)?;
    let grid = LevelGrid::new(hp.h)?;
    let fits: Vec<Result<SignFactor>> = grid
        .levels()
        .par_iter()
        .enumerate()
        .map(|(k, &level)| {
            let level_hp = Hyperparams {
                seed: derive_seed(hp.seed, &[k as u64]),
                ..base.clone()
            };
            let mut problem = CompletionLevel::new(obs, level, hp.loss);
            let (tf, _) = fit_level(&mut problem, level, &level_hp, None).map_err(|e| e.at_level(level))?;
            Ok(SignFactor {
                level,
                u: tf.u,
                v: tf.v,
            })
        })
        .collect();
    Ok(CompletionModel {
        grid,
        sign_factors: fits.into_iter().collect::<Result<_>>()?,
        scale: obs.scale(),
        dims: (d1, d2),
    })
}

/// Entrywise mean of sgn(Z_π) over levels, mapped back to the raw scale.
pub fn impute(model: &CompletionModel) -> DenseMatrix {
    let (d1, d2) = model.dims;
    let mut acc = DenseMatrix::zeros(d1, d2);
    for f in &model.sign_factors {
        acc.axpy(1.0, &f.score_matrix().map(sgn));
    }
    let count = model.sign_factors.len().max(1) as f64;
    acc.map(|s| model.scale.inverse(s / count))
}

/// Mean absolute error over `mask`, or over every entry when absent.
pub fn completion_mae(estimate: &DenseMatrix, truth: &DenseMatrix, mask: Option<&[(usize, usize)]>) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(AssistError::mismatch(
            format!("{:?}", truth.shape()),
            format!("{:?}", estimate.shape()),
        ));
    }
    match mask {
        None => {
            let n = estimate.as_slice().len();
            if n == 0 {
                return Err(AssistError::InvalidInput("empty matrix".into()));
            }
            let s: f64 = estimate
                .as_slice()
                .iter()
                .zip(truth.as_slice())
                .map(|(a, b)| (a - b).abs())
                .sum();
            Ok(s / n as f64)
        }
        Some(cells) => {
            if cells.is_empty() {
                return Err(AssistError::InvalidInput("empty mask".into()));
            }
            let (d1, d2) = truth.shape();
            let mut s = 0.0;
            for &(i, j) in cells {
                if i >= d1 || j >= d2 {
                    return Err(AssistError::InvalidInput(format!("mask cell ({i}, {j}) out of range")));
                }
                s += (estimate.get(i, j) - truth.get(i, j)).abs();
            }
            Ok(s / cells.len() as f64)
        }
    }
}

/// A matrix-completion method selectable by name.
pub trait Imputer: Send {
    fn name(&self) -> &'static str;
    fn impute(&self, obs: &ObservedMatrix, hp: &Hyperparams) -> Result<DenseMatrix>;
}

pub struct AssistImputer;

impl Imputer for AssistImputer {
    fn name(&self) -> &'static str {
        "assist"
    }

    fn impute(&self, obs: &ObservedMatrix, hp: &Hyperparams) -> Result<DenseMatrix> {
        fit_completion(obs, hp).map(|m| impute(&m))
    }
}

pub struct HardImputer {
    pub iters: usize,
}

impl Imputer for HardImputer {
    fn name(&self) -> &'static str {
        "hard-impute"
    }

    fn impute(&self, obs: &ObservedMatrix, hp: &Hyperparams) -> Result<DenseMatrix> {
        svd_impute_baseline(obs, hp.r, self.iters)
    }
}

/// Soft-threshold imputation; the threshold is `relative_shrink` times the
/// top singular value of the mean-filled matrix.
pub struct SoftImputer {
    pub relative_shrink: f64,
    pub iters: usize,
}

impl Imputer for SoftImputer {
    fn name(&self) -> &'static str {
        "soft-impute"
    }

    fn impute(&self, obs: &ObservedMatrix, _hp: &Hyperparams) -> Result<DenseMatrix> {
        soft_impute_baseline(obs, self.relative_shrink, self.iters)
    }
}

pub static IMPUTERS: GlobalRegistry<dyn Imputer> = GlobalRegistry::new(|| {
    let mut reg: Registry<dyn Imputer> = Registry::new("imputer");
    reg.register("assist", || Box::new(AssistImputer));
    reg.register("hard-impute", || Box::new(HardImputer { iters: 200 }));
    reg.register("soft-impute", || {
        Box::new(SoftImputer {
            relative_shrink: 0.05,
            iters: 200,
        })
    });
    reg
});

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::weighted_01_from_decisions;

    fn full_cells(d1: usize, d2: usize) -> Vec<(usize, usize)> {
        (0..d1).flat_map(|i| (0..d2).map(move |j| (i, j))).collect()
    }

    fn factor(level: f64, z: &DenseMatrix) -> SignFactor {
        SignFactor {
            level,
            u: z.clone(),
            v: DenseMatrix::identity(z.cols()),
        }
    }

    #[test]
    fn impute_examples() {
        let pos = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.5, 3.0]]).unwrap();
        let neg = pos.scaled(-1.0);
        let grid = LevelGrid::new(1).unwrap();
        let model = |fs: Vec<SignFactor>| CompletionModel {
            grid: grid.clone(),
            sign_factors: fs,
            scale: ResponseScale::IDENTITY,
            dims: (2, 2),
        };
        let all_pos = model(vec![factor(-1.0, &pos), factor(0.0, &pos), factor(1.0, &pos)]);
        assert_eq!(impute(&all_pos).as_slice(), &[1.0; 4]);
        let mixed = model(vec![factor(-1.0, &pos), factor(0.0, &pos), factor(1.0, &neg)]);
        assert!(impute(&mixed).as_slice().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        let all_neg = model(vec![factor(-1.0, &neg), factor(0.0, &neg), factor(1.0, &neg)]);
        assert_eq!(impute(&all_neg).as_slice(), &[-1.0; 4]);
    }

    #[test]
    fn mae_examples() {
        let t = DenseMatrix::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        assert_eq!(completion_mae(&t, &t, None).unwrap(), 0.0);
        let shifted = t.map(|v| v + 0.1);
        assert!((completion_mae(&shifted, &t, None).unwrap() - 0.1).abs() < 1e-15);
        let e = DenseMatrix::from_rows(&[vec![0.1, 0.4], vec![0.7, 0.6]]).unwrap();
        assert!((completion_mae(&e, &t, None).unwrap() - 0.2).abs() < 1e-15);
        assert!((completion_mae(&e, &t, Some(&[(0, 1)])).unwrap() - 0.2).abs() < 1e-15);
        assert!(completion_mae(&e, &t, Some(&[])).is_err());
        assert!(completion_mae(&e, &DenseMatrix::zeros(1, 2), None).is_err());
    }

    #[test]
    fn cell_argmin_matches_grid_search() {
        for kind in [LossKind::Hinge, LossKind::Psi] {
            let lvl = CompletionLevel {
                d1: 1,
                d2: 1,
                cells: vec![],
                loss: kind,
            };
            let obs = [(1.0, 0.7), (-1.0, 0.2), (1.0, 0.4)];
            for &(mu, sbar) in &[(0.05, 0.3), (1.0, -2.0), (0.3, 0.9), (10.0, 0.1), (0.2, -0.4)] {
                let x = lvl.cell_argmin(&obs, mu, sbar);
                let f = |x: f64| mu * (x - sbar) * (x - sbar) + lvl.cell_loss(&obs, x);
                let grid = (-60000..60000)
                    .map(|k| f(k as f64 / 10000.0))
                    .fold(f64::INFINITY, f64::min);
                assert!(f(x) <= grid + 1e-12, "{kind} mu={mu} sbar={sbar}");
            }
        }
    }

    #[test]
    fn two_block_fixture_recovers_row_signs() {
        let theta = DenseMatrix::from_rows(&[vec![0.8, 0.8], vec![-0.8, -0.8]]).unwrap();
        let obs = ObservedMatrix::with_scale(
            2,
            2,
            &full_cells(2, 2)
                .iter()
                .map(|&(i, j)| (i, j, theta.get(i, j)))
                .collect::<Vec<_>>(),
            ResponseScale::IDENTITY,
        )
        .unwrap();
        let mut hp = Hyperparams::default().with_budgets(1, 1, 1);
        hp.h = 1;
        hp.lambda = 0.01;
        hp.n_starts = 2;
        let model = fit_completion(&obs, &hp).unwrap();
        assert_eq!(model.sign_factors.len(), 3);
        let est = impute(&model);
        let expect = [1.0 / 3.0, 1.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0];
        for (a, b) in est.as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{est:?}");
        }
    }

    #[test]
    fn full_rank_fit_is_no_worse_than_zero() {
        let theta =
            DenseMatrix::from_rows(&[vec![0.5, -0.2, 0.9], vec![-0.7, 0.1, 0.3], vec![0.2, 0.6, -0.4]]).unwrap();
        let cells = full_cells(3, 3);
        let obs = ObservedMatrix::from_matrix(&theta, &cells).unwrap();
        let mut hp = Hyperparams::default().with_budgets(3, 3, 3);
        hp.h = 2;
        hp.lambda = 1e-3;
        hp.n_starts = 1;
        let model = fit_completion(&obs, &hp).unwrap();
        let ys: Vec<f64> = obs.entries().iter().map(|e| e.2).collect();
        for f in &model.sign_factors {
            let z = f.score_matrix();
            let dec: Vec<f64> = cells.iter().map(|&(i, j)| z.get(i, j)).collect();
            let fitted = weighted_01_from_decisions(&ys, &dec, f.level);
            let zero = weighted_01_from_decisions(&ys, &vec![0.0; ys.len()], f.level);
            assert!(fitted <= zero + 1e-12, "level {}", f.level);
        }
    }

    #[test]
    fn single_entry_is_within_one_step() {
        let obs = ObservedMatrix::from_raw(3, 3, &[(1, 2, 0.37)]).unwrap();
        let mut hp = Hyperparams::default().with_budgets(1, 1, 1);
        hp.h = 4;
        hp.n_starts = 1;
        let est = impute(&fit_completion(&obs, &hp).unwrap());
        let scaled = obs.scale().forward(est.get(1, 2));
        assert!((scaled - obs.entries()[0].2).abs() <= 0.25 + 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ObservedMatrix::from_raw(2, 2, &[]).is_err());
        assert!(ObservedMatrix::from_raw(2, 2, &[(2, 0, 1.0)]).is_err());
        let obs = ObservedMatrix::from_raw(2, 2, &[(0, 0, 1.0)]).unwrap();
        let hp = Hyperparams::default().with_budgets(3, 3, 3);
        assert!(matches!(
            fit_completion(&obs, &hp),
            Err(AssistError::InfeasibleBudget(_))
        ));
        assert!(IMPUTERS.create("nope").is_err());
        assert_eq!(IMPUTERS.names(), vec!["assist", "hard-impute", "soft-impute"]);
    }
}
