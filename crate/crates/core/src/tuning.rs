//! K-fold cross-validation over hyperparameter grids and the
//! one-standard-error selection rule.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Deserialize;

use crate::assist::{fit, predict_many};
use crate::error::{AssistError, Result};
use crate::io::config_over;
use crate::loss::sgn;
use crate::rng::{derive_seed, rng_from};
use crate::types::{Dataset, Hyperparams};

/// Balanced seeded partition of 0..n into k validation folds, each paired
/// with its training complement. The first n mod k folds hold one extra index.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 || k > n {
        return Err(AssistError::InvalidInput(format!("need 2 <= k <= n, got k={k}, n={n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(derive_seed(seed, &[0x666f_6c64])));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut valid = order[start..start + size].to_vec();
        valid.sort_unstable();
        let mut train: Vec<usize> = order[..start].iter().chain(&order[start + size..]).copied().collect();
        train.sort_unstable();
        folds.push((train, valid));
        start += size;
    }
    Ok(folds)
}

/// Validation metric. Every metric is stored loss-type (lower is better):
/// AUC enters negated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// Mean |f̂ - Y| on the rescaled [-1, 1] axis.
    L1,
    MisclassAtHalf,
    /// Mean |f̂ - Y| on the raw response axis.
    Mae,
    Auc,
}

impl FromStr for Metric {
    type Err = AssistError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Metric::L1),
            "misclass-at-half" => Ok(Metric::MisclassAtHalf),
            "mae" => Ok(Metric::Mae),
            "auc" => Ok(Metric::Auc),
            _ => Err(AssistError::InvalidInput(format!(
                "unknown metric '{s}' (expected l1, misclass-at-half, mae or auc)"
            ))),
        }
    }
}

/// Area under the ROC curve with ties counted one half.
pub fn auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    let pos: Vec<f64> = scores.iter().zip(positive).filter(|p| *p.1).map(|p| *p.0).collect();
    let neg: Vec<f64> = scores.iter().zip(positive).filter(|p| !*p.1).map(|p| *p.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(AssistError::InvalidInput("AUC needs both classes".into()));
    }
    let mut wins = 0.0;
    for p in &pos {
        for q in &neg {
            wins += if p > q {
                1.0
            } else if p == q {
                0.5
            } else {
                0.0
            };
        }
    }
    Ok(wins / (pos.len() * neg.len()) as f64)
}

impl Metric {
    /// Loss-type score of raw-scale predictions against raw responses.
    /// `scale` maps the raw axis onto [-1, 1].
    pub fn score(self, preds: &[f64], raw: &[f64], scale: crate::types::ResponseScale) -> Result<f64> {
        if preds.len() != raw.len() || preds.is_empty() {
            return Err(AssistError::mismatch(raw.len(), preds.len()));
        }
        let n = preds.len() as f64;
        let mid = scale.inverse(0.0);
        Ok(match self {
            Metric::L1 => {
                preds
                    .iter()
                    .zip(raw)
                    .map(|(p, y)| (scale.forward(*p) - scale.forward(*y)).abs())
                    .sum::<f64>()
                    / n
            }
            Metric::Mae => preds.iter().zip(raw).map(|(p, y)| (p - y).abs()).sum::<f64>() / n,
            Metric::MisclassAtHalf => {
                preds
                    .iter()
                    .zip(raw)
                    .filter(|(p, y)| sgn(**p - mid) != sgn(**y - mid))
                    .count() as f64
                    / n
            }
            Metric::Auc => {
                let labels: Vec<bool> = raw.iter().map(|y| *y > mid).collect();
                -auc(preds, &labels)?
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvRow {
    pub hp: Hyperparams,
    pub mean: f64,
    /// Sample standard deviation over folds divided by √k.
    pub se: f64,
    pub fold_scores: Vec<f64>,
    pub status: RowStatus,
}

fn fold_score(data: &Dataset, hp: &Hyperparams, train: &[usize], valid: &[usize], metric: Metric) -> Result<f64> {
    let model = fit(&data.subset(train)?, hp)?;
    let held = data.subset(valid)?;
    let preds = predict_many(&model, &held)?;
    metric.score(&preds, &held.raw_responses(), data.scale())
}

/// Scores every grid point on the same k folds. A failing fit marks its row
/// failed instead of aborting the sweep.
pub fn cross_validate(data: &Dataset, grid: &[Hyperparams], k: usize, metric: Metric, seed: u64) -> Result<Vec<CvRow>> {
    if grid.is_empty() {
        return Err(AssistError::InvalidInput("empty hyperparameter grid".into()));
    }
    let folds = kfold_split(data.len(), k, seed)?;
    let tasks: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..k).map(move |f| (g, f))).collect();
    let scores: Vec<Result<f64>> = tasks
        .par_iter()
        .map(|&(g, f)| fold_score(data, &grid[g], &folds[f].0, &folds[f].1, metric))
        .collect();
    let mut rows = Vec::with_capacity(grid.len());
    for (g, hp) in grid.iter().enumerate() {
        let mut fold_scores = Vec::with_capacity(k);
        let mut failure = None;
        for s in &scores[g * k..(g + 1) * k] {
            match s {
                Ok(v) if v.is_finite() => fold_scores.push(*v),
                Ok(v) => failure = Some(format!("non-finite score {v}")),
                Err(e) => failure = Some(e.to_string()),
            }
        }
        let row = match failure {
            Some(msg) => CvRow {
                hp: hp.clone(),
                mean: f64::NAN,
                se: f64::NAN,
                fold_scores,
                status: RowStatus::Failed(msg),
            },
            None => {
                let kf = k as f64;
                let mean = fold_scores.iter().sum::<f64>() / kf;
                let var = fold_scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (kf - 1.0);
                CvRow {
                    hp: hp.clone(),
                    mean,
                    se: var.sqrt() / kf.sqrt(),
                    fold_scores,
                    status: RowStatus::Ok,
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Most parsimonious row within one standard error of the best. Complexity
/// is r·(s1 + s2), then r, then s1 + s2, then grid order.
pub fn one_se_rule(table: &[CvRow]) -> Result<Hyperparams> {
    one_se_index(table).map(|i| table[i].hp.clone())
}

/// Row index chosen by [`one_se_rule`].
pub fn one_se_index(table: &[CvRow]) -> Result<usize> {
    let ok: Vec<(usize, &CvRow)> = table
        .iter()
        .enumerate()
        .filter(|(_, r)| r.status == RowStatus::Ok && r.mean.is_finite())
        .collect();
    let best = ok
        .iter()
        .min_by(|a, b| a.1.mean.total_cmp(&b.1.mean).then(a.0.cmp(&b.0)))
        .ok_or_else(|| AssistError::InvalidInput("no successful rows to select from".into()))?
        .1;
    let threshold = best.mean + if best.se.is_finite() { best.se } else { 0.0 };
    let key = |(idx, row): &(usize, &CvRow)| {
        let h = &row.hp;
        (h.r * (h.s1 + h.s2), h.r, h.s1 + h.s2, *idx)
    };
    let chosen = ok
        .iter()
        .filter(|(_, r)| r.mean <= threshold)
        .min_by_key(|c| key(c))
        .expect("the best row is always within its own threshold");
    Ok(chosen.0)
}

/// Budget grid r ≤ s1 = s2 over {1, step, 2·step, …} ∩ [1, min(d1, d2)].
pub fn budget_grid(d1: usize, d2: usize, step: usize, base: &Hyperparams) -> Result<Vec<Hyperparams>> {
    if step == 0 {
        return Err(AssistError::InvalidInput("grid step must be positive".into()));
    }
    let dmin = d1.min(d2);
    let mut values: Vec<usize> = std::iter::once(1).chain((step..=dmin).step_by(step)).collect();
    values.dedup();
    let mut grid = Vec::new();
    for &s in &values {
        for &r in values.iter().filter(|&&r| r <= s) {
            grid.push(base.clone().with_budgets(r, s, s));
        }
    }
    Ok(grid)
}

/// Grid file contents: `base` hyperparameters (overlaid on the caller's
/// defaults), explicit `budgets` as `[r, s1, s2]` triples or a budget
/// `step`, and optional lists of `H` and `lambda` values to cross with.
#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub base: Hyperparams,
    pub budgets: Option<Vec<[usize; 3]>>,
    pub step: Option<usize>,
    pub h: Option<Vec<usize>>,
    pub lambda: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    base: Option<serde_json::Value>,
    budgets: Option<Vec<[usize; 3]>>,
    step: Option<usize>,
    #[serde(rename = "H")]
    h: Option<Vec<usize>>,
    lambda: Option<Vec<f64>>,
}

impl GridConfig {
    pub fn from_json(text: &str, defaults: Hyperparams) -> Result<Self> {
        let file: GridFile = serde_json::from_str(text).map_err(|e| AssistError::InvalidInput(format!("grid: {e}")))?;
        let base = match file.base {
            Some(v) => config_over(&defaults, &v.to_string())?,
            None => defaults,
        };
        Ok(GridConfig {
            base,
            budgets: file.budgets,
            step: file.step,
            h: file.h,
            lambda: file.lambda,
        })
    }

    pub fn expand(&self, d1: usize, d2: usize) -> Result<Vec<Hyperparams>> {
        let mut grid = match (&self.budgets, self.step) {
            (Some(b), None) => b
                .iter()
                .map(|&[r, s1, s2]| self.base.clone().with_budgets(r, s1, s2))
                .collect(),
            (None, Some(step)) => budget_grid(d1, d2, step, &self.base)?,
            _ => {
                return Err(AssistError::InvalidInput(
                    "grid needs exactly one of 'budgets' or 'step'".into(),
                ))
            }
        };
        if let Some(hs) = &self.h {
            grid = grid
                .iter()
                .flat_map(|hp| hs.iter().map(move |&h| Hyperparams { h, ..hp.clone() }))
                .collect();
        }
        if let Some(ls) = &self.lambda {
            grid = grid
                .iter()
                .flat_map(|hp| ls.iter().map(move |&lambda| Hyperparams { lambda, ..hp.clone() }))
                .collect();
        }
        if grid.is_empty() {
            return Err(AssistError::InvalidInput("empty hyperparameter grid".into()));
        }
        Ok(grid)
    }
}

/// CSV with columns r,s1,s2,H,lambda,loss,mean,se,status.
pub fn table_to_csv(table: &[CvRow]) -> String {
    let mut out = String::from("r,s1,s2,H,lambda,loss,mean,se,status\n");
    for row in table {
        let h = &row.hp;
        let status = match &row.status {
            RowStatus::Ok => "ok".to_string(),
            RowStatus::Failed(msg) => format!("failed: {}", msg.replace([',', '\n'], ";")),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{:e},{},{:e},{:e},{}",
            h.r, h.s1, h.s2, h.h, h.lambda, h.loss, row.mean, row.se, status
        );
    }
    out
}
