//! Seeded desk-scale experiments: error decay in n, rank growth under a
//! monotone transform, and completion against hard impute.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::assist::{fit, predict};
use crate::completion::{completion_mae, fit_completion, impute};
use crate::error::{AssistError, Result};
use crate::rng::derive_seed;
use crate::simgen::{
    best_constant_l1, gen_gaussian_low_rank, gen_monotone_transform, gen_regression, l1_error, numerical_rank,
    svd_impute_baseline, Link, ResponseType, SimSpec, Simulated, SIMULATORS,
};
use crate::types::Hyperparams;

/// Mean and standard error (sample sd / √k) of a sample.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

#[derive(Clone, Debug)]
pub struct Fig5Config {
    pub d: usize,
    pub n_list: Vec<usize>,
    /// (r, s) pairs; the true B and the fit share them.
    pub rs_list: Vec<(usize, usize)>,
    pub seeds: Vec<u64>,
    pub link: Link,
    pub noise_sd: f64,
    /// Level resolution; `None` uses min(20, ⌊√n⌋).
    pub h: Option<usize>,
    pub n_starts: usize,
    /// Monte Carlo draws for the L1 error.
    pub m_draws: usize,
}

impl Default for Fig5Config {
    fn default() -> Self {
        Fig5Config {
            d: 20,
            n_list: vec![150, 400],
            rs_list: vec![(2, 2)],
            seeds: (0..10).collect(),
            link: Link::Smooth,
            noise_sd: 0.1,
            h: Some(20),
            n_starts: 1,
            m_draws: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig5Row {
    pub n: usize,
    pub r: usize,
    pub s: usize,
    /// Per-seed L1 errors and best-constant baselines, in seed order.
    pub l1: Vec<f64>,
    pub baseline: Vec<f64>,
}

impl Fig5Row {
    pub fn mean_l1(&self) -> f64 {
        mean_se(&self.l1).0
    }

    pub fn mean_baseline(&self) -> f64 {
        mean_se(&self.baseline).0
    }
}

fn fig5_cell(cfg: &Fig5Config, n: usize, r: usize, s: usize, seed: u64) -> Result<(f64, f64)> {
    let (data, truth) = gen_regression(cfg.d, r, s, n, ResponseType::Continuous, cfg.link, cfg.noise_sd, seed)?;
    let mut hp = Hyperparams::for_sample_size(n).with_budgets(r, s, s);
    if let Some(h) = cfg.h {
        hp.h = h;
    }
    hp.n_starts = cfg.n_starts;
    hp.seed = seed;
    let model = fit(&data, &hp)?;
    let eval_seed = derive_seed(seed, &[0x6576_616c]);
    let err = l1_error(|x| predict(&model, x, &[]), &truth, cfg.m_draws, eval_seed)?;
    let base = best_constant_l1(&truth, cfg.m_draws, eval_seed)?;
    Ok((err, base))
}

/// L1 error of the fitted regression function over seeds, per (n, r, s).
pub fn run_fig5(cfg: &Fig5Config) -> Result<Vec<Fig5Row>> {
    if cfg.seeds.is_empty() || cfg.n_list.is_empty() || cfg.rs_list.is_empty() {
        return Err(AssistError::InvalidInput(
            "fig5 needs seeds, sample sizes and budgets".into(),
        ));
    }
    let mut rows = Vec::new();
    for &(r, s) in &cfg.rs_list {
        for &n in &cfg.n_list {
            let cells: Vec<(f64, f64)> = cfg
                .seeds
                .par_iter()
                .map(|&seed| fig5_cell(cfg, n, r, s, seed))
                .collect::<Result<_>>()?;
            rows.push(Fig5Row {
                n,
                r,
                s,
                l1: cells.iter().map(|c| c.0).collect(),
                baseline: cells.iter().map(|c| c.1).collect(),
            });
        }
    }
    Ok(rows)
}

/// Columns n,r,s,seeds,mean_l1,se_l1,mean_baseline,se_baseline.
pub fn fig5_to_csv(rows: &[Fig5Row]) -> String {
    let mut out = String::from("n,r,s,seeds,mean_l1,se_l1,mean_baseline,se_baseline\n");
    for row in rows {
        let (m, se) = mean_se(&row.l1);
        let (bm, bse) = mean_se(&row.baseline);
        let _ = writeln!(
            out,
            "{},{},{},{},{m:e},{se:e},{bm:e},{bse:e}",
            row.n,
            row.r,
            row.s,
            row.l1.len()
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig1aRow {
    pub c: f64,
    /// Numerical rank of the transformed matrix, per seed.
    pub ranks: Vec<usize>,
}

/// Numerical rank (relative tolerance `rel_tol`) of the logistic transform
/// of a rank-`r` Gaussian d×d matrix, for each c and seed.
pub fn run_fig1a(c_list: &[f64], d: usize, r: usize, seeds: &[u64], rel_tol: f64) -> Result<Vec<Fig1aRow>> {
    if r == 0 || r > d || seeds.is_empty() {
        return Err(AssistError::InvalidInput(format!(
            "need 1 <= r <= d and seeds, got r={r}, d={d}"
        )));
    }
    let bases: Vec<_> = seeds.iter().map(|&s| gen_gaussian_low_rank(d, r, s)).collect();
    c_list
        .iter()
        .map(|&c| {
            let ranks = bases
                .par_iter()
                .map(|b| numerical_rank(&gen_monotone_transform(b, c), rel_tol))
                .collect::<Result<_>>()?;
            Ok(Fig1aRow { c, ranks })
        })
        .collect()
}

/// Columns c,seeds,mean_rank,se_rank.
pub fn fig1a_to_csv(rows: &[Fig1aRow]) -> String {
    let mut out = String::from("c,seeds,mean_rank,se_rank\n");
    for row in rows {
        let ranks: Vec<f64> = row.ranks.iter().map(|&k| k as f64).collect();
        let (m, se) = mean_se(&ranks);
        let _ = writeln!(out, "{},{},{m:e},{se:e}", row.c, ranks.len());
    }
    out
}

#[derive(Clone, Debug)]
pub struct CompletionBenchConfig {
    /// Registered matrix simulator name.
    pub fixture: String,
    pub d: usize,
    /// Rank of the signal for the low-rank and monotone fixtures.
    pub signal_rank: usize,
    pub missing_frac: f64,
    pub r_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub h: usize,
    pub n_starts: usize,
    pub baseline_iters: usize,
}

impl Default for CompletionBenchConfig {
    fn default() -> Self {
        CompletionBenchConfig {
            fixture: "max-graphon".into(),
            d: 40,
            signal_rank: 2,
            missing_frac: 0.2,
            r_list: vec![2],
            seeds: (0..10).collect(),
            h: 10,
            n_starts: 5,
            baseline_iters: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletionBenchRow {
    pub r: usize,
    pub seed: u64,
    /// Mean absolute error over all entries, raw scale.
    pub assist_mae: f64,
    pub baseline_mae: f64,
}

/// Completion hyperparameters used by the bench: hinge loss, square
/// budgets of the full dimensions and λ = 1/|Ω|.
pub fn completion_hyperparams(r: usize, h: usize, n_observed: usize, n_starts: usize, seed: u64) -> Hyperparams {
    let mut hp = Hyperparams::default().with_budgets(r, r, r);
    hp.h = h;
    hp.lambda = 1.0 / n_observed.max(1) as f64;
    hp.n_starts = n_starts;
    hp.seed = seed;
    hp
}

fn completion_cell(cfg: &CompletionBenchConfig, r: usize, seed: u64) -> Result<CompletionBenchRow> {
    let spec = SimSpec {
        d: cfg.d,
        r: cfg.signal_rank,
        missing_frac: cfg.missing_frac,
        seed,
        ..Default::default()
    };
    let Simulated::Completion { observed, truth } = SIMULATORS.create(&cfg.fixture)?.simulate(&spec)? else {
        return Err(AssistError::InvalidInput(format!(
            "'{}' is not a matrix fixture",
            cfg.fixture
        )));
    };
    let hp = completion_hyperparams(r, cfg.h, observed.len(), cfg.n_starts, seed);
    let assist_mae = completion_mae(&impute(&fit_completion(&observed, &hp)?), &truth, None)?;
    let baseline_mae = completion_mae(&svd_impute_baseline(&observed, r, cfg.baseline_iters)?, &truth, None)?;
    Ok(CompletionBenchRow {
        r,
        seed,
        assist_mae,
        baseline_mae,
    })
}

/// ASSIST impute against rank-r hard impute on a matrix fixture, per
/// rank budget and seed.
pub fn run_completion_bench(cfg: &CompletionBenchConfig) -> Result<Vec<CompletionBenchRow>> {
    if cfg.seeds.is_empty() || cfg.r_list.is_empty() {
        return Err(AssistError::InvalidInput(
            "completion bench needs seeds and rank budgets".into(),
        ));
    }
    let tasks: Vec<(usize, u64)> = cfg
        .r_list
        .iter()
        .flat_map(|&r| cfg.seeds.iter().map(move |&s| (r, s)))
        .collect();
    tasks
        .par_iter()
        .map(|&(r, seed)| completion_cell(cfg, r, seed))
        .collect()
}

/// Columns fixture,missing_frac,r,seed,assist_mae,baseline_mae.
pub fn completion_bench_to_csv(fixture: &str, missing_frac: f64, rows: &[CompletionBenchRow]) -> String {
    let mut out = String::from("fixture,missing_frac,r,seed,assist_mae,baseline_mae\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{fixture},{missing_frac},{},{},{:e},{:e}",
            row.r, row.seed, row.assist_mae, row.baseline_mae
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_examples() {
        assert_eq!(mean_se(&[2.0]), (2.0, 0.0));
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fig1a_is_deterministic_and_monotone_in_majority() {
        let rows = run_fig1a(&[1.0, 20.0], 30, 3, &[0, 1, 2], 0.01).unwrap();
        assert_eq!(rows, run_fig1a(&[1.0, 20.0], 30, 3, &[0, 1, 2], 0.01).unwrap());
        let up = rows[0].ranks.iter().zip(&rows[1].ranks).filter(|(a, b)| b >= a).count();
        assert!(up >= 2, "{rows:?}");
        assert!(fig1a_to_csv(&rows).starts_with("c,seeds,mean_rank,se_rank\n1,3,"));
        assert!(run_fig1a(&[1.0], 3, 4, &[0], 0.01).is_err());
    }

    #[test]
    fn single_seed_fig5_is_deterministic() {
        let cfg = Fig5Config {
            d: 6,
            n_list: vec![40],
            seeds: vec![3],
            h: Some(3),
            m_draws: 200,
            ..Default::default()
        };
        let a = run_fig5(&cfg).unwrap();
        assert_eq!(a, run_fig5(&cfg).unwrap());
        assert_eq!(a[0].l1.len(), 1);
        assert!(fig5_to_csv(&a).lines().nth(1).unwrap().starts_with("40,2,2,1,"));
    }

    #[test]
    fn fully_observed_low_rank_is_recovered_by_both() {
        let cfg = CompletionBenchConfig {
            fixture: "low-rank".into(),
            d: 12,
            missing_frac: 0.0,
            seeds: vec![0, 1],
            n_starts: 2,
            ..Default::default()
        };
        let rows = run_completion_bench(&cfg).unwrap();
        for row in &rows {
            assert!(row.assist_mae < 0.05 * spread(row.seed), "{row:?}");
            assert!(row.baseline_mae < 1e-8, "{row:?}");
        }
        let csv = completion_bench_to_csv("low-rank", 0.0, &rows);
        assert_eq!(csv.lines().count(), 3);
    }

    /// Entry range of the low-rank fixture, so the tolerance is scale-free.
    fn spread(seed: u64) -> f64 {
        let m = gen_gaussian_low_rank(12, 2, seed);
        let (lo, hi) = m
            .as_slice()
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        hi - lo
    }
}
