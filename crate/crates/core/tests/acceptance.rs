//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use assist::admm::fit_sign_classifier_with_diagnostics;
use assist::assist::ideal_aggregate;
use assist::bench::{run_completion_bench, run_fig1a, run_fig5, CompletionBenchConfig, Fig5Config};
use assist::loss::sgn;
use assist::projection::project_sparse_lowrank;
use assist::rng::rng_from;
use assist::simgen::{
    brute_force_level_risk, gen_gaussian_low_rank, gen_monotone_transform, gen_regression, FinitePredictorSpace, Link,
    PointLaw, ResponseType,
};
use assist::tuning::{cross_validate, one_se_rule, Metric};
use assist::{Dataset, DenseMatrix, Hyperparams, LevelGrid, LossKind};
use rand::{Rng, RngCore};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant, outcome: Outcome) -> Outcome {
    let elapsed = start.elapsed();
    let detail = |d: String| format!("{d}; {:.2}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs());
    match outcome {
        Ok(d) if elapsed <= limit => Ok(detail(d)),
        Ok(d) => Err(detail(d)),
        Err(d) => Err(detail(d)),
    }
}

fn aggregation_bias_bound() -> Outcome {
    let start = Instant::now();
    let fs: Vec<f64> = (0..=10_000).map(|k| -1.0 + 2.0 * k as f64 / 10_000.0).collect();
    let mut violations = 0;
    let mut worst = 0.0f64;
    for h in 1..=50 {
        let agg = ideal_aggregate(&fs, h).map_err(|e| e.to_string())?;
        for (a, f) in agg.iter().zip(&fs) {
            let gap = (a - f).abs();
            worst = worst.max(gap * h as f64);
            if gap > 1.0 / h as f64 {
                violations += 1;
            }
        }
    }
    within(
        Duration::from_secs(1),
        start,
        check(
            violations == 0,
            format!("{violations} violations, max H·gap {worst:.4}"),
        ),
    )
}

fn random_space(rng: &mut impl Rng) -> FinitePredictorSpace {
    let m = rng.random_range(1..=12);
    let mut masses: Vec<f64> = (0..m)
        .map(|_| {
            if rng.random_bool(0.15) {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    if masses.iter().all(|&w| w == 0.0) {
        masses[0] = 1.0;
    }
    let total: f64 = masses.iter().sum();
    let points = masses
        .into_iter()
        .map(|w| {
            let k = rng.random_range(1..=4);
            let values: Vec<f64> = (0..k).map(|_| (rng.random_range(-10..=10) as f64) / 10.0).collect();
            let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
            let z: f64 = raw.iter().sum();
            PointLaw {
                mass: w / total,
                values,
                probs: raw.iter().map(|p| p / z).collect(),
            }
        })
        .collect();
    FinitePredictorSpace { points }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from(2024);
    let grid = LevelGrid::new(5).unwrap();
    let tol = 1e-12;
    let mut failures = Vec::new();
    for case in 0..50 {
        let space = random_space(&mut rng);
        let f = space.conditional_means();
        let m = f.len();
        for &pi in grid.levels() {
            let bayes: Vec<f64> = f.iter().map(|&v| sgn(v - pi)).collect();
            let bayes_risk = brute_force_level_risk(&space, pi, &bayes).map_err(|e| e.to_string())?;
            for mask in 0u32..(1 << m) {
                let a: Vec<f64> = (0..m).map(|k| if mask >> k & 1 == 1 { 1.0 } else { -1.0 }).collect();
                let risk = brute_force_level_risk(&space, pi, &a).map_err(|e| e.to_string())?;
                if risk < bayes_risk - tol {
                    failures.push(format!("case {case} level {pi}: assignment beats the Bayes rule"));
                } else if risk <= bayes_risk + tol {
                    let stray = (0..m).any(|k| a[k] != bayes[k] && space.points[k].mass * (f[k] - pi).abs() > tol);
                    if stray {
                        failures.push(format!(
                            "case {case} level {pi}: co-minimizer differs at a charged point"
                        ));
                    }
                }
            }
        }
    }
    within(
        Duration::from_secs(30),
        start,
        check(
            failures.is_empty(),
            format!(
                "50 spaces x 11 levels, {} failures {:?}",
                failures.len(),
                failures.first()
            ),
        ),
    )
}

/// Largest eigenvalue of AᵀA for a matrix with at most two columns.
fn top_singular_sq(a: &[Vec<f64>]) -> f64 {
    let cols = a[0].len();
    let g = |p: usize, q: usize| a.iter().map(|row| row[p] * row[q]).sum::<f64>();
    if cols == 1 {
        return g(0, 0);
    }
    let (x, y, z) = (g(0, 0), g(1, 1), g(0, 1));
    let t = x + y;
    let det = x * y - z * z;
    0.5 * (t + (t * t - 4.0 * det).max(0.0).sqrt())
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return (0..n).map(|i| vec![i]).collect();
    }
    (0..n).flat_map(|i| (i + 1..n).map(move |j| vec![i, j])).collect()
}

fn projection_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from(77);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let small = rng.random_range(1..=4);
        let large = rng.random_range(1..=8);
        let (d1, d2) = if rng.random_bool(0.5) {
            (small, large)
        } else {
            (large, small)
        };
        let m = DenseMatrix::from_fn(d1, d2, |_, _| rng.random_range(-1.0..1.0));
        let s1 = rng.random_range(1..=2usize).min(d1);
        let s2 = rng.random_range(1..=2usize).min(d2);
        let total = m.frobenius_norm_sq();
        let mut best = 0.0f64;
        for rows in subsets(d1, s1) {
            for cols in subsets(d2, s2) {
                let block: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|&i| cols.iter().map(|&j| m.get(i, j)).collect())
                    .collect();
                best = best.max(top_singular_sq(&block));
            }
        }
        let oracle = (total - best).max(0.0).sqrt();
        let p = project_sparse_lowrank(&m, 1, s1, s2, 20).map_err(|e| e.to_string())?;
        worst = worst.max((p.sub(&m).frobenius_norm() - oracle).abs());
    }
    within(
        Duration::from_secs(30),
        start,
        check(worst <= 1e-9, format!("max distance gap {worst:.2e} over 500 matrices")),
    )
}

fn admm_contract() -> Outcome {
    let mut rng = rng_from(4);
    let mut failures = Vec::new();
    let mut converged = 0;
    for case in 0..100 {
        let d1 = rng.random_range(2..=5);
        let d2 = rng.random_range(2..=5);
        let p = rng.random_range(0..=2);
        let n = rng.random_range(15..=30);
        let xs: Vec<DenseMatrix> = (0..n)
            .map(|_| DenseMatrix::from_fn(d1, d2, |_, _| rng.random::<f64>()))
            .collect();
        let ws: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| x.get(0, 0) - x.get(1, 1) + 0.3 * rng.random::<f64>())
            .collect();
        let data = Dataset::from_raw(xs, ws, &ys).map_err(|e| e.to_string())?;
        let s1 = rng.random_range(1..=d1);
        let s2 = rng.random_range(1..=d2);
        let r = rng.random_range(1..=s1.min(s2));
        let mut hp = Hyperparams::for_sample_size(n).with_budgets(r, s1, s2);
        hp.loss = if case % 3 == 0 { LossKind::Psi } else { LossKind::Hinge };
        hp.n_starts = 2;
        hp.seed = rng.next_u64();
        let level = rng.random_range(-0.8..0.8);
        let (tf, diag) = fit_sign_classifier_with_diagnostics(&data, level, &hp, None).map_err(|e| e.to_string())?;
        let (again, _) = fit_sign_classifier_with_diagnostics(&data, level, &hp, None).map_err(|e| e.to_string())?;
        let b = tf.coefficient_matrix();
        let rank_ok = tf.u.cols() <= r && tf.v.cols() <= r;
        let support_ok = b.nonzero_rows() <= s1 && b.nonzero_cols() <= s2;
        let intercept_ok = tf.intercept.abs() <= b.frobenius_norm() + 1.0;
        if !(rank_ok && support_ok && intercept_ok) {
            failures.push(format!("case {case}: invariant broken"));
        }
        if diag.converged {
            converged += 1;
            if diag.residual.is_nan() || diag.residual >= 1e-3 {
                failures.push(format!("case {case}: converged with residual {}", diag.residual));
            }
        }
        if tf != again {
            failures.push(format!("case {case}: refit with the same seed differs"));
        }
    }
    check(
        failures.is_empty(),
        format!(
            "100 fits, {converged} converged, {} failures {:?}",
            failures.len(),
            failures.first()
        ),
    )
}

fn fig5_trend() -> Outcome {
    let start = Instant::now();
    let rows = run_fig5(&Fig5Config::default()).map_err(|e| e.to_string())?;
    let (small, large) = (&rows[0], &rows[1]);
    let (e150, e400) = (small.mean_l1(), large.mean_l1());
    let (b150, b400) = (small.mean_baseline(), large.mean_baseline());
    let drop = 1.0 - e400 / e150;
    within(
        Duration::from_secs(600),
        start,
        check(
            drop >= 0.15 && e150 < b150 && e400 < b400,
            format!(
                "L1 n=150 {e150:.4}, n=400 {e400:.4} (drop {:.1}%), baselines {b150:.4}/{b400:.4}",
                drop * 100.0
            ),
        ),
    )
}

fn fig1a_rank_growth() -> Outcome {
    let start = Instant::now();
    let seeds: Vec<u64> = (0..10).collect();
    let rows = run_fig1a(&[1.0, 20.0], 50, 5, &seeds, 0.01).map_err(|e| e.to_string())?;
    let grows = rows[0].ranks.iter().zip(&rows[1].ranks).all(|(lo, hi)| hi > lo);
    let mut sign_breaks = 0usize;
    let mut checked = 0usize;
    for &seed in &seeds {
        let b = gen_gaussian_low_rank(50, 5, seed);
        let mut sorted = b.as_slice().to_vec();
        sorted.sort_by(f64::total_cmp);
        for c in [1.0, 20.0] {
            let g = gen_monotone_transform(&b, c);
            for q in [0.05, 0.25, 0.5, 0.75, 0.95] {
                let pi = sorted[(q * (sorted.len() - 1) as f64) as usize];
                let g_pi = gen_monotone_transform(&DenseMatrix::new(1, 1, vec![pi]).unwrap(), c).get(0, 0);
                if g_pi >= 1.0 {
                    continue;
                }
                checked += 1;
                sign_breaks += b
                    .as_slice()
                    .iter()
                    .zip(g.as_slice())
                    .filter(|(bij, gij)| sgn(*gij - g_pi) != sgn(*bij - pi))
                    .count();
            }
        }
    }
    within(
        Duration::from_secs(60),
        start,
        check(
            grows && sign_breaks == 0,
            format!(
                "ranks c=1 {:?}, c=20 {:?}; {sign_breaks} sign mismatches over {checked} levels",
                rows[0].ranks, rows[1].ranks
            ),
        ),
    )
}

fn completion_win() -> Outcome {
    let start = Instant::now();
    let rows = run_completion_bench(&CompletionBenchConfig::default()).map_err(|e| e.to_string())?;
    let wins = rows.iter().filter(|r| r.assist_mae < r.baseline_mae).count();
    let mean = |f: fn(&assist::bench::CompletionBenchRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    within(
        Duration::from_secs(300),
        start,
        check(
            wins >= 8,
            format!(
                "wins {wins}/10, mean MAE assist {:.5} vs hard impute {:.5}",
                mean(|r| r.assist_mae),
                mean(|r| r.baseline_mae)
            ),
        ),
    )
}

fn step_link_robustness() -> Outcome {
    let start = Instant::now();
    let cfg = Fig5Config {
        n_list: vec![400],
        link: Link::Step,
        ..Default::default()
    };
    let rows = run_fig5(&cfg).map_err(|e| e.to_string())?;
    let (err, base) = (rows[0].mean_l1(), rows[0].mean_baseline());
    within(
        Duration::from_secs(600),
        start,
        check(err < 0.5 * base, format!("mean L1 {err:.4} vs baseline {base:.4}")),
    )
}

fn tuning_sanity() -> Outcome {
    let start = Instant::now();
    let n = 200;
    let mut picks = Vec::new();
    for seed in 0..10u64 {
        let (data, _) = gen_regression(20, 2, 2, n, ResponseType::Continuous, Link::Smooth, 0.1, seed)
            .map_err(|e| e.to_string())?;
        let mut base = Hyperparams::for_sample_size(n * 4 / 5);
        base.n_starts = 1;
        base.seed = seed;
        let grid: Vec<Hyperparams> = [1, 2, 4].iter().map(|&k| base.clone().with_budgets(k, k, k)).collect();
        let table = cross_validate(&data, &grid, 5, Metric::L1, seed).map_err(|e| e.to_string())?;
        picks.push(one_se_rule(&table).map_err(|e| e.to_string())?.r);
    }
    let avoided = picks.iter().filter(|&&r| r != 4).count();
    within(
        Duration::from_secs(600),
        start,
        check(
            avoided >= 8,
            format!("selected r=s per seed {picks:?}; (4,4) avoided in {avoided}/10"),
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("aggregation bias bound", aggregation_bias_bound),
        ("oracle equivalence of the sign rule", oracle_equivalence),
        ("projection matches brute force", projection_oracle),
        ("ADMM contract", admm_contract),
        ("error decays with n", fig5_trend),
        ("rank growth under monotone transform", fig1a_rank_growth),
        ("high-rank completion beats hard impute", completion_win),
        ("step-link robustness", step_link_robustness),
        ("tuning avoids the oversized budget", tuning_sanity),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
