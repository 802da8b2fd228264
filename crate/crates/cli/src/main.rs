use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use assist::assist::{fit_with_diagnostics, predict_many};
use assist::bench::{fig1a_to_csv, run_fig1a};
use assist::completion::{completion_mae, fit_completion, impute, IMPUTERS};
use assist::io::{
    config_over, dataset_to_string, diagnostics_to_csv, load_dataset, load_model, load_triplets, matrix_from_csv,
    matrix_to_csv, predictions_to_csv, save_model, triplets_to_string, Model, Triplets,
};
use assist::simgen::{SimSpec, Simulated, SIMULATORS};
use assist::tuning::{cross_validate, one_se_index, table_to_csv, GridConfig, Metric};
use assist::{AssistError, Hyperparams, LossKind, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "assist",
    version,
    about = "Nonparametric trace regression and matrix completion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a regression model to a dataset file.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        hp: HpArgs,
        #[arg(long)]
        out: PathBuf,
        /// Per-level diagnostics CSV.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Predict responses of a dataset with a fitted model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a completion model to observed entries.
    Complete {
        #[arg(long)]
        triplets: PathBuf,
        #[command(flatten)]
        hp: HpArgs,
        #[arg(long, value_enum, default_value_t = HPreset::Default)]
        h_preset: HPreset,
        #[arg(long)]
        out: PathBuf,
        /// Also write the imputed matrix.
        #[arg(long)]
        imputed: Option<PathBuf>,
        /// Full signal matrix CSV; prints the MAE of the imputation.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Impute missing entries with a registered method.
    Impute {
        #[arg(long)]
        triplets: PathBuf,
        #[arg(long, default_value = "assist")]
        method: String,
        #[command(flatten)]
        hp: HpArgs,
        #[arg(long, value_enum, default_value_t = HPreset::Default)]
        h_preset: HPreset,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Cross-validate a hyperparameter grid.
    Tune {
        #[arg(long)]
        data: PathBuf,
        /// Grid JSON: optional `base` hyperparameters plus `budgets` or `step`.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value = "l1")]
        metric: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Select the row with the best mean instead of the one-SE rule.
        #[arg(long)]
        best: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset or matrix fixture.
    Simulate {
        /// Registered simulator name.
        #[arg(long)]
        generator: String,
        /// JSON file of simulator parameters; flags override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Numerical rank of a logistic transform of a low-rank matrix versus c.
    Rankdemo {
        #[arg(long, default_value_t = 50)]
        d: usize,
        #[arg(long, default_value_t = 5)]
        r: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0])]
        c: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        rel_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum HPreset {
    /// H = min(20, ⌊√|Ω|⌋).
    Default,
    /// H = ⌈(|Ω| / (max(d1, d2)·r))^{1/2}⌉.
    Theory,
}

#[derive(Args)]
struct HpArgs {
    /// Hyperparameter JSON; keys mirror the field names.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    s1: Option<usize>,
    #[arg(long)]
    s2: Option<usize>,
    #[arg(long = "H")]
    h: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    n_starts: Option<usize>,
    #[arg(long)]
    primal_solver: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl HpArgs {
    fn resolve(&self, base: Hyperparams) -> Result<Hyperparams> {
        let mut hp = match &self.config {
            Some(path) => config_over(&base, &fs::read_to_string(path)?)?,
            None => base,
        };
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = &self.$field { hp.$field = v.clone(); })*};
        }
        set!(r, s1, s2, h, lambda, loss, n_starts, primal_solver, seed);
        Ok(hp)
    }
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    response: Option<String>,
    #[arg(long)]
    link: Option<String>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    pattern: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    g_library_seed: Option<u64>,
    #[arg(long)]
    missing_frac: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl SimArgs {
    fn resolve(&self, file: Option<&Path>) -> Result<SimSpec> {
        let mut spec: SimSpec = match file {
            Some(path) => serde_json::from_str(&fs::read_to_string(path)?)
                .map_err(|e| AssistError::InvalidInput(format!("simulation spec: {e}")))?,
            None => SimSpec::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = &self.$field { spec.$field = v.clone(); })*};
        }
        set!(
            d,
            r,
            s,
            n,
            response,
            link,
            noise_sd,
            pattern,
            sigma,
            g_library_seed,
            missing_frac,
            c,
            seed
        );
        Ok(spec)
    }
}

fn completion_base(obs_len: usize, d_max: usize, preset: HPreset, r_hint: usize) -> Hyperparams {
    let mut hp = Hyperparams::for_sample_size(obs_len);
    if let HPreset::Theory = preset {
        hp.h = ((obs_len as f64 / (d_max * r_hint.max(1)) as f64).sqrt().ceil() as usize).max(1);
    }
    hp
}

fn completion_hp(t: &Triplets, args: &HpArgs, preset: HPreset) -> Result<Hyperparams> {
    let probe = args.resolve(Hyperparams::default())?;
    args.resolve(completion_base(t.entries.len(), t.d1.max(t.d2), preset, probe.r))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn report_mae(estimate: &assist::DenseMatrix, truth: Option<&PathBuf>) -> Result<()> {
    if let Some(path) = truth {
        let truth = matrix_from_csv(&fs::read_to_string(path)?)?;
        println!("mae={:.17e}", completion_mae(estimate, &truth, None)?);
    }
    Ok(())
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fit {
            data,
            hp,
            out,
            diagnostics,
        } => {
            let data = load_dataset(&data)?;
            let hp = hp.resolve(Hyperparams::for_sample_size(data.len()))?;
            let (model, diags) = fit_with_diagnostics(&data, &hp)?;
            save_model(&Model::Regression(model), &out)?;
            if let Some(path) = diagnostics {
                fs::write(path, diagnostics_to_csv(&diags))?;
            }
        }
        Command::Predict { model, data, out } => {
            let Model::Regression(model) = load_model(&model)? else {
                return Err(AssistError::InvalidInput("predict needs a regression model".into()));
            };
            let preds = predict_many(&model, &load_dataset(&data)?)?;
            write_or_print(out.as_deref(), &predictions_to_csv(&preds))?;
        }
        Command::Complete {
            triplets,
            hp,
            h_preset,
            out,
            imputed,
            truth,
        } => {
            let t = load_triplets(&triplets)?;
            let hp = completion_hp(&t, &hp, h_preset)?;
            let model = fit_completion(&t.observed()?, &hp)?;
            let estimate = impute(&model);
            save_model(&Model::Completion(model), &out)?;
            if let Some(path) = imputed {
                fs::write(path, matrix_to_csv(&estimate))?;
            }
            report_mae(&estimate, truth.as_ref())?;
        }
        Command::Impute {
            triplets,
            method,
            hp,
            h_preset,
            out,
            truth,
        } => {
            let imputer = IMPUTERS.create(&method)?;
            let t = load_triplets(&triplets)?;
            let hp = completion_hp(&t, &hp, h_preset)?;
            let estimate = imputer.impute(&t.observed()?, &hp)?;
            fs::write(out, matrix_to_csv(&estimate))?;
            report_mae(&estimate, truth.as_ref())?;
        }
        Command::Tune {
            data,
            grid,
            folds,
            metric,
            seed,
            best,
            out,
        } => {
            let data = load_dataset(&data)?;
            let metric: Metric = metric.parse()?;
            let (d1, d2, _) = data.dims();
            let grid = GridConfig::from_json(&fs::read_to_string(grid)?, Hyperparams::for_sample_size(data.len()))?
                .expand(d1, d2)?;
            let table = cross_validate(&data, &grid, folds, metric, seed)?;
            fs::write(out, table_to_csv(&table))?;
            let chosen = if best {
                table
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.mean.is_finite())
                    .min_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
                    .map(|(i, _)| i)
                    .ok_or_else(|| AssistError::InvalidInput("no successful rows to select from".into()))?
            } else {
                one_se_index(&table)?
            };
            println!(
                "{}",
                serde_json::to_string(&table[chosen].hp).expect("hyperparameters serialize")
            );
        }
        Command::Simulate {
            generator,
            spec,
            sim,
            out_dir,
        } => {
            let spec = sim.resolve(spec.as_deref())?;
            let simulated = SIMULATORS.create(&generator)?.simulate(&spec)?;
            fs::create_dir_all(&out_dir)?;
            match simulated {
                Simulated::Regression { data, truth } => {
                    fs::write(out_dir.join("dataset.csv"), dataset_to_string(&data))?;
                    let mut text = String::from("f\n");
                    for f in truth {
                        text.push_str(&format!("{f:.16e}\n"));
                    }
                    fs::write(out_dir.join("truth.csv"), text)?;
                }
                Simulated::Completion { observed, truth } => {
                    let (d1, d2) = observed.dims();
                    let t = Triplets {
                        d1,
                        d2,
                        entries: observed.raw_entries(),
                    };
                    fs::write(out_dir.join("triplets.csv"), triplets_to_string(&t))?;
                    fs::write(out_dir.join("truth.csv"), matrix_to_csv(&truth))?;
                }
            }
        }
        Command::Rankdemo {
            d,
            r,
            c,
            seeds,
            seed,
            rel_tol,
            out,
        } => {
            let seeds: Vec<u64> = (seed..seed + seeds).collect();
            let rows = run_fig1a(&c, d, r, &seeds, rel_tol)?;
            write_or_print(out.as_deref(), &fig1a_to_csv(&rows))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(1)
        }
    }
}
