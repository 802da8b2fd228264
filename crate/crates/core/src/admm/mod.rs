//! Per-level fit of a sign classifier by ADMM over the augmented Lagrangian
//!
//! ```text
//! L(B, b, S, Λ, ρ) = risk(B, b) + λ‖B‖² + ρ‖B - S‖² + ⟨Λ, B - S⟩
//! ```
//!
//! where B is unconstrained and S carries the rank and two-way support
//! budget. Each iteration runs a primal (B, b, c) step, projects onto the
//! budget for S, updates the multiplier and grows ρ geometrically.

mod design;
mod line;
mod solver;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{AssistError, Result};
use crate::loss::{hinge, psi, sgn, LossKind};
use crate::matrix::DenseMatrix;
use crate::projection::{project_sparse_lowrank, truncated_svd};
use crate::rng::{derive_seed, rng_from};
use crate::types::{Dataset, Hyperparams, TraceFunction};

pub use design::Design;
pub(crate) use line::{argmin_margin_loss, MarginTerm};

pub use solver::{ConvexSubproblem, PrimalPoint, PrimalSolver, SmoSolver, SubgradientSolver, PRIMAL_SOLVERS};

/// One ADMM iteration as reported to diagnostic sinks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Penalized empirical objective at the primal iterate.
    pub objective: f64,
    /// ‖B - S‖_F / max(1, ‖S‖_F).
    pub residual: f64,
    pub rho: f64,
}

/// Summary of the selected start of one level fit.
#[derive(Clone, Debug, PartialEq)]
pub struct FitDiagnostics {
    pub level: f64,
    pub start: usize,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    /// Penalized objective of the returned classifier.
    pub objective: f64,
    pub trace: Vec<IterationRecord>,
}

/// Mutable state of a single ADMM run.
#[derive(Clone, Debug)]
pub struct AdmmState {
    pub primal: PrimalPoint,
    pub dual: DenseMatrix,
    pub multiplier: DenseMatrix,
    pub rho: f64,
    pub iter: usize,
    pub objective_trace: Vec<f64>,
}

/// A per-level weighted classification problem the ADMM driver can iterate on.
pub trait LevelProblem {
    /// (d1, d2, p)
    fn dims(&self) -> (usize, usize, usize);

    /// Approximate minimizer of risk + (λ+ρ)‖B - S̄‖² with `mu = λ+ρ`.
    fn primal(&mut self, center: &DenseMatrix, mu: f64, warm: &PrimalPoint) -> Result<PrimalPoint>;

    /// Penalized empirical objective risk + λ‖B‖².
    fn objective(&self, point: &PrimalPoint, lambda: f64) -> f64;

    /// Re-optimizes the offsets (intercept, covariates) for a fixed B.
    fn refit_offsets(&self, point: &mut PrimalPoint);

    /// Whether the classifier carries an intercept at all.
    fn has_intercept(&self) -> bool {
        true
    }

    /// Clears solver state between starts.
    fn reset(&mut self);
}

/// Trace-regression level: weights |Yᵢ - π|/n, labels sgn(Yᵢ - π).
pub struct RegressionLevel<'a> {
    design: &'a Design,
    labels: Vec<f64>,
    weights: Vec<f64>,
    zeros: Vec<f64>,
    loss: LossKind,
    cccp_rounds: usize,
    max_inner_iters: usize,
    solver: Box<dyn PrimalSolver>,
    started: bool,
}

impl<'a> RegressionLevel<'a> {
    pub fn new(design: &'a Design, responses: &[f64], level: f64, hp: &Hyperparams) -> Result<Self> {
        if responses.len() != design.n() {
            return Err(AssistError::mismatch(design.n(), responses.len()));
        }
        if hp.loss == LossKind::ZeroOne {
            return Err(AssistError::InvalidInput("train with hinge or psi loss".into()));
        }
        let n = responses.len() as f64;
        Ok(RegressionLevel {
            design,
            labels: responses.iter().map(|&y| sgn(y - level)).collect(),
            weights: responses.iter().map(|&y| (y - level).abs() / n).collect(),
            zeros: vec![0.0; responses.len()],
            loss: hp.loss,
            cccp_rounds: hp.cccp_rounds,
            max_inner_iters: hp.max_inner_iters,
            solver: PRIMAL_SOLVERS.create(&hp.primal_solver)?,
            started: false,
        })
    }

    fn risk(&self, point: &PrimalPoint) -> f64 {
        let dec = self
            .design
            .decisions(&point.coef, point.intercept, &point.covariate_coeffs);
        let f = match self.loss {
            LossKind::Psi => psi,
            _ => hinge,
        };
        dec.iter()
            .zip(&self.labels)
            .zip(&self.weights)
            .map(|((d, y), w)| w * f(d * y))
            .sum()
    }

    fn subproblem<'b>(&'b self, center: &'b DenseMatrix, mu: f64, a: &'b [f64], g: &'b [f64]) -> ConvexSubproblem<'b> {
        ConvexSubproblem {
            design: self.design,
            labels: &self.labels,
            hinge_weights: a,
            linear_weights: g,
            center,
            mu,
        }
    }
}

impl LevelProblem for RegressionLevel<'_> {
    fn dims(&self) -> (usize, usize, usize) {
        self.design.dims()
    }

    fn primal(&mut self, center: &DenseMatrix, mu: f64, warm: &PrimalPoint) -> Result<PrimalPoint> {
        let surrogate = |this: &Self, pt: &PrimalPoint| this.risk(pt) + mu * pt.coef.sub(center).frobenius_norm_sq();
        let mut solver = std::mem::replace(&mut self.solver, Box::new(SmoSolver::default()));
        let result = (|| -> Result<PrimalPoint> {
            let hinge_start = if self.loss == LossKind::Hinge || !self.started {
                let prob = self.subproblem(center, mu, &self.weights, &self.zeros);
                solver.solve(&prob, warm, self.max_inner_iters)?
            } else {
                warm.clone()
            };
            if self.loss == LossKind::Hinge {
                return Ok(hinge_start);
            }
            // psi(z) = 2(1 - z)₊ - 2(-z)₊: linearize the concave part each round
            let doubled: Vec<f64> = self.weights.iter().map(|w| 2.0 * w).collect();
            let mut point = hinge_start;
            let mut best = point.clone();
            let mut best_obj = surrogate(self, &point);
            let mut prev_active: Option<Vec<bool>> = None;
            for _ in 0..self.cccp_rounds {
                let dec = self
                    .design
                    .decisions(&point.coef, point.intercept, &point.covariate_coeffs);
                let active: Vec<bool> = dec.iter().zip(&self.labels).map(|(d, y)| d * y < 0.0).collect();
                if prev_active.as_ref() == Some(&active) {
                    break;
                }
                let linear: Vec<f64> = doubled
                    .iter()
                    .zip(&active)
                    .map(|(a, &on)| if on { *a } else { 0.0 })
                    .collect();
                let prob = self.subproblem(center, mu, &doubled, &linear);
                point = solver.solve(&prob, &point, self.max_inner_iters)?;
                let obj = surrogate(self, &point);
                if obj < best_obj {
                    best_obj = obj;
                    best = point.clone();
                }
                prev_active = Some(active);
            }
            Ok(best)
        })();
        self.solver = solver;
        self.started = true;
        let point = result?;
        if surrogate(self, &point) > surrogate(self, warm) {
            return Ok(warm.clone());
        }
        Ok(point)
    }

    fn objective(&self, point: &PrimalPoint, lambda: f64) -> f64 {
        self.risk(point) + lambda * point.coef.frobenius_norm_sq()
    }

    fn refit_offsets(&self, point: &mut PrimalPoint) {
        let (_, _, p) = self.design.dims();
        let trace = self.design.trace_values(&point.coef);
        let build = |point: &PrimalPoint, coord: Option<usize>| -> (Vec<MarginTerm>, f64) {
            let cov = self.design.covariate_values(&point.covariate_coeffs);
            let current = coord.map_or(point.intercept, |k| point.covariate_coeffs[k]);
            let terms = (0..trace.len())
                .map(|i| {
                    let feat = coord.map_or(1.0, |k| self.design.w(i)[k]);
                    let rest = trace[i] + point.intercept + cov[i] - feat * current;
                    MarginTerm {
                        offset: self.labels[i] * rest,
                        slope: self.labels[i] * feat,
                        hinge_weight: self.weights[i],
                        linear: 0.0,
                    }
                })
                .collect();
            (terms, current)
        };
        let (terms, cur) = build(point, None);
        point.intercept = argmin_margin_loss(&terms, self.loss, cur);
        for k in 0..p {
            let (terms, cur) = build(point, Some(k));
            point.covariate_coeffs[k] = argmin_margin_loss(&terms, self.loss, cur);
        }
        let (terms, cur) = build(point, None);
        point.intercept = argmin_margin_loss(&terms, self.loss, cur);
    }

    fn reset(&mut self) {
        self.solver.reset();
        self.started = false;
    }
}

/// Minimizes the primal block of the augmented Lagrangian for given (S, Λ, ρ).
#[allow(clippy::too_many_arguments)]
pub fn primal_update(
    data: &Dataset,
    level: f64,
    dual: &DenseMatrix,
    multiplier: &DenseMatrix,
    rho: f64,
    lambda: f64,
    kind: LossKind,
    warm: Option<&PrimalPoint>,
    max_inner_iters: usize,
) -> Result<PrimalPoint> {
    if !(rho > 0.0) {
        return Err(AssistError::InvalidInput(format!("rho must be positive, got {rho}")));
    }
    let (d1, d2, p) = data.dims();
    if dual.shape() != (d1, d2) || multiplier.shape() != (d1, d2) {
        return Err(AssistError::mismatch(
            format!("{d1}x{d2} dual and multiplier"),
            "other shapes",
        ));
    }
    let design = Design::from_dataset(data);
    let hp = Hyperparams {
        loss: kind,
        max_inner_iters,
        ..Default::default()
    };
    let mut problem = RegressionLevel::new(&design, &data.responses(), level, &hp)?;
    let center = offset_center(dual, multiplier, rho, lambda);
    let start = warm.cloned().unwrap_or_else(|| PrimalPoint::new(center.clone(), p));
    problem.primal(&center, rho + lambda, &start)
}

/// S̄ = (2ρS - Λ) / (2(ρ+λ)).
fn offset_center(dual: &DenseMatrix, multiplier: &DenseMatrix, rho: f64, lambda: f64) -> DenseMatrix {
    dual.lin_comb(2.0 * rho, multiplier, -1.0)
        .scaled(1.0 / (2.0 * (rho + lambda)))
}

/// S = best budgeted approximation of (2ρB + Λ)/(2ρ).
pub fn dual_update(
    primal: &DenseMatrix,
    multiplier: &DenseMatrix,
    rho: f64,
    budgets: (usize, usize, usize),
    projection_iters: usize,
) -> Result<DenseMatrix> {
    if !(rho > 0.0) {
        return Err(AssistError::InvalidInput(format!("rho must be positive, got {rho}")));
    }
    let target = primal.lin_comb(2.0 * rho, multiplier, 1.0).scaled(1.0 / (2.0 * rho));
    let (r, s1, s2) = budgets;
    project_sparse_lowrank(&target, r, s1, s2, projection_iters)
}

/// Λ' = Λ + 2ρ(B - S).
pub fn multiplier_update(multiplier: &DenseMatrix, primal: &DenseMatrix, dual: &DenseMatrix, rho: f64) -> DenseMatrix {
    let mut out = multiplier.clone();
    out.axpy(2.0 * rho, &primal.sub(dual));
    out
}

pub type DiagnosticSink<'a> = &'a mut dyn FnMut(&IterationRecord);

struct RunOutcome {
    classifier_point: PrimalPoint,
    objective: f64,
    iterations: usize,
    converged: bool,
    residual: f64,
    trace: Vec<IterationRecord>,
}

fn run_admm(
    problem: &mut dyn LevelProblem,
    hp: &Hyperparams,
    seed: u64,
    mut sink: Option<&mut dyn FnMut(&IterationRecord)>,
) -> Result<RunOutcome> {
    let (d1, d2, p) = problem.dims();
    let budgets = (hp.r, hp.s1, hp.s2);
    problem.reset();

    let mut rng = rng_from(seed);
    let noise = DenseMatrix::from_fn(d1, d2, |_, _| StandardNormal.sample(&mut rng));
    let norm = noise.frobenius_norm();
    let init = if norm > 0.0 { noise.scaled(1.0 / norm) } else { noise };
    let dual = project_sparse_lowrank(&init, hp.r, hp.s1, hp.s2, hp.projection_iters)?;

    let mut state = AdmmState {
        primal: PrimalPoint::new(dual.clone(), p),
        dual,
        multiplier: DenseMatrix::zeros(d1, d2),
        rho: hp.rho0,
        iter: 0,
        objective_trace: Vec::new(),
    };
    let mut trace = Vec::new();
    let mut converged = false;
    let mut residual = f64::INFINITY;

    for k in 0..hp.max_admm_iters {
        state.rho = hp.rho0 * hp.rho_growth.powi(k as i32);
        let rho = state.rho;
        let center = offset_center(&state.dual, &state.multiplier, rho, hp.lambda);
        let point = problem.primal(&center, rho + hp.lambda, &state.primal)?;
        if !point.is_finite() {
            return Err(AssistError::SolverDivergence(format!(
                "non-finite primal iterate at step {k}"
            )));
        }
        state.dual = dual_update(&point.coef, &state.multiplier, rho, budgets, hp.projection_iters)?;
        state.multiplier = multiplier_update(&state.multiplier, &point.coef, &state.dual, rho);
        if !state.multiplier.is_finite() {
            return Err(AssistError::SolverDivergence(format!(
                "non-finite multiplier at step {k}"
            )));
        }
        residual = point.coef.sub(&state.dual).frobenius_norm() / state.dual.frobenius_norm().max(1.0);
        let objective = problem.objective(&point, hp.lambda);
        state.primal = point;
        state.iter = k + 1;
        state.objective_trace.push(objective);
        let record = IterationRecord {
            iteration: k,
            objective,
            residual,
            rho,
        };
        if let Some(s) = sink.as_mut() {
            s(&record);
        }
        trace.push(record);
        if residual < hp.primal_tol {
            converged = true;
            break;
        }
    }

    let mut classifier_point = PrimalPoint {
        coef: state.dual.clone(),
        intercept: if problem.has_intercept() {
            state.primal.intercept
        } else {
            0.0
        },
        covariate_coeffs: state.primal.covariate_coeffs.clone(),
    };
    if problem.has_intercept() {
        problem.refit_offsets(&mut classifier_point);
        let bound = classifier_point.coef.frobenius_norm() + 1.0;
        classifier_point.intercept = classifier_point.intercept.clamp(-bound, bound);
    }
    let objective = problem.objective(&classifier_point, hp.lambda);
    Ok(RunOutcome {
        classifier_point,
        objective,
        iterations: state.iter,
        converged,
        residual,
        trace,
    })
}

/// Factors a budget-feasible matrix as u·vᵀ with exactly zero rows outside
/// its support.
pub(crate) fn factorize(s: &DenseMatrix, r: usize) -> Result<(DenseMatrix, DenseMatrix)> {
    let (d1, d2) = s.shape();
    let rows: Vec<usize> = (0..d1).filter(|&i| s.row(i).iter().any(|&v| v != 0.0)).collect();
    let cols: Vec<usize> = (0..d2).filter(|&j| (0..d1).any(|i| s.get(i, j) != 0.0)).collect();
    let mut u = DenseMatrix::zeros(d1, r);
    let mut v = DenseMatrix::zeros(d2, r);
    if rows.is_empty() {
        return Ok((u, v));
    }
    let sub = DenseMatrix::from_fn(rows.len(), cols.len(), |a, b| s.get(rows[a], cols[b]));
    let k = r.min(rows.len()).min(cols.len());
    let svd = truncated_svd(&sub, k)?;
    for c in 0..k {
        let sigma = svd.singular_values[c];
        for (a, &i) in rows.iter().enumerate() {
            u.set(i, c, svd.u.get(a, c) * sigma);
        }
        for (b, &j) in cols.iter().enumerate() {
            v.set(j, c, svd.v.get(b, c));
        }
    }
    Ok((u, v))
}

/// Multi-start ADMM on an arbitrary level problem. Start seeds derive from
/// (seed, level, start index); the start with the lowest objective wins.
pub fn fit_level(
    problem: &mut dyn LevelProblem,
    level: f64,
    hp: &Hyperparams,
    mut sink: Option<DiagnosticSink>,
) -> Result<(TraceFunction, FitDiagnostics)> {
    let (d1, d2, _) = problem.dims();
    hp.validate_for(d1, d2)?;
    let mut best: Option<(usize, RunOutcome)> = None;
    let mut last_err = None;
    for start in 0..hp.n_starts {
        let seed = derive_seed(hp.seed, &[level.to_bits(), start as u64]);
        let run = run_admm(
            problem,
            hp,
            seed,
            sink.as_mut().map(|s| &mut **s as &mut dyn FnMut(&IterationRecord)),
        );
        match run {
            Ok(out) => {
                if best.as_ref().is_none_or(|(_, b)| out.objective < b.objective) {
                    best = Some((start, out));
                }
            }
            Err(e @ AssistError::SolverDivergence(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    let (start, out) = best.ok_or_else(|| {
        AssistError::SolverDivergence(format!(
            "all {} starts diverged: {}",
            hp.n_starts,
            last_err.map_or_else(String::new, |e| e.to_string())
        ))
    })?;
    let (u, v) = factorize(&out.classifier_point.coef, hp.r)?;
    let tf = TraceFunction {
        u,
        v,
        intercept: out.classifier_point.intercept,
        covariate_coeffs: out.classifier_point.covariate_coeffs,
        rank_budget: hp.r,
        support_budget: (hp.s1, hp.s2),
        level,
    };
    let diag = FitDiagnostics {
        level,
        start,
        iterations: out.iterations,
        converged: out.converged,
        residual: out.residual,
        objective: out.objective,
        trace: out.trace,
    };
    Ok((tf, diag))
}

/// Fits the level-π classifier on a design with rescaled responses.
pub fn fit_on_design(
    design: &Design,
    responses: &[f64],
    level: f64,
    hp: &Hyperparams,
    sink: Option<DiagnosticSink>,
) -> Result<(TraceFunction, FitDiagnostics)> {
    let (d1, d2, _) = design.dims();
    hp.validate_for(d1, d2)?;
    let mut problem = RegressionLevel::new(design, responses, level, hp)?;
    fit_level(&mut problem, level, hp, sink)
}

/// Fits one level's sign classifier by multi-start ADMM.
pub fn fit_sign_classifier(data: &Dataset, level: f64, hp: &Hyperparams) -> Result<TraceFunction> {
    fit_sign_classifier_with_diagnostics(data, level, hp, None).map(|(tf, _)| tf)
}

pub fn fit_sign_classifier_with_diagnostics(
    data: &Dataset,
    level: f64,
    hp: &Hyperparams,
    sink: Option<DiagnosticSink>,
) -> Result<(TraceFunction, FitDiagnostics)> {
    let design = Design::from_dataset(data);
    fit_on_design(&design, &data.responses(), level, hp, sink)
}
