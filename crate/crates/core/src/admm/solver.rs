//! Primal (B, b, c) solvers for the ridge-offset weighted classification step.
//!
//! Each ADMM primal step, and each convex-concave round of the psi loss,
//! reduces to the convex problem
//!
//! ```text
//! minimize  Σᵢ [aᵢ (1 - zᵢ)₊ + gᵢ zᵢ] + μ ‖B - S̄‖²_F,   zᵢ = yᵢ (⟨Xᵢ, B⟩ + b + Wᵢᵀc)
//! ```
//!
//! with hinge weights `a ≥ 0`, linear weights `g` (zero for the hinge loss)
//! and labels `y ∈ {-1, +1}`. Solvers are selected by name through
//! [`PRIMAL_SOLVERS`].

use crate::error::{AssistError, Result};
use crate::matrix::DenseMatrix;
use crate::registry::{GlobalRegistry, Registry};

use super::design::Design;
use super::line::{argmin_convex, MarginTerm};

#[derive(Clone, Debug, PartialEq)]
pub struct PrimalPoint {
    pub coef: DenseMatrix,
    pub intercept: f64,
    pub covariate_coeffs: Vec<f64>,
}

impl PrimalPoint {
    pub fn new(coef: DenseMatrix, p: usize) -> Self {
        PrimalPoint {
            coef,
            intercept: 0.0,
            covariate_coeffs: vec![0.0; p],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coef.is_finite() && self.intercept.is_finite() && self.covariate_coeffs.iter().all(|c| c.is_finite())
    }
}

pub struct ConvexSubproblem<'a> {
    pub design: &'a Design,
    pub labels: &'a [f64],
    pub hinge_weights: &'a [f64],
    pub linear_weights: &'a [f64],
    pub center: &'a DenseMatrix,
    pub mu: f64,
}

impl ConvexSubproblem<'_> {
    pub fn objective(&self, point: &PrimalPoint) -> f64 {
        let dec = self
            .design
            .decisions(&point.coef, point.intercept, &point.covariate_coeffs);
        let mut loss = 0.0;
        for (i, d) in dec.iter().enumerate() {
            let z = self.labels[i] * d;
            loss += self.hinge_weights[i] * (1.0 - z).max(0.0) + self.linear_weights[i] * z;
        }
        loss + self.mu * point.coef.sub(self.center).frobenius_norm_sq()
    }

    /// Exact coordinate refits of every covariate coefficient, then the intercept.
    pub(crate) fn refit_offsets(&self, point: &mut PrimalPoint) {
        let (_, _, p) = self.design.dims();
        let trace = self.design.trace_values(&point.coef);
        for k in 0..p {
            let cov = self.design.covariate_values(&point.covariate_coeffs);
            let terms: Vec<MarginTerm> = (0..trace.len())
                .map(|i| {
                    let wik = self.design.w(i)[k];
                    let rest = trace[i] + point.intercept + cov[i] - wik * point.covariate_coeffs[k];
                    MarginTerm {
                        offset: self.labels[i] * rest,
                        slope: self.labels[i] * wik,
                        hinge_weight: self.hinge_weights[i],
                        linear: self.linear_weights[i],
                    }
                })
                .collect();
            point.covariate_coeffs[k] = argmin_convex(&terms, point.covariate_coeffs[k]);
        }
        let cov = self.design.covariate_values(&point.covariate_coeffs);
        let terms: Vec<MarginTerm> = (0..trace.len())
            .map(|i| MarginTerm {
                offset: self.labels[i] * (trace[i] + cov[i]),
                slope: self.labels[i],
                hinge_weight: self.hinge_weights[i],
                linear: self.linear_weights[i],
            })
            .collect();
        point.intercept = argmin_convex(&terms, point.intercept);
    }
}

pub trait PrimalSolver: Send {
    fn name(&self) -> &'static str;

    /// Approximately minimizes the subproblem starting from `warm`.
    fn solve(&mut self, prob: &ConvexSubproblem, warm: &PrimalPoint, max_iters: usize) -> Result<PrimalPoint>;

    /// Drops any state carried between calls (called between ADMM starts).
    fn reset(&mut self) {}
}

pub static PRIMAL_SOLVERS: GlobalRegistry<dyn PrimalSolver> = GlobalRegistry::new(|| {
    let mut reg: Registry<dyn PrimalSolver> = Registry::new("primal solver");
    reg.register("smo", || Box::new(SmoSolver::default()));
    reg.register("subgradient", || Box::new(SubgradientSolver::default()));
    reg
});

/// Dual solver: sequential minimal optimization over pairs of dual variables,
/// which enforces the unpenalized intercept exactly through Σ γᵢ yᵢ = 0.
/// Covariate coefficients, when present, alternate with the dual solve via
/// exact coordinate steps. The dual iterate is kept between calls with the
/// same box so consecutive ADMM steps warm start.
#[derive(Default)]
pub struct SmoSolver {
    gamma: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

const SMO_TOL: f64 = 1e-5;
const SMO_TAU: f64 = 1e-12;
const COVARIATE_ROUNDS: usize = 3;

impl SmoSolver {
    fn prepare_box(&mut self, prob: &ConvexSubproblem) {
        let n = prob.labels.len();
        let lower: Vec<f64> = prob.linear_weights.iter().map(|g| -g).collect();
        let upper: Vec<f64> = prob
            .hinge_weights
            .iter()
            .zip(prob.linear_weights)
            .map(|(a, g)| a - g)
            .collect();
        if self.gamma.len() != n || lower != self.lower || upper != self.upper {
            self.gamma = vec![0.0; n];
        }
        self.lower = lower;
        self.upper = upper;
    }

    /// Runs SMO for fixed offsets and returns (Δ = B - S̄, intercept).
    fn solve_dual(&mut self, prob: &ConvexSubproblem, offsets: &[f64], max_iters: usize) -> (DenseMatrix, f64) {
        let n = prob.labels.len();
        let y = prob.labels;
        let k = prob.design.gram();
        let inv = 1.0 / (2.0 * prob.mu);
        let gamma = &mut self.gamma;
        let (lo, up) = (&self.lower, &self.upper);

        let mut grad: Vec<f64> = (0..n)
            .map(|i| {
                let mut acc = 0.0;
                let row = &k[i * n..(i + 1) * n];
                for j in 0..n {
                    if gamma[j] != 0.0 {
                        acc += gamma[j] * y[j] * row[j];
                    }
                }
                y[i] * acc * inv + y[i] * offsets[i] - 1.0
            })
            .collect();

        let can_up = |t: usize, g: &[f64]| (y[t] > 0.0 && g[t] < up[t]) || (y[t] < 0.0 && g[t] > lo[t]);
        let can_low = |t: usize, g: &[f64]| (y[t] > 0.0 && g[t] > lo[t]) || (y[t] < 0.0 && g[t] < up[t]);

        for _ in 0..max_iters {
            let mut gmax = f64::NEG_INFINITY;
            let mut i_sel = usize::MAX;
            for t in 0..n {
                if can_up(t, gamma) {
                    let v = -y[t] * grad[t];
                    if v > gmax {
                        gmax = v;
                        i_sel = t;
                    }
                }
            }
            if i_sel == usize::MAX {
                break;
            }
            let i = i_sel;
            let kii = k[i * n + i];
            let mut gmin = f64::INFINITY;
            let mut j_sel = usize::MAX;
            let mut best_score = f64::INFINITY;
            for t in 0..n {
                if !can_low(t, gamma) {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let diff = gmax - v;
                if diff > 0.0 {
                    let curv = ((kii + k[t * n + t] - 2.0 * k[i * n + t]) * inv).max(SMO_TAU);
                    let score = -diff * diff / curv;
                    if score < best_score {
                        best_score = score;
                        j_sel = t;
                    }
                }
            }
            if gmax - gmin < SMO_TOL || j_sel == usize::MAX {
                break;
            }
            let j = j_sel;
            let curv = ((kii + k[j * n + j] - 2.0 * k[i * n + j]) * inv).max(SMO_TAU);
            let cap_i = if y[i] > 0.0 { up[i] - gamma[i] } else { gamma[i] - lo[i] };
            let cap_j = if y[j] > 0.0 { gamma[j] - lo[j] } else { up[j] - gamma[j] };
            let step = ((gmax + y[j] * grad[j]) / curv).min(cap_i).min(cap_j);
            if step <= 0.0 {
                break;
            }
            gamma[i] += y[i] * step;
            gamma[j] -= y[j] * step;
            // snap onto the box to keep bound tests exact
            for t in [i, j] {
                if (gamma[t] - up[t]).abs() <= 1e-15 * up[t].abs().max(1.0) {
                    gamma[t] = up[t];
                } else if (gamma[t] - lo[t]).abs() <= 1e-15 * lo[t].abs().max(1.0) {
                    gamma[t] = lo[t];
                }
            }
            let (ki, kj) = (&k[i * n..(i + 1) * n], &k[j * n..(j + 1) * n]);
            for t in 0..n {
                grad[t] += step * y[t] * (ki[t] - kj[t]) * inv;
            }
        }

        // intercept from the KKT conditions
        let mut free_sum = 0.0;
        let mut free_count = 0usize;
        let mut lb = f64::NEG_INFINITY;
        let mut ub = f64::INFINITY;
        for t in 0..n {
            if up[t] <= lo[t] {
                continue;
            }
            let v = -y[t] * grad[t];
            let at_lo = gamma[t] <= lo[t];
            let at_up = gamma[t] >= up[t];
            if !at_lo && !at_up {
                free_sum += v;
                free_count += 1;
            } else if (y[t] > 0.0) == at_lo {
                lb = lb.max(v);
            } else {
                ub = ub.min(v);
            }
        }
        let intercept = if free_count > 0 {
            free_sum / free_count as f64
        } else {
            match (lb.is_finite(), ub.is_finite()) {
                (true, true) => 0.5 * (lb + ub),
                (true, false) => lb,
                (false, true) => ub,
                (false, false) => 0.0,
            }
        };
        let coefs: Vec<f64> = (0..n).map(|t| gamma[t] * y[t] * inv).collect();
        (prob.design.combine(&coefs), intercept)
    }
}

impl PrimalSolver for SmoSolver {
    fn name(&self) -> &'static str {
        "smo"
    }

    fn solve(&mut self, prob: &ConvexSubproblem, warm: &PrimalPoint, max_iters: usize) -> Result<PrimalPoint> {
        self.prepare_box(prob);
        let (_, _, p) = prob.design.dims();
        let base = prob.design.trace_values(prob.center);
        let mut point = warm.clone();
        let rounds = if p > 0 { COVARIATE_ROUNDS } else { 1 };
        for _ in 0..rounds {
            let cov = prob.design.covariate_values(&point.covariate_coeffs);
            let offsets: Vec<f64> = base.iter().zip(&cov).map(|(a, b)| a + b).collect();
            let (delta, intercept) = self.solve_dual(prob, &offsets, max_iters);
            point.coef = prob.center.add(&delta);
            point.intercept = intercept;
            if p > 0 {
                prob.refit_offsets(&mut point);
            }
        }
        if !point.is_finite() {
            return Err(AssistError::SolverDivergence("smo produced non-finite iterate".into()));
        }
        Ok(point)
    }

    fn reset(&mut self) {
        self.gamma.clear();
        self.lower.clear();
        self.upper.clear();
    }
}

/// Proximal subgradient descent with step η_t = η₀/√t: a subgradient step on
/// the loss terms followed by the exact prox of the ridge-offset penalty.
/// Returns the best iterate by objective.
pub struct SubgradientSolver {
    pub eta0: f64,
}

impl Default for SubgradientSolver {
    fn default() -> Self {
        SubgradientSolver { eta0: 1.0 }
    }
}

impl PrimalSolver for SubgradientSolver {
    fn name(&self) -> &'static str {
        "subgradient"
    }

    fn solve(&mut self, prob: &ConvexSubproblem, warm: &PrimalPoint, max_iters: usize) -> Result<PrimalPoint> {
        let design = prob.design;
        let n = design.n();
        let (_, _, p) = design.dims();
        let mut cur = warm.clone();
        let mut best = warm.clone();
        let mut best_obj = prob.objective(warm);
        for t in 1..=max_iters {
            let dec = design.decisions(&cur.coef, cur.intercept, &cur.covariate_coeffs);
            // ∂/∂(decision) of each sample's term
            let coefs: Vec<f64> = (0..n)
                .map(|i| {
                    let z = prob.labels[i] * dec[i];
                    let active = if z < 1.0 { prob.hinge_weights[i] } else { 0.0 };
                    prob.labels[i] * (prob.linear_weights[i] - active)
                })
                .collect();
            let eta = self.eta0 / (t as f64).sqrt();
            let grad_b = design.combine(&coefs);
            let shrink = 1.0 / (1.0 + 2.0 * eta * prob.mu);
            let mut next = cur.coef.lin_comb(1.0, &grad_b, -eta);
            next.axpy(2.0 * eta * prob.mu, prob.center);
            cur.coef = next.scaled(shrink);
            cur.intercept -= eta * coefs.iter().sum::<f64>();
            for k in 0..p {
                let g: f64 = (0..n).map(|i| coefs[i] * design.w(i)[k]).sum();
                cur.covariate_coeffs[k] -= eta * g;
            }
            if !cur.is_finite() {
                return Err(AssistError::SolverDivergence(format!(
                    "subgradient iterate became non-finite at step {t}"
                )));
            }
            let obj = prob.objective(&cur);
            if obj < best_obj {
                best_obj = obj;
                best = cur.clone();
            }
        }
        Ok(best)
    }
}
