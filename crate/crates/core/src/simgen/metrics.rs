use rand::seq::index::sample;

use crate::assist::predict_many;
use crate::error::{AssistError, Result};
use crate::loss::sgn;
use crate::matrix::DenseMatrix;
use crate::projection::singular_values;
use crate::rng::{rng_from, Rng};
use crate::types::{Dataset, SignSeriesModel};

use super::regression::TruthOracle;

/// Smallest r whose rank-r truncation lies within `rel_tol·‖m‖_F` of m.
pub fn numerical_rank(m: &DenseMatrix, rel_tol: f64) -> Result<usize> {
    if !(rel_tol > 0.0) {
        return Err(AssistError::InvalidInput(format!(
            "rel_tol must be positive, got {rel_tol}"
        )));
    }
    let sv = singular_values(m);
    let total: f64 = sv.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Ok(0);
    }
    let budget = rel_tol * rel_tol * total;
    // suffix sums avoid cancellation in the tail energy
    let mut tail = 0.0;
    let mut rank = sv.len();
    for (r, s) in sv.iter().enumerate().rev() {
        tail += s * s;
        if tail > budget {
            break;
        }
        rank = r;
    }
    Ok(rank)
}

/// Monte Carlo mean of |f̂(X) - f(X)| over fresh predictor draws.
pub fn l1_error(
    predict: impl Fn(&DenseMatrix) -> Result<f64>,
    truth: &dyn TruthOracle,
    m_draws: usize,
    seed: u64,
) -> Result<f64> {
    if m_draws == 0 {
        return Err(AssistError::InvalidInput("m_draws must be positive".into()));
    }
    let mut rng = rng_from(seed);
    let mut acc = 0.0;
    for _ in 0..m_draws {
        let x = truth.sample_predictor(&mut rng);
        acc += (predict(&x)? - truth.f(&x)).abs();
    }
    Ok(acc / m_draws as f64)
}

/// L1 error of the best constant predictor (the median of f), estimated on
/// the same kind of draws as [`l1_error`].
pub fn best_constant_l1(truth: &dyn TruthOracle, m_draws: usize, seed: u64) -> Result<f64> {
    if m_draws == 0 {
        return Err(AssistError::InvalidInput("m_draws must be positive".into()));
    }
    let mut rng: Rng = rng_from(seed);
    let mut fs: Vec<f64> = (0..m_draws)
        .map(|_| truth.f(&truth.sample_predictor(&mut rng)))
        .collect();
    fs.sort_by(f64::total_cmp);
    let med = fs[fs.len() / 2];
    Ok(fs.iter().map(|f| (f - med).abs()).sum::<f64>() / m_draws as f64)
}

/// Fraction of test samples whose predicted side of the response midpoint
/// differs from the label's side.
pub fn misclassification_at_half(model: &SignSeriesModel, test: &Dataset) -> Result<f64> {
    let preds = predict_many(model, test)?;
    let mid = model.scale.inverse(0.0);
    let wrong = preds
        .iter()
        .zip(test.raw_responses())
        .filter(|(p, y)| sgn(**p - mid) != sgn(y - mid))
        .count();
    Ok(wrong as f64 / preds.len() as f64)
}

/// `round(observed_frac·d1·d2)` distinct cells drawn uniformly, in row-major order.
pub fn uniform_mask(d1: usize, d2: usize, observed_frac: f64, seed: u64) -> Result<Vec<(usize, usize)>> {
    if !(0.0..=1.0).contains(&observed_frac) {
        return Err(AssistError::InvalidInput(format!(
            "fraction {observed_frac} outside [0, 1]"
        )));
    }
    let total = d1 * d2;
    let k = (observed_frac * total as f64).round() as usize;
    let mut idx = sample(&mut rng_from(seed), total, k).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|t| (t / d2, t % d2)).collect())
}

/// Conditional law of Y at one predictor value: finite support with
/// probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct PointLaw {
    pub mass: f64,
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl PointLaw {
    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }
}

/// A predictor space with finitely many points.
#[derive(Clone, Debug, PartialEq)]
pub struct FinitePredictorSpace {
    pub points: Vec<PointLaw>,
}

impl FinitePredictorSpace {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AssistError::InvalidInput(msg));
        if self.points.is_empty() {
            return bad("empty predictor space".into());
        }
        let mut total = 0.0;
        for (k, p) in self.points.iter().enumerate() {
            if !(p.mass >= 0.0) || p.values.len() != p.probs.len() || p.values.is_empty() {
                return bad(format!("point {k} has an invalid law"));
            }
            if p.probs.iter().any(|&q| !(q >= 0.0)) || (p.probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("conditional law of point {k} does not sum to 1"));
            }
            if p.values.iter().any(|v| !(-1.0..=1.0).contains(v)) {
                return bad(format!("point {k} has responses outside [-1, 1]"));
            }
            total += p.mass;
        }
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("masses sum to {total}"));
        }
        Ok(())
    }

    pub fn conditional_means(&self) -> Vec<f64> {
        self.points.iter().map(PointLaw::mean).collect()
    }
}

/// Exact population risk E[|Y - π|·1(sgn(Y - π) ≠ a(X))] of a sign assignment.
pub fn brute_force_level_risk(space: &FinitePredictorSpace, level: f64, assignment: &[f64]) -> Result<f64> {
    space.validate()?;
    if assignment.len() != space.points.len() {
        return Err(AssistError::mismatch(space.points.len(), assignment.len()));
    }
    let mut risk = 0.0;
    for (p, &a) in space.points.iter().zip(assignment) {
        let a = sgn(a);
        let inner: f64 = p
            .values
            .iter()
            .zip(&p.probs)
            .filter(|(y, _)| sgn(**y - level) != a)
            .map(|(y, q)| q * (y - level).abs())
            .sum();
        risk += p.mass * inner;
    }
    Ok(risk)
}
