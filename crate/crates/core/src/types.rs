//! Domain types shared by the solver, aggregation, completion and tuning layers.

use serde::{Deserialize, Serialize};

use crate::error::{AssistError, Result};
use crate::loss::LossKind;
use crate::matrix::{dot, DenseMatrix};

/// Affine map from raw responses onto [-1, 1]: `y ↦ (y - shift) / span`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseScale {
    pub shift: f64,
    pub span: f64,
}

impl ResponseScale {
    pub const IDENTITY: ResponseScale = ResponseScale { shift: 0.0, span: 1.0 };

    pub fn new(shift: f64, span: f64) -> Result<Self> {
        if !shift.is_finite() || !span.is_finite() || span <= 0.0 {
            return Err(AssistError::InvalidInput(format!(
                "response scale needs finite shift and positive span, got ({shift}, {span})"
            )));
        }
        Ok(ResponseScale { shift, span })
    }

    /// Midrange/half-range scale of the given values (span 1 when constant).
    pub fn fit(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(AssistError::InvalidInput("empty response array".into()));
        }
        if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
            return Err(AssistError::InvalidInput(format!("non-finite response at index {i}")));
        }
        let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let shift = lo + (hi - lo) / 2.0;
        let half = (hi - lo) / 2.0;
        let span = if half > 0.0 { half } else { 1.0 };
        Ok(ResponseScale { shift, span })
    }

    #[inline]
    pub fn forward(&self, raw: f64) -> f64 {
        ((raw - self.shift) / self.span).clamp(-1.0, 1.0)
    }

    #[inline]
    pub fn inverse(&self, scaled: f64) -> f64 {
        self.shift + self.span * scaled
    }

    /// Raw-scale interval that maps onto [-1, 1].
    pub fn raw_range(&self) -> (f64, f64) {
        (self.inverse(-1.0), self.inverse(1.0))
    }
}

/// Rescales raw responses to [-1, 1] and returns the map used.
pub fn rescale_responses(raw: &[f64]) -> Result<(Vec<f64>, ResponseScale)> {
    let scale = ResponseScale::fit(raw)?;
    Ok((raw.iter().map(|&y| scale.forward(y)).collect(), scale))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub predictor: DenseMatrix,
    pub covariates: Vec<f64>,
    /// Response on the rescaled [-1, 1] axis.
    pub response: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    d1: usize,
    d2: usize,
    p: usize,
    samples: Vec<Sample>,
    scale: ResponseScale,
}

impl Dataset {
    /// Builds a dataset from raw responses, fitting a fresh response scale.
    pub fn from_raw(predictors: Vec<DenseMatrix>, covariates: Vec<Vec<f64>>, raw_responses: &[f64]) -> Result<Self> {
        let scale = ResponseScale::fit(raw_responses)?;
        Self::with_scale(predictors, covariates, raw_responses, scale)
    }

    /// Builds a dataset using an existing response scale (values outside the
    /// scale's range are clamped onto [-1, 1]).
    pub fn with_scale(
        predictors: Vec<DenseMatrix>,
        covariates: Vec<Vec<f64>>,
        raw_responses: &[f64],
        scale: ResponseScale,
    ) -> Result<Self> {
        let n = predictors.len();
        if n == 0 {
            return Err(AssistError::InvalidInput("dataset needs at least one sample".into()));
        }
        if raw_responses.len() != n {
            return Err(AssistError::mismatch(format!("{n} responses"), raw_responses.len()));
        }
        let covariates = if covariates.is_empty() {
            vec![Vec::new(); n]
        } else {
            covariates
        };
        if covariates.len() != n {
            return Err(AssistError::mismatch(format!("{n} covariate rows"), covariates.len()));
        }
        let (d1, d2) = predictors[0].shape();
        let p = covariates[0].len();
        let mut samples = Vec::with_capacity(n);
        for (i, ((x, w), &y)) in predictors.into_iter().zip(covariates).zip(raw_responses).enumerate() {
            if x.shape() != (d1, d2) {
                return Err(AssistError::mismatch(
                    format!("predictor {d1}x{d2}"),
                    format!("{}x{} at sample {i}", x.rows(), x.cols()),
                ));
            }
            if w.len() != p {
                return Err(AssistError::mismatch(
                    format!("{p} covariates"),
                    format!("{} at sample {i}", w.len()),
                ));
            }
            if !y.is_finite() || w.iter().any(|v| !v.is_finite()) {
                return Err(AssistError::InvalidInput(format!("non-finite value in sample {i}")));
            }
            samples.push(Sample {
                predictor: x,
                covariates: w,
                response: scale.forward(y),
            });
        }
        Ok(Dataset {
            d1,
            d2,
            p,
            samples,
            scale,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.d1, self.d2, self.p)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn scale(&self) -> ResponseScale {
        self.scale
    }

    pub fn responses(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.response).collect()
    }

    pub fn raw_responses(&self) -> Vec<f64> {
        self.samples.iter().map(|s| self.scale.inverse(s.response)).collect()
    }

    /// Subset of samples, rescaled from their raw responses.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let raw: Vec<f64> = indices
            .iter()
            .map(|&i| self.scale.inverse(self.samples[i].response))
            .collect();
        let xs = indices.iter().map(|&i| self.samples[i].predictor.clone()).collect();
        let ws = indices.iter().map(|&i| self.samples[i].covariates.clone()).collect();
        Dataset::from_raw(xs, ws, &raw)
    }

    /// Same samples with every predictor shifted by `-center`.
    pub(crate) fn centered(&self, center: &DenseMatrix) -> Dataset {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                predictor: s.predictor.sub(center),
                covariates: s.covariates.clone(),
                response: s.response,
            })
            .collect();
        Dataset {
            d1: self.d1,
            d2: self.d2,
            p: self.p,
            samples,
            scale: self.scale,
        }
    }

    /// Entrywise mean of the predictors.
    pub fn predictor_mean(&self) -> DenseMatrix {
        let mut acc = DenseMatrix::zeros(self.d1, self.d2);
        for s in &self.samples {
            acc.axpy(1.0, &s.predictor);
        }
        acc.scaled(1.0 / self.len() as f64)
    }
}

/// One level's classifier `X ↦ ⟨X, u·vᵀ⟩ + b + Wᵀc`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFunction {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    pub intercept: f64,
    pub covariate_coeffs: Vec<f64>,
    pub rank_budget: usize,
    pub support_budget: (usize, usize),
    pub level: f64,
}

impl TraceFunction {
    /// The all-zero classifier (predicts -1 everywhere by the sign convention).
    pub fn zero(d1: usize, d2: usize, p: usize, level: f64) -> Self {
        TraceFunction {
            u: DenseMatrix::zeros(d1, 1),
            v: DenseMatrix::zeros(d2, 1),
            intercept: 0.0,
            covariate_coeffs: vec![0.0; p],
            rank_budget: 1,
            support_budget: (d1, d2),
            level,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.u.rows(), self.v.rows(), self.covariate_coeffs.len())
    }

    pub fn coefficient_matrix(&self) -> DenseMatrix {
        coefficient_matrix(self)
    }

    /// φ(X) = ⟨X, B⟩ + b + Wᵀc.
    pub fn evaluate(&self, x: &DenseMatrix, w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.u.cols() {
            // uₖᵀ X vₖ
            for i in 0..x.rows() {
                let ui = self.u.get(i, k);
                if ui == 0.0 {
                    continue;
                }
                let xi = x.row(i);
                let mut s = 0.0;
                for (j, &xij) in xi.iter().enumerate() {
                    s += xij * self.v.get(j, k);
                }
                acc += ui * s;
            }
        }
        acc + self.intercept + dot(w, &self.covariate_coeffs)
    }

    /// Scales the decision function by `alpha`: B, b and c all pick up the
    /// same factor (only `u` is scaled, so B = u·vᵀ scales linearly).
    pub fn rescaled(&self, alpha: f64) -> Self {
        TraceFunction {
            u: self.u.scaled(alpha),
            intercept: alpha * self.intercept,
            covariate_coeffs: self.covariate_coeffs.iter().map(|c| alpha * c).collect(),
            ..self.clone()
        }
    }

    pub(crate) fn check_dims(&self, d1: usize, d2: usize, p: usize) -> Result<()> {
        if self.dims() != (d1, d2, p) || self.u.cols() != self.v.cols() {
            return Err(AssistError::mismatch(
                format!("classifier dims ({d1}, {d2}, {p})"),
                format!(
                    "{:?} with factor widths {} and {}",
                    self.dims(),
                    self.u.cols(),
                    self.v.cols()
                ),
            ));
        }
        Ok(())
    }
}

/// Materializes B = u·vᵀ.
pub fn coefficient_matrix(tf: &TraceFunction) -> DenseMatrix {
    tf.u.matmul_transpose(&tf.v)
        .expect("factor widths agree by construction")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct LevelGrid {
    resolution: usize,
    levels: Vec<f64>,
}

impl TryFrom<usize> for LevelGrid {
    type Error = AssistError;
    fn try_from(h: usize) -> Result<Self> {
        LevelGrid::new(h)
    }
}

impl From<LevelGrid> for usize {
    fn from(g: LevelGrid) -> usize {
        g.resolution
    }
}

impl LevelGrid {
    /// Levels {-1, …, -1/H, 0, 1/H, …, 1}.
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(AssistError::InvalidInput("resolution H must be positive".into()));
        }
        let h = resolution as i64;
        let levels = (-h..=h).map(|k| k as f64 / h as f64).collect();
        Ok(LevelGrid { resolution, levels })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Settings governing a fit. Field names double as config-file keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub r: usize,
    pub s1: usize,
    pub s2: usize,
    #[serde(rename = "H")]
    pub h: usize,
    pub lambda: f64,
    pub loss: LossKind,
    /// Initial ADMM step size; grows by `rho_growth` every iteration.
    pub rho0: f64,
    pub rho_growth: f64,
    pub max_admm_iters: usize,
    pub max_inner_iters: usize,
    pub primal_tol: f64,
    pub n_starts: usize,
    pub seed: u64,
    /// Registered name of the primal (B, b, c) solver.
    pub primal_solver: String,
    /// Alternation rounds for the sparse low-rank projection.
    pub projection_iters: usize,
    /// Convex-concave rounds for the psi loss.
    pub cccp_rounds: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            r: 1,
            s1: 1,
            s2: 1,
            h: 20,
            lambda: 0.1,
            loss: LossKind::Hinge,
            rho0: 0.01,
            rho_growth: 1.1,
            max_admm_iters: 100,
            max_inner_iters: 500,
            primal_tol: 1e-3,
            n_starts: 5,
            seed: 0,
            primal_solver: "smo".to_string(),
            projection_iters: 20,
            cccp_rounds: 5,
        }
    }
}

impl Hyperparams {
    /// Defaults with H = min(20, ⌊√n⌋) and λ = min(0.1, 1/n).
    pub fn for_sample_size(n: usize) -> Self {
        Hyperparams {
            h: default_resolution(n),
            lambda: default_lambda(n),
            ..Default::default()
        }
    }

    pub fn with_budgets(mut self, r: usize, s1: usize, s2: usize) -> Self {
        self.r = r;
        self.s1 = s1;
        self.s2 = s2;
        self
    }

    /// Checks the hyperparameters against predictor dimensions.
    pub fn validate_for(&self, d1: usize, d2: usize) -> Result<()> {
        validate_budgets(self.r, self.s1, self.s2, d1, d2)?;
        if self.h == 0 {
            return Err(AssistError::InvalidInput("H must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(AssistError::InvalidInput(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(AssistError::InvalidInput(format!(
                "rho0 must be > 0, got {}",
                self.rho0
            )));
        }
        if !(self.rho_growth > 1.0 && self.rho_growth.is_finite()) {
            return Err(AssistError::InvalidInput(format!(
                "rho_growth must be > 1, got {}",
                self.rho_growth
            )));
        }
        if self.max_admm_iters == 0 || self.max_inner_iters == 0 || self.n_starts == 0 {
            return Err(AssistError::InvalidInput(
                "iteration caps and n_starts must be positive".into(),
            ));
        }
        if !(self.primal_tol > 0.0) {
            return Err(AssistError::InvalidInput("primal_tol must be positive".into()));
        }
        if self.loss == LossKind::ZeroOne {
            return Err(AssistError::InvalidInput(
                "the zero-one loss is an evaluation metric, train with hinge or psi".into(),
            ));
        }
        Ok(())
    }
}

pub fn default_resolution(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize).clamp(1, 20)
}

pub fn default_lambda(n: usize) -> f64 {
    (1.0 / n.max(1) as f64).min(0.1)
}

pub(crate) fn validate_budgets(r: usize, s1: usize, s2: usize, d1: usize, d2: usize) -> Result<()> {
    if r == 0 || r > s1.min(s2) || s1 > d1 || s2 > d2 {
        return Err(AssistError::InfeasibleBudget(format!(
            "need 1 <= r <= min(s1, s2), s1 <= d1, s2 <= d2; got r={r}, s1={s1}, s2={s2} for {d1}x{d2}"
        )));
    }
    Ok(())
}

/// Fitted model: one classifier per level plus the response map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignSeriesModel {
    pub grid: LevelGrid,
    pub classifiers: Vec<TraceFunction>,
    pub scale: ResponseScale,
    pub dims: (usize, usize, usize),
    /// Predictors are shifted by `-center` before the classifiers see them.
    pub center: DenseMatrix,
}
