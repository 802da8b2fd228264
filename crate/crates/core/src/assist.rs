//! The sign-series estimator: one weighted classifier per level, aggregated
//! as f̂(X) = (1/(2H+1)) Σ_π sgn φ̂_π(X).

use rayon::prelude::*;

use crate::admm::{fit_on_design, Design, FitDiagnostics};
use crate::error::{AssistError, Result};
use crate::loss::sgn;
use crate::matrix::DenseMatrix;
use crate::rng::derive_seed;
use crate::types::{Dataset, Hyperparams, LevelGrid, SignSeriesModel};

/// Fits every level classifier and records the grid and response scale.
pub fn fit(data: &Dataset, hp: &Hyperparams) -> Result<SignSeriesModel> {
    fit_with_diagnostics(data, hp).map(|(m, _)| m)
}

/// As [`fit`], also returning per-level solver diagnostics in grid order.
pub fn fit_with_diagnostics(data: &Dataset, hp: &Hyperparams) -> Result<(SignSeriesModel, Vec<FitDiagnostics>)> {
    let (d1, d2, p) = data.dims();
    hp.validate_for(d1, d2)?;
    let grid = LevelGrid::new(hp.h)?;
    let center = data.predictor_mean();
    let centered = data.centered(&center);
    let design = Design::from_dataset(&centered);
    let responses = centered.responses();

    let fits: Vec<_> = grid
        .levels()
        .par_iter()
        .enumerate()
        .map(|(k, &level)| {
            let level_hp = Hyperparams {
                seed: derive_seed(hp.seed, &[k as u64]),
                ..hp.clone()
            };
            fit_on_design(&design, &responses, level, &level_hp, None).map_err(|e| e.at_level(level))
        })
        .collect();

    let mut classifiers = Vec::with_capacity(grid.len());
    let mut diagnostics = Vec::with_capacity(grid.len());
    for f in fits {
        let (tf, diag) = f?;
        classifiers.push(tf);
        diagnostics.push(diag);
    }
    let model = SignSeriesModel {
        grid,
        classifiers,
        scale: data.scale(),
        dims: (d1, d2, p),
        center,
    };
    Ok((model, diagnostics))
}

/// Mean sign of the classifiers on the rescaled axis.
fn mean_sign(model: &SignSeriesModel, x: &DenseMatrix, w: &[f64]) -> Result<f64> {
    let (d1, d2, p) = model.dims;
    if x.shape() != (d1, d2) {
        return Err(AssistError::mismatch(
            format!("{d1}x{d2} predictor"),
            format!("{:?}", x.shape()),
        ));
    }
    if w.len() != p {
        return Err(AssistError::mismatch(format!("{p} covariates"), w.len()));
    }
    if model.classifiers.is_empty() {
        return Err(AssistError::InvalidInput("model has no classifiers".into()));
    }
    let shifted = x.sub(&model.center);
    let total: f64 = model.classifiers.iter().map(|tf| sgn(tf.evaluate(&shifted, w))).sum();
    Ok(total / model.classifiers.len() as f64)
}

/// Prediction on the raw response scale.
pub fn predict(model: &SignSeriesModel, x: &DenseMatrix, w: &[f64]) -> Result<f64> {
    Ok(model.scale.inverse(mean_sign(model, x, w)?))
}

/// Predictions for every sample of a dataset (covariates taken from it).
pub fn predict_many(model: &SignSeriesModel, data: &Dataset) -> Result<Vec<f64>> {
    data.samples()
        .iter()
        .map(|s| predict(model, &s.predictor, &s.covariates))
        .collect()
}

/// Oracle aggregation (1/(2H+1)) Σ_π sgn(f - π) of exact sign functions.
pub fn ideal_aggregate(f_values: &[f64], h: usize) -> Result<Vec<f64>> {
    let grid = LevelGrid::new(h)?;
    f_values
        .iter()
        .map(|&f| {
            if !(-1.0..=1.0).contains(&f) {
                return Err(AssistError::InvalidInput(format!("value {f} outside [-1, 1]")));
            }
            let s: f64 = grid.levels().iter().map(|&pi| sgn(f - pi)).sum();
            Ok(s / grid.len() as f64)
        })
        .collect()
}

/// Entrywise maximum over levels of the `window`-wide moving average of |B_π|.
pub fn feature_importance(model: &SignSeriesModel, window: usize) -> Result<DenseMatrix> {
    let levels = model.classifiers.len();
    if window == 0 || window.is_multiple_of(2) || window > levels {
        return Err(AssistError::InvalidInput(format!(
            "window must be odd and in 1..={levels}, got {window}"
        )));
    }
    let abs: Vec<DenseMatrix> = model
        .classifiers
        .iter()
        .map(|tf| tf.coefficient_matrix().map(f64::abs))
        .collect();
    let (d1, d2) = abs[0].shape();
    let mut out = DenseMatrix::zeros(d1, d2);
    for start in 0..=levels - window {
        let mut avg = DenseMatrix::zeros(d1, d2);
        for m in &abs[start..start + window] {
            avg.axpy(1.0 / window as f64, m);
        }
        out = DenseMatrix::from_fn(d1, d2, |i, j| out.get(i, j).max(avg.get(i, j)));
    }
    Ok(out)
}
