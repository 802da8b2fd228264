//! Sign convention, the weighted 0-1 loss and the large-margin surrogates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AssistError, Result};
use crate::types::{coefficient_matrix, Dataset, TraceFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    ZeroOne,
    Hinge,
    Psi,
}

impl FromStr for LossKind {
    type Err = AssistError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero-one" | "01" => Ok(LossKind::ZeroOne),
            "hinge" => Ok(LossKind::Hinge),
            "psi" => Ok(LossKind::Psi),
            other => Err(AssistError::InvalidInput(format!("unknown loss '{other}'"))),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::ZeroOne => "zero-one",
            LossKind::Hinge => "hinge",
            LossKind::Psi => "psi",
        })
    }
}

/// +1 for strictly positive input, -1 otherwise (including 0).
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
pub fn hinge(z: f64) -> f64 {
    (1.0 - z).max(0.0)
}

#[inline]
pub fn psi(z: f64) -> f64 {
    2.0 * hinge(z).min(1.0)
}

pub fn margin_loss(kind: LossKind, z: f64) -> Result<f64> {
    match kind {
        LossKind::Hinge => Ok(hinge(z)),
        LossKind::Psi => Ok(psi(z)),
        LossKind::ZeroOne => Err(AssistError::InvalidInput(
            "zero-one loss is not a margin function; use weighted_01_loss".into(),
        )),
    }
}

/// Decision values φ(Xᵢ) for every sample.
pub fn decision_values(tf: &TraceFunction, data: &Dataset) -> Result<Vec<f64>> {
    let (d1, d2, p) = data.dims();
    tf.check_dims(d1, d2, p)?;
    let b = coefficient_matrix(tf);
    Ok(data
        .samples()
        .iter()
        .map(|s| {
            s.predictor.inner(&b)
                + tf.intercept
                + s.covariates
                    .iter()
                    .zip(&tf.covariate_coeffs)
                    .map(|(w, c)| w * c)
                    .sum::<f64>()
        })
        .collect())
}

/// (1/2n) Σ |Yᵢ - π| · |sgn(Yᵢ - π) - sgn φ(Xᵢ)| from precomputed decisions.
pub fn weighted_01_from_decisions(responses: &[f64], decisions: &[f64], level: f64) -> f64 {
    let n = responses.len() as f64;
    let total: f64 = responses
        .iter()
        .zip(decisions)
        .map(|(&y, &phi)| (y - level).abs() * (sgn(y - level) - sgn(phi)).abs())
        .sum();
    total / (2.0 * n)
}

pub fn weighted_01_loss(tf: &TraceFunction, data: &Dataset, level: f64) -> Result<f64> {
    let phi = decision_values(tf, data)?;
    Ok(weighted_01_from_decisions(&data.responses(), &phi, level))
}

/// (1/n) Σ |Yᵢ - π| F(φ(Xᵢ) sgn(Yᵢ - π)) from precomputed decisions, no penalty.
pub fn weighted_margin_risk(responses: &[f64], decisions: &[f64], level: f64, kind: LossKind) -> Result<f64> {
    let n = responses.len() as f64;
    let mut total = 0.0;
    for (&y, &phi) in responses.iter().zip(decisions) {
        total += (y - level).abs() * margin_loss(kind, phi * sgn(y - level))?;
    }
    Ok(total / n)
}

/// Penalized empirical margin risk with penalty λ‖B‖²_F.
pub fn weighted_margin_objective(
    tf: &TraceFunction,
    data: &Dataset,
    level: f64,
    kind: LossKind,
    lambda: f64,
) -> Result<f64> {
    if lambda < 0.0 {
        return Err(AssistError::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
    }
    let phi = decision_values(tf, data)?;
    let risk = weighted_margin_risk(&data.responses(), &phi, level, kind)?;
    Ok(risk + lambda * coefficient_matrix(tf).frobenius_norm_sq())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;
    use proptest::prelude::*;

    fn scalar_data(xs: &[f64], ys: &[f64]) -> Dataset {
        let preds = xs.iter().map(|&x| DenseMatrix::new(1, 1, vec![x]).unwrap()).collect();
        Dataset::with_scale(preds, vec![], ys, crate::types::ResponseScale::IDENTITY).unwrap()
    }

    fn scalar_tf(coef: f64, intercept: f64) -> TraceFunction {
        let mut tf = TraceFunction::zero(1, 1, 0, 0.0);
        tf.u = DenseMatrix::new(1, 1, vec![coef]).unwrap();
        tf.v = DenseMatrix::new(1, 1, vec![1.0]).unwrap();
        tf.intercept = intercept;
        tf
    }

    #[test]
    fn sign_convention() {
        assert_eq!(sgn(0.5), 1.0);
        assert_eq!(sgn(0.0), -1.0);
        assert_eq!(sgn(-0.0), -1.0);
        assert_eq!(sgn(-3.0), -1.0);
    }

    #[test]
    fn margin_loss_examples() {
        assert_eq!(margin_loss(LossKind::Hinge, 1.0).unwrap(), 0.0);
        assert_eq!(margin_loss(LossKind::Hinge, -1.0).unwrap(), 2.0);
        assert_eq!(margin_loss(LossKind::Psi, -5.0).unwrap(), 2.0);
        assert!(margin_loss(LossKind::ZeroOne, 0.0).is_err());
    }

    #[test]
    fn weighted_01_examples() {
        // perfect classification
        let data = scalar_data(&[1.0, -1.0], &[0.5, -0.5]);
        assert_eq!(weighted_01_loss(&scalar_tf(1.0, 0.0), &data, 0.0).unwrap(), 0.0);
        // n=1, Y=1, π=0, φ=-1
        let data = scalar_data(&[1.0], &[1.0]);
        assert_eq!(weighted_01_loss(&scalar_tf(-1.0, 0.0), &data, 0.0).unwrap(), 1.0);
        // n=2, Y=(0.5,-0.5), π=0.25, both decisions negative
        let data = scalar_data(&[1.0, 1.0], &[0.5, -0.5]);
        let l = weighted_01_loss(&scalar_tf(-1.0, 0.0), &data, 0.25).unwrap();
        assert!((l - 0.125).abs() < 1e-15);
    }

    #[test]
    fn weighted_margin_objective_examples() {
        let data = scalar_data(&[2.0, -2.0], &[0.5, -0.5]);
        let tf = scalar_tf(1.0, 0.0);
        assert_eq!(
            weighted_margin_objective(&tf, &data, 0.0, LossKind::Hinge, 0.0).unwrap(),
            0.0
        );
        let data = scalar_data(&[0.0], &[1.0]);
        let tf = scalar_tf(1.0, 0.0);
        assert_eq!(
            weighted_margin_objective(&tf, &data, 0.0, LossKind::Hinge, 0.0).unwrap(),
            1.0
        );
        // ‖B‖_F = 2, margins ≥ 1
        let data = scalar_data(&[1.0, -1.0], &[0.5, -0.5]);
        let tf = scalar_tf(2.0, 0.0);
        let obj = weighted_margin_objective(&tf, &data, 0.0, LossKind::Hinge, 0.1).unwrap();
        assert!((obj - 0.4).abs() < 1e-15);
        assert!(weighted_margin_objective(&tf, &data, 0.0, LossKind::Hinge, -1.0).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let data = scalar_data(&[1.0], &[1.0]);
        let tf = TraceFunction::zero(2, 1, 0, 0.0);
        assert!(matches!(
            weighted_01_loss(&tf, &data, 0.0),
            Err(AssistError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ties_at_the_level_carry_no_weight() {
        let data = scalar_data(&[1.0, -1.0, 3.0], &[0.2, -0.7, 0.0]);
        // sample 3 sits exactly at π=0 and is misclassified by sign, but weightless
        let tf = scalar_tf(1.0, 0.0);
        assert_eq!(weighted_01_loss(&tf, &data, 0.0).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn psi_is_a_difference_of_hinges(z in -50.0f64..50.0) {
            let dc = 2.0 * ((1.0 - z).max(0.0) - (-z).max(0.0));
            prop_assert!((psi(z) - dc).abs() <= 1e-12);
        }

        #[test]
        fn weighted_01_ignores_positive_scaling(
            coef in -3.0f64..3.0,
            b in -2.0f64..2.0,
            alpha in 0.01f64..100.0,
            level in -1.0f64..1.0,
            xs in proptest::collection::vec(-1.0f64..1.0, 1..20),
        ) {
            let ys: Vec<f64> = xs.iter().map(|x| x * 0.9).collect();
            let data = scalar_data(&xs, &ys);
            let tf = scalar_tf(coef, b);
            let base = weighted_01_loss(&tf, &data, level).unwrap();
            let scaled = weighted_01_loss(&tf.rescaled(alpha), &data, level).unwrap();
            prop_assert_eq!(base, scaled);
        }
    }
}
