use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{AssistError, Result};
use crate::matrix::{dot, DenseMatrix};
use crate::rng::{derive_seed, rng_from, Rng};
use crate::types::Dataset;

/// Draws used to calibrate the empirical CDF of ⟨X, B⟩.
pub const CALIBRATION_DRAWS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResponseType {
    Continuous,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Link {
    /// h(z) = (eᶻ - 1)/(eᶻ + 1) with z standard normal.
    Smooth,
    /// h(z) = -0.6 + 1.2·1(z > 0) with z uniform on [-1, 1].
    Step,
}

impl FromStr for ResponseType {
    type Err = AssistError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(ResponseType::Continuous),
            "binary" => Ok(ResponseType::Binary),
            _ => Err(AssistError::InvalidInput(format!(
                "unknown response type '{s}' (expected continuous or binary)"
            ))),
        }
    }
}

impl FromStr for Link {
    type Err = AssistError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(Link::Smooth),
            "step" => Ok(Link::Step),
            _ => Err(AssistError::InvalidInput(format!(
                "unknown link '{s}' (expected smooth or step)"
            ))),
        }
    }
}

/// Something that can draw predictors and evaluate the true regression
/// function on them.
pub trait TruthOracle {
    fn sample_predictor(&self, rng: &mut Rng) -> DenseMatrix;
    fn f(&self, x: &DenseMatrix) -> f64;
}

/// True regression function f(X) = h((G⁻¹∘Ḡ)(⟨X, B⟩)) of a generated model.
#[derive(Clone, Debug)]
pub struct RegressionTruth {
    pub b: DenseMatrix,
    pub link: Link,
    /// Sorted calibration draws of ⟨X, B⟩.
    ecdf: Vec<f64>,
}

impl RegressionTruth {
    /// Ḡ(t) by linear interpolation between order statistics, kept inside
    /// (0, 1) so the normal quantile stays finite.
    pub fn ecdf(&self, t: f64) -> f64 {
        let s = &self.ecdf;
        let m = s.len() as f64;
        if t <= s[0] {
            return 0.5 / m;
        }
        if t >= s[s.len() - 1] {
            return 1.0 - 0.5 / m;
        }
        let k = s.partition_point(|&v| v <= t) - 1;
        let frac = if s[k + 1] > s[k] {
            (t - s[k]) / (s[k + 1] - s[k])
        } else {
            0.0
        };
        (k as f64 + 0.5 + frac) / m
    }

    /// The nonlinear predictor z(X).
    pub fn z(&self, x: &DenseMatrix) -> f64 {
        let u = self.ecdf(x.inner(&self.b));
        match self.link {
            Link::Smooth => Normal::standard().inverse_cdf(u),
            Link::Step => 2.0 * u - 1.0,
        }
    }
}

pub fn smooth_h(z: f64) -> f64 {
    (z / 2.0).tanh()
}

pub fn step_h(z: f64) -> f64 {
    if z > 0.0 {
        0.6
    } else {
        -0.6
    }
}

impl TruthOracle for RegressionTruth {
    fn sample_predictor(&self, rng: &mut Rng) -> DenseMatrix {
        let (d1, d2) = self.b.shape();
        DenseMatrix::from_fn(d1, d2, |_, _| rng.random::<f64>())
    }

    fn f(&self, x: &DenseMatrix) -> f64 {
        let z = self.z(x);
        match self.link {
            Link::Smooth => smooth_h(z),
            Link::Step => step_h(z),
        }
    }
}

/// Rank-r coefficient matrix with standard normal factors on the leading
/// s×s block.
fn coefficient(d: usize, r: usize, s: usize, rng: &mut Rng) -> DenseMatrix {
    let u = DenseMatrix::from_fn(s, r, |_, _| StandardNormal.sample(rng));
    let v = DenseMatrix::from_fn(s, r, |_, _| StandardNormal.sample(rng));
    let block = u.matmul_transpose(&v).expect("shapes agree");
    DenseMatrix::from_fn(d, d, |i, j| if i < s && j < s { block.get(i, j) } else { 0.0 })
}

/// Samples from the matrix-predictor model with i.i.d. Uniform[0, 1]
/// predictor entries. B and the calibration depend only on `seed`, so
/// datasets of different size with the same seed share the truth and the
/// smaller one is a prefix of the larger.
#[allow(clippy::too_many_arguments)]
pub fn gen_regression(
    d: usize,
    r: usize,
    s: usize,
    n: usize,
    response: ResponseType,
    link: Link,
    noise_sd: f64,
    seed: u64,
) -> Result<(Dataset, RegressionTruth)> {
    if n == 0 {
        return Err(AssistError::InvalidInput("sample size must be positive".into()));
    }
    if r == 0 || r > s || s > d {
        return Err(AssistError::InfeasibleBudget(format!(
            "need 1 <= r <= s <= d, got r={r}, s={s}, d={d}"
        )));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(AssistError::InvalidInput(format!(
            "noise_sd must be >= 0, got {noise_sd}"
        )));
    }
    let b = coefficient(d, r, s, &mut rng_from(derive_seed(seed, &[1])));

    let block: Vec<f64> = (0..s * s).map(|k| b.get(k / s, k % s)).collect();
    let mut cal = rng_from(derive_seed(seed, &[2]));
    let mut draws: Vec<f64> = (0..CALIBRATION_DRAWS)
        .map(|_| {
            let x: Vec<f64> = (0..s * s).map(|_| cal.random::<f64>()).collect();
            dot(&x, &block)
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    let truth = RegressionTruth { b, link, ecdf: draws };

    let mut rng = rng_from(derive_seed(seed, &[3]));
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = truth.sample_predictor(&mut rng);
        let f = truth.f(&x);
        let y = match response {
            ResponseType::Continuous => {
                let e: f64 = StandardNormal.sample(&mut rng);
                f + noise_sd * e
            }
            ResponseType::Binary => {
                if rng.random::<f64>() < 0.5 * (f + 1.0) {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        xs.push(x);
        ys.push(y);
    }
    Ok((Dataset::from_raw(xs, vec![], &ys)?, truth))
}
