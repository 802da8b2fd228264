//! Synthetic data: the matrix-predictor regression model, the latent
//! network model, closed-form completion fixtures, evaluation metrics,
//! brute-force oracles and completion baselines.

mod baselines;
mod fixtures;
mod metrics;
mod network;
mod regression;

use serde::{Deserialize, Serialize};

use crate::completion::ObservedMatrix;
use crate::error::Result;
use crate::matrix::DenseMatrix;
use crate::registry::{GlobalRegistry, Registry};
use crate::rng::derive_seed;
use crate::types::Dataset;

pub use baselines::{soft_impute_baseline, svd_impute_baseline};
pub use fixtures::{gen_banded, gen_gaussian_low_rank, gen_identity, gen_max_graphon, gen_monotone_transform, gen_sbm};
pub use metrics::{
    best_constant_l1, brute_force_level_risk, l1_error, misclassification_at_half, numerical_rank, uniform_mask,
    FinitePredictorSpace, PointLaw,
};
pub use network::{gen_network_latent, pattern_regions, Pattern, G_LIBRARY};
pub use regression::{
    gen_regression, smooth_h, step_h, Link, RegressionTruth, ResponseType, TruthOracle, CALIBRATION_DRAWS,
};

/// Parameters shared by the registered simulators; each reads the fields it
/// needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSpec {
    pub d: usize,
    pub r: usize,
    pub s: usize,
    pub n: usize,
    pub response: String,
    pub link: String,
    pub noise_sd: f64,
    pub pattern: String,
    pub sigma: f64,
    pub g_library_seed: u64,
    pub missing_frac: f64,
    pub c: f64,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            d: 20,
            r: 2,
            s: 2,
            n: 400,
            response: "continuous".into(),
            link: "smooth".into(),
            noise_sd: 0.1,
            pattern: "cross".into(),
            sigma: 0.0,
            g_library_seed: 0,
            missing_frac: 0.2,
            c: 1.0,
            seed: 0,
        }
    }
}

pub enum Simulated {
    /// Samples and the true regression function at each sample.
    Regression { data: Dataset, truth: Vec<f64> },
    /// Observed entries of a signal matrix and the full signal.
    Completion {
        observed: ObservedMatrix,
        truth: DenseMatrix,
    },
}

pub trait Simulator: Send {
    fn name(&self) -> &'static str;
    fn simulate(&self, spec: &SimSpec) -> Result<Simulated>;
}

struct RegressionSim;

impl Simulator for RegressionSim {
    fn name(&self) -> &'static str {
        "regression"
    }

    fn simulate(&self, spec: &SimSpec) -> Result<Simulated> {
        let (data, oracle) = gen_regression(
            spec.d,
            spec.r,
            spec.s,
            spec.n,
            spec.response.parse()?,
            spec.link.parse()?,
            spec.noise_sd,
            spec.seed,
        )?;
        let truth = data.samples().iter().map(|s| oracle.f(&s.predictor)).collect();
        Ok(Simulated::Regression { data, truth })
    }
}

struct NetworkSim;

impl Simulator for NetworkSim {
    fn name(&self) -> &'static str {
        "network"
    }

    fn simulate(&self, spec: &SimSpec) -> Result<Simulated> {
        let data = gen_network_latent(
            spec.d,
            spec.pattern.parse()?,
            spec.sigma,
            spec.n,
            spec.seed,
            spec.g_library_seed,
        )?;
        let truth = data.raw_responses();
        Ok(Simulated::Regression { data, truth })
    }
}

/// Completion simulator observing a fixed signal on a uniform mask.
struct MatrixSim {
    name: &'static str,
    signal: fn(&SimSpec) -> Result<DenseMatrix>,
}

impl Simulator for MatrixSim {
    fn name(&self) -> &'static str {
        self.name
    }

    fn simulate(&self, spec: &SimSpec) -> Result<Simulated> {
        let truth = (self.signal)(spec)?;
        let (d1, d2) = truth.shape();
        let cells = uniform_mask(d1, d2, 1.0 - spec.missing_frac, derive_seed(spec.seed, &[0x6d61_736b]))?;
        let observed = ObservedMatrix::from_matrix(&truth, &cells)?;
        Ok(Simulated::Completion { observed, truth })
    }
}

pub static SIMULATORS: GlobalRegistry<dyn Simulator> = GlobalRegistry::new(|| {
    let mut reg: Registry<dyn Simulator> = Registry::new("simulator");
    reg.register("regression", || Box::new(RegressionSim));
    reg.register("network", || Box::new(NetworkSim));
    reg.register("max-graphon", || {
        Box::new(MatrixSim {
            name: "max-graphon",
            signal: |s| Ok(gen_max_graphon(s.d)),
        })
    });
    reg.register("banded", || {
        Box::new(MatrixSim {
            name: "banded",
            signal: |s| Ok(gen_banded(s.d)),
        })
    });
    reg.register("low-rank", || {
        Box::new(MatrixSim {
            name: "low-rank",
            signal: |s| Ok(gen_gaussian_low_rank(s.d, s.r, s.seed)),
        })
    });
    reg.register("monotone", || {
        Box::new(MatrixSim {
            name: "monotone",
            signal: |s| Ok(gen_monotone_transform(&gen_gaussian_low_rank(s.d, s.r, s.seed), s.c)),
        })
    });
    reg
});
