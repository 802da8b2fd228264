//! Nonparametric trace regression by aggregating weighted sign classifiers
//! over a grid of response levels.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod assist;
pub mod bench;
pub mod completion;
pub mod error;
pub mod io;
pub mod loss;
pub mod matrix;
pub mod projection;
pub mod registry;
pub mod rng;
pub mod simgen;
pub mod tuning;
pub mod types;

pub use error::{AssistError, Result};
pub use loss::LossKind;
pub use matrix::DenseMatrix;
pub use types::*;
