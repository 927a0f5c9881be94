//! Gradient-based value estimation and MSBE conditioning analysis.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases at the bottom
//! fix it to `f64`, which is what the experiment harness and CLI use.

pub mod approx;
pub mod conditioning;
pub mod envs;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod mdp;
pub mod scalar;

pub use scalar::Scalar;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("invalid probability table: {0}")]
    InvalidProbability(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub type Matrix = linalg::Matrix<f64>;
pub type MarkovChain = mdp::MarkovChain<f64>;
pub type Mdp = mdp::Mdp<f64>;
pub type Policy = mdp::Policy<f64>;
pub type FeatureMap = approx::FeatureMap<f64>;
pub type Linear = approx::Linear<f64>;
pub type Tabular = approx::Tabular;
pub type Mlp = approx::Mlp<f64>;
pub type Hyperparameters = estimators::Hyperparameters<f64>;
pub type QuadraticForm = conditioning::QuadraticForm<f64>;
pub type GaussNewtonPair = conditioning::GaussNewtonPair<f64>;
