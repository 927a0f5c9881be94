use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::estimators::{Algorithm, Hyperparameters};
use crate::mdp::SamplingMode;
use crate::{Error, Result};

fn unit() -> f64 {
    1.0
}

fn baird_gamma() -> f64 {
    0.99
}

fn boyan_gamma() -> f64 {
    0.995
}

fn cartpole_gamma() -> f64 {
    0.99
}

fn horizon() -> u32 {
    500
}

fn hidden() -> usize {
    64
}

fn softmax() -> f64 {
    8.0
}

fn eval_episodes() -> usize {
    400
}

/// Environment by name plus parameters, e.g. `{"env": "hallway", "n": 50, "eps": 0.01}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum EnvSpec {
    Hallway {
        n: usize,
        eps: f64,
        #[serde(default = "unit")]
        gamma: f64,
    },
    BairdStar {
        #[serde(default = "baird_gamma")]
        gamma: f64,
    },
    TwoStateLoop {
        gamma: f64,
    },
    /// Extended Boyan chain with the standard tent features of dimension `features`.
    ExtendedBoyan {
        n: usize,
        features: usize,
        #[serde(default = "boyan_gamma")]
        gamma: f64,
    },
    CartPole {
        #[serde(default = "cartpole_gamma")]
        gamma: f64,
        #[serde(default = "horizon")]
        horizon: u32,
        #[serde(default = "hidden")]
        hidden: usize,
        /// Inverse temperature of the softmax behaviour policy over action values.
        #[serde(default = "softmax")]
        softmax: f64,
        /// Rollouts per return estimate.
        #[serde(default = "eval_episodes")]
        eval_episodes: usize,
    },
}

impl EnvSpec {
    pub fn is_control(&self) -> bool {
        matches!(self, EnvSpec::CartPole { .. })
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            EnvSpec::Hallway { gamma, .. }
            | EnvSpec::BairdStar { gamma }
            | EnvSpec::TwoStateLoop { gamma }
            | EnvSpec::ExtendedBoyan { gamma, .. }
            | EnvSpec::CartPole { gamma, .. } => gamma,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ValueError,
    MeanReturn,
}

/// Estimator plus its hyperparameters, written flat: `{"algo": "rans", "alpha": 0.001, ...}`.
/// Unset hyperparameters take their defaults; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Map<String, Value>", into = "Map<String, Value>")]
pub struct AlgoSpec {
    pub algo: Algorithm,
    pub hyperparameters: Hyperparameters<f64>,
}

impl AlgoSpec {
    pub fn new(algo: Algorithm, hyperparameters: Hyperparameters<f64>) -> Self {
        Self {
            algo,
            hyperparameters,
        }
    }
}

impl TryFrom<Map<String, Value>> for AlgoSpec {
    type Error = String;

    fn try_from(mut map: Map<String, Value>) -> std::result::Result<Self, String> {
        let algo = map
            .remove("algo")
            .ok_or("algorithm block needs an \"algo\" key")?;
        let algo = serde_json::from_value(algo).map_err(|e| e.to_string())?;
        let hyperparameters =
            serde_json::from_value(Value::Object(map)).map_err(|e| e.to_string())?;
        Ok(Self {
            algo,
            hyperparameters,
        })
    }
}

impl From<AlgoSpec> for Map<String, Value> {
    fn from(spec: AlgoSpec) -> Self {
        let mut map = Map::new();
        map.insert("algo".into(), Value::String(spec.algo.name().into()));
        if let Ok(Value::Object(hp)) = serde_json::to_value(spec.hyperparameters) {
            map.extend(hp);
        }
        map
    }
}

/// Per-step statistic across runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
    /// Mean of the best `⌈fraction · runs⌉` values.
    Topfrac {
        fraction: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-form name carried into manifests and plot legends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub environment: EnvSpec,
    pub algorithm: AlgoSpec,
    pub seeds: Vec<u64>,
    pub steps: u64,
    /// Defaults to 10 for value-error and 500 for returns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(default)]
    pub aggregation: Aggregation,
    /// Pre-state sampling for finite tasks. Baird's star defaults to uniform, everything else
    /// to episodic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingMode>,
    /// Explicit initial weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<Vec<f64>>,
    /// Constant initial weight, ignored when `w0` is set. Hallway defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_value: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("step budget must be positive".into()));
        }
        if self.eval_every == Some(0) {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        self.algorithm
            .hyperparameters
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let gamma = self.environment.gamma();
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Config(format!("discount {gamma} outside [0,1]")));
        }
        match (self.metric(), self.environment.is_control()) {
            (Metric::ValueError, true) => {
                return Err(Error::Config("value_error needs a finite task".into()))
            }
            (Metric::MeanReturn, false) => {
                return Err(Error::Config("mean_return needs a control task".into()))
            }
            _ => {}
        }
        if let Aggregation::Topfrac { fraction } = self.aggregation {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::Config(format!(
                    "top fraction {fraction} outside (0,1]"
                )));
            }
        }
        Ok(())
    }

    pub fn metric(&self) -> Metric {
        self.metric.unwrap_or(if self.environment.is_control() {
            Metric::MeanReturn
        } else {
            Metric::ValueError
        })
    }

    pub fn eval_every(&self) -> u64 {
        self.eval_every.unwrap_or(match self.metric() {
            Metric::ValueError => 10,
            Metric::MeanReturn => 500,
        })
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn display_name(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.algorithm.algo.name().to_string())
    }
}
