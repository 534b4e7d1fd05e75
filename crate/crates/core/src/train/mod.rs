//! Desk-scale training harness: an adaptive-decay optimizer with momentum
//! and L2 regularization, built-in synthetic datasets, and seeded
//! variance/convergence experiment runners.

mod adadelta;
mod datasets;
mod experiments;
mod model;

pub use adadelta::{adadelta_step, AdaDeltaState};
pub use datasets::{
    digits_csv, flip_labels, gaussian_blobs, load_digits_csv, parity_sequences, synthetic_digits,
    two_moons, SequenceDataset, TabularDataset,
};
pub use experiments::{
    certified_fraction_csv, reference_csv, run_convergence_experiment, run_variance_experiment,
    runs_csv, summary_csv, DeltaSummary, ExperimentConfig, ExperimentResult, TaskData,
    FULL_SCALE_REFERENCE,
};
pub use model::{ModelGraph, ModelSpec};

use crate::curvature::CurvatureError;
use crate::graph::GraphError;
use crate::tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("optimizer config invalid: {reason}")]
    Config { reason: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("experiment needs at least two seeds, got {0}")]
    TooFewSeeds(usize),
    #[error("scale factor {0} outside (0, 1]")]
    InvalidDelta(f64),
    #[error("non-finite gradient for parameter '{param}'")]
    NonFiniteGradient { param: String },
    #[error("malformed dataset csv at line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Optimizer settings: accumulation decay `rho`, numerical floor `eps`,
/// momentum on the applied step, and L2 regularization added to gradients.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptimConfig {
    pub rho: f64,
    pub eps: f64,
    pub momentum: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig { rho: 0.95, eps: 1e-6, momentum: 0.6, l2: 1e-6, epochs: 120, batch_size: 16 }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(TrainError::Config { reason: format!("rho {} outside (0, 1)", self.rho) });
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(TrainError::Config {
                reason: format!("momentum {} outside [0, 1)", self.momentum),
            });
        }
        if self.l2 < 0.0 {
            return Err(TrainError::Config { reason: format!("l2 {} negative", self.l2) });
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::Config {
                reason: "epochs and batch_size must be positive".to_string(),
            });
        }
        Ok(())
    }
}

/// One trained run: per-epoch metrics plus derived convergence facts.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunRecord {
    pub delta: f64,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub final_accuracy: f64,
    /// First epoch whose evaluation accuracy reaches 99% of the run's final
    /// accuracy (1-based).
    pub convergence_epoch: usize,
    pub diverged: bool,
    /// Share of nonnegative per-sample certificate margins at the end of
    /// training over a held-out batch, pooled across all parameters outside
    /// circles. Absent when no parameter is certifiable by path propagation.
    pub certified_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub eval_accuracy: f64,
}
