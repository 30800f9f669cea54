//! Predictors and their training loops.

mod eval;
mod head;
mod mlp;
mod train;

pub use eval::{evaluate, metrics_from_dispatch, Evaluation, Metrics, PeriodMetrics, PERIODS};
pub use head::{family_distribution, family_params, sigmoid, softplus, Framework, TargetScale};
pub use mlp::{Adam, Mlp, Trace};
pub use train::{
    train, train_modelfree, train_mse, train_taskspecific, Curves, Dataset, Objective, Predictor,
    TrainConfig, TrainHistory, TrainOutcome, MODEL_FORMAT_VERSION,
};

use thiserror::Error;

use crate::data::DataError;
use crate::dist::DistError;
use crate::kernel::KernelError;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
