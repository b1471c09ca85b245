//! Classifier training and evaluation: BCE, AUC, learning curves,
//! convergence steps and multi-architecture cohorts.

mod cohort;
mod metrics;
mod train;

pub use cohort::{mean, mix_seed, population_sd, run_cohort, ArchSummary, CohortConfig, EvalReport, TrialResult};
pub use metrics::{auc, bce_loss, Bce, BCE_EPS};
pub use train::{
    convergence_step, dataset_auc, predict_dataset, train_classifier, ConvergenceRule, CurvePoint, LearningCurve, TrainConfig,
};

use crate::data::DataError;
use crate::nets::NetError;
use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("AUC needs both classes present")]
    SingleClass,
    #[error("{0}")]
    Config(String),
    #[error("non-finite training loss at step {step}")]
    NonFinite { step: usize },
    #[error("{arch} repeat {repeat}: {source}")]
    Trial { arch: String, repeat: usize, source: Box<EvalError> },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
