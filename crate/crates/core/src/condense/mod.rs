//! Distribution-matching condensation.
//!
//! Each iteration draws one architecture from the collection and a fresh
//! parameter sample for it, embeds a per-class batch of originals and the
//! condensed samples of that class, and moves the condensed samples so the
//! two class-wise mean embeddings coincide:
//!
//! `L = Σ_s ‖ mean φ(B^O_s) − mean φ(B^C_s) ‖²`
//!
//! Originals only ever enter constant graph nodes; the condensed samples are
//! the sole learnable tensor.

mod io;
mod loss;
mod run;

pub use io::{load_condensed, save_condensed, CondensedMeta, LOSS_FILE};
pub use loss::{matched_mean_loss, mmd_loss};
pub use run::{condense, condense_with, init_condensed, sample_class_batch, sample_class_indices, Progress};

use serde::{Deserialize, Serialize};

use crate::data::{DataError, SizeReport, Standardization, TimeSeriesDataset};
use crate::nets::{NetError, DEFAULT_COLLECTION};
use crate::tensor::{AdamConfig, Scalar, Tensor, TensorError};

#[derive(Debug, thiserror::Error)]
pub enum CondenseError {
    #[error("invalid condensation config: {0}")]
    Config(String),
    #[error("class {0} is present on one side of the loss only")]
    ClassMismatch(u8),
    #[error("class {0} has no samples")]
    EmptyClass(u8),
    #[error("non-finite loss at iteration {iteration} (network {network})")]
    NonFinite { iteration: usize, network: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Adam { lr: f64 },
    Sgd { lr: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { lr: AdamConfig::default().lr }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CondenseConfig {
    /// Number of condensed samples `|C|`; must be even.
    pub size: usize,
    /// Condensed length `T*`; `None` keeps the source length.
    pub t_star: Option<usize>,
    pub iterations: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    /// Architecture names making up the collection `Φ`.
    pub networks: Vec<String>,
    pub seed: u64,
}

impl Default for CondenseConfig {
    fn default() -> Self {
        CondenseConfig {
            size: 20,
            t_star: None,
            iterations: 24000,
            batch_size: 256,
            optimizer: Optimizer::default(),
            networks: DEFAULT_COLLECTION.iter().map(|s| s.to_string()).collect(),
            seed: 0,
        }
    }
}

/// Everything needed to trace a condensed set back to its run.
///
/// Wall-clock time is kept out of the serialized form so that repeated runs
/// produce identical files; it is written to a separate sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub iterations: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub networks: Vec<String>,
    pub source_fingerprint: String,
    pub source_n: usize,
    pub source_t: usize,
    pub size: SizeReport,
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

/// Learned samples `[|C|, T*, F]` with fixed labels.
#[derive(Clone, Debug, PartialEq)]
pub struct CondensedSet<E: Scalar> {
    pub samples: Tensor<E>,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
    /// Statistics of the standardized space the samples live in.
    pub stats: Option<Standardization>,
    pub provenance: Provenance,
}

impl<E: Scalar> CondensedSet<E> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn t(&self) -> usize {
        self.samples.shape()[1]
    }

    pub fn f(&self) -> usize {
        self.samples.shape()[2]
    }

    pub fn size_report(&self) -> SizeReport {
        SizeReport::new(self.len(), self.t(), self.f())
    }

    /// The samples as a labeled dataset in the same standardized space.
    pub fn to_dataset(&self) -> Result<TimeSeriesDataset<E>, DataError> {
        let mut ds = TimeSeriesDataset::new(
            self.samples.clone().with_requires_grad(false),
            self.labels.clone(),
            self.feature_names.clone(),
            format!("condensed(seed={},M={})", self.provenance.seed, self.provenance.iterations),
        )?;
        ds.set_metadata(self.stats.clone(), Vec::new());
        Ok(ds)
    }

    /// Samples mapped back to the original feature scale.
    pub fn destandardized(&self) -> Result<Tensor<E>, DataError> {
        match &self.stats {
            Some(stats) => crate::data::destandardize_tensor(&self.samples, stats),
            None => Ok(self.samples.clone()),
        }
    }
}
