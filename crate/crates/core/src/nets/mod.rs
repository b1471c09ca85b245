//! Architecture catalog, randomized parameter sampling, and the
//! embedding / prediction forward passes.
//!
//! Five families are supported (MS-TCN, TRSF, ViT, LSTM, RNN) with eleven
//! named configurations. Every model splits into an embedding stage, whose
//! output width depends only on the [`ArchSpec`], and a classification head.
//!
//! Transformer blocks are `x + MSA(x)` followed by `x + FFN(x)`, with no
//! normalization and no positional embedding; the FFN width equals the MLP
//! head width. TRSF pools over time, ViT reads the prepended class token.

mod model;
mod spec;

pub use model::{init_variance, sample_parameters, Model};
pub use spec::{ArchSpec, Family, NetworkCollection, CATALOG_NAMES, DEFAULT_COLLECTION};

use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("unknown architecture `{0}`")]
    UnknownArch(String),
    #[error("unknown network family `{0}`")]
    UnknownFamily(String),
    #[error("invalid architecture spec: {0}")]
    BadSpec(String),
    #[error("{arch}: expected input [batch, time >= 1, {expected_features}], got {shape:?}")]
    InputShape { arch: String, expected_features: usize, shape: Vec<usize> },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
