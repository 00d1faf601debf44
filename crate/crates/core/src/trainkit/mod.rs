//! The proposed CNN, its training loop, checkpoints and history export.

mod checkpoint;
mod data;
mod history;
mod model;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointError,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use data::{image_tensor, ImageSet};
pub use history::{export_history, history_to_csv, parse_history_csv, render_history_svg, HISTORY_HEADER};
pub use model::{
    backward, build_model, forward, forward_pass, BlockDef, ForwardPass, ModelDef, ModelParams, PROPOSED_FILTERS,
};
pub use train::{
    evaluate, predict, train, train_observed, EpochRecord, Optimizer, TrainConfig, TrainHistory, EVAL_BATCH,
};

use thiserror::Error;

use crate::dataset::DatasetError;
use crate::imaging::ImageError;
use crate::optim::OptimError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid model definition: {0}")]
    InvalidModel(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("input shape mismatch: expected (N, {expected:?}), got {actual:?}")]
    InputShape { expected: Vec<usize>, actual: Vec<usize> },
    #[error("{path}: image is {actual:?} (C, H, W) but the model expects {expected:?}")]
    ImageShape { path: String, expected: Vec<usize>, actual: Vec<usize> },
    #[error("the {0} fold is empty")]
    EmptyFold(&'static str),
    #[error("non-finite loss {loss} at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: u32, step: u32, loss: f64 },
    #[error("{path}: {source}")]
    Image { path: String, source: ImageError },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("history: {0}")]
    History(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl TrainError {
    /// True when the error comes from bad input data rather than a failure
    /// during computation.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Self::InputShape { .. }
                | Self::ImageShape { .. }
                | Self::EmptyFold(_)
                | Self::Image { .. }
                | Self::Dataset(_)
                | Self::Checkpoint(_)
                | Self::History(_)
        )
    }
}

pub type Result<T, E = TrainError> = std::result::Result<T, E>;
