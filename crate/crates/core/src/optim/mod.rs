//! Adam, binary cross-entropy and confusion-matrix metrics.

mod adam;
mod loss;
mod metrics;

pub use adam::{adam_step, adam_update, AdamState};
pub use loss::{bce_loss, CLAMP};
pub use metrics::{compute_metrics, MetricsReport};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("parameter/gradient misalignment at tensor {index}: {detail}")]
    Misaligned { index: usize, detail: String },
    #[error("non-finite gradient in tensor {index} at element {element}")]
    NonFiniteGradient { index: usize, element: usize },
    #[error("label {value} at position {index} is not 0 or 1")]
    InvalidLabel { index: usize, value: f64 },
    #[error("predictions ({predictions}) and labels ({labels}) differ in length")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("cannot compute metrics on an empty set")]
    Empty,
    #[error("invalid optimizer setting: {0}")]
    InvalidConfig(&'static str),
}
