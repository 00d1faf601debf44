//! Thermal-image screening for honey adulteration.
//!
//! The crate is organised the way the pipeline runs:
//!
//! - [`imaging`]: PGM/PPM codec and region-of-interest extraction
//!   (grayscale, Sobel edges, Otsu mask, masked overlay, bilinear resize).
//! - [`augment`]: the temperature-fluctuation augmentation and per-channel
//!   absolute differences.
//! - [`dataset`]: manifests, frame sampling, grouped splits and the synthetic
//!   thermal-image generator.
//! - [`tensor`]: a small dense tensor engine with hand-written backward passes.
//! - [`optim`]: Adam, binary cross-entropy and confusion-matrix metrics.
//! - [`trainkit`]: the five-block CNN, its training loop, checkpoints and
//!   history export.
//!
//! All randomness flows through [`rng::SplitMix64`] so runs are reproducible
//! bit for bit.

pub mod augment;
pub mod dataset;
pub mod imaging;
pub mod optim;
pub mod rng;
pub mod tensor;
pub mod trainkit;

/// Crate version, echoed in manifests and run headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
