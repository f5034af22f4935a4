//! Lightweight 1D CNN signal classifier with accuracy-constrained structured
//! channel pruning.
//!
//! The pipeline is: [`data`] (load, clean, scale, split) → [`train`]
//! (cross-entropy + Adam with early stopping on validation macro-F1) →
//! [`prune`] (L1 kernel scores, channel-aligned rebuild, retraining) →
//! [`metrics`] (confusion matrix, accuracy, macro-F1, kernel retention).

pub mod data;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod prune;
pub mod train;

pub use error::{Error, Result};
