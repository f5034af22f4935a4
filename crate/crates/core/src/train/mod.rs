//! Cross-entropy/Adam training with early stopping, and model persistence.

pub mod adam;
pub mod io;
pub mod loss;
pub mod trainer;

pub use adam::{AdamHyper, AdamState};
pub use io::{load_model, read_manifest, save_model, ModelManifest};
pub use loss::cross_entropy;
pub use trainer::{
    train, validation_scores, EpochRecord, Event, PlateauMonitor, TrainConfig, TrainHistory, Verdict,
};
