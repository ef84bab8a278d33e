//! Diffusion prior over placement poses: noise schedule, encoder and
//! denoiser, training loop and checkpoints.

mod checkpoint;
mod model;
mod schedule;
mod train;

pub use checkpoint::{
    checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use model::{time_embedding, Architecture, Linear, Scalar, ScoreModel};
pub use schedule::{make_schedule, Posterior, Schedule};
pub use train::{dataset_hash, train, AdamState, Checkpoint, TrainConfig, TrainMetadata, TrainOutput, TrainingSet};

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("dataset format: {0}")]
    DataFormat(String),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("checkpoint version mismatch: {0}")]
    VersionMismatch(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptPayload(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
