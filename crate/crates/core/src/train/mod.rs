//! Teacher-forced training and checkpoints.

pub mod checkpoint;
mod loss;
mod trainer;

pub use checkpoint::{
    load as load_checkpoint, save as save_checkpoint, Checkpoint, CheckpointMeta, CHECKPOINT_VERSION,
};
pub use loss::{head_losses, nll, total_loss, HeadLosses, LossWeights, HEADS};
pub use trainer::{Progress, StepStats, TrainConfig, TrainSummary, Trainer};
