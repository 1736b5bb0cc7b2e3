//! Layout-aware transformer encoder, its pre-training objectives, and the
//! fine-tuning / extraction pipeline built on top of it.

pub mod checkpoint;
pub mod config;
pub mod encoder;
pub mod error;
pub mod gradcheck;
pub mod heads;
pub mod model;
pub mod objective;
pub mod optim;
pub mod params;
pub mod pipeline;
pub mod pretraining;
pub mod vocab;

pub use checkpoint::{checkpoint_path, Checkpoint, DevPoint};
pub use config::EncoderConfig;
pub use encoder::{backward, embed, forward, ForwardPass, ModelInput};
pub use error::{Error, Result};
pub use heads::{LossStats, PhsTargets};
pub use model::Model;
pub use objective::{accumulate, label_logits, loss, loss_and_grads, Objective};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use params::{EncoderParameters, Matrix};
pub use pipeline::{evaluate_corpus, extract, finetune, masked_accuracy, pretrain, Init, TrainConfig, TrainOutcome};
pub use vocab::Vocab;
