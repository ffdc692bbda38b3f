//! Learned recognizers: a dual-encoder sequence network fed by plan-cost
//! derivative features, a raw-coordinate recurrent baseline, and a
//! spatiotemporal grid network, plus the seeded training loop they share.

mod inputs;
mod modeldoc;
mod nets;
mod train;

pub use inputs::{build_inputs, normalized_coords, LabeledExample, NetInputs};
pub use modeldoc::{load_model, read_model, save_model, write_model, ModelMeta};
pub use nets::{
    draw_max, forward, predict, BaselineNet, DropoutPlan, DualEncoderNet, Net, NetKind,
    SpatioTemporalNet, MAX_FRAME_FLAT,
};
pub use train::{train, EpochStats, TrainConfig, TrainOutcome};

use crate::features::FeatureError;
use crate::neuralnet::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnedError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("{kind} inputs require precomputed cost fields")]
    MissingFields { kind: &'static str },
    #[error("inputs carry {got} goals but the network outputs {expected}")]
    GoalCountMismatch { expected: usize, got: usize },
    #[error("inputs do not match a {kind} network")]
    WrongInputs { kind: &'static str },
    #[error("flattened frame encoding of {flattened} values exceeds the {max} limit")]
    SpatialTooLarge { flattened: usize, max: usize },
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error("training loss diverged at iteration {iteration} (batch seed {batch_seed})")]
    DivergedLoss { iteration: u64, batch_seed: u64 },
    #[error("malformed model document: {0}")]
    ModelFormat(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
