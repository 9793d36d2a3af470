//! Portable feed-forward CNN: layer definitions, shape checking, inference and
//! head fine-tuning.

mod forward;
mod layer;
mod model;
mod train;

pub use forward::{forward, predict};
pub(crate) use forward::maxpool_argmax;
pub use layer::{Conv2d, Dense, Layer, LayerKind, MaxPool2d, Padding};
pub use model::{glorot_dense, ModelSpec, Preprocess};
pub use train::{
    mse_gradient, mse_loss, train_head, train_head_from, DriveLabel, TrainConfig, TrainOutcome,
};
