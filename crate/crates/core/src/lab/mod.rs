//! Desk-scale training harness: synthetic data, a small encoder with a
//! logits head and a frame-weight head, and the training loop.

pub mod checkpoint;
pub mod data;
pub mod encoder;
pub mod train;

pub use checkpoint::Checkpoint;
pub use data::{generate_dataset, DataConfig, SyntheticUtterance};
pub use encoder::{encoder_backward, encoder_forward, EncoderParams, EncoderShape};
pub use train::{evaluate, train, EvalConfig, Mode, TrainConfig, TrainLog};
