//! Minimal dense-tensor math with reverse-mode differentiation: the numeric
//! substrate under every encoder and classifier in this crate.

pub mod fd;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use fd::fd_check;
pub use optim::{clip_gradients, AdamState};
pub use params::{Gradients, ParamInit, ParamStore};
pub use tape::{pairwise_loss_value, pointwise_loss_value, NodeId, Tape};
pub use tensor::Tensor;
