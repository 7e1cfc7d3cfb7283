//! Feed-forward regression networks trained with Adam on mean squared error.

mod layers;
mod network;
mod train;

pub use layers::LayerSpec;
pub use network::{backprop, mse_loss, NetworkSpec, TrainedNetwork};
pub use train::{explained_variance, train, train_from, TrainConfig, COLLAPSE_R2};
