//! Numerical substrate: tensors, seedable streams, Cholesky and order statistics.

mod linalg;
mod rng;
pub mod stats;
mod tensor;

pub use linalg::{cholesky, lower_mul};
pub use rng::RngStream;
pub use stats::{median, quantile, sample_sd, SampleSummary};
pub use tensor::Tensor;
