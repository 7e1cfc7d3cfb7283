pub mod error;
pub mod estimator;
pub mod harness;
pub mod math;
pub mod neural;
pub mod replicate;
pub mod sequential;
pub mod simulators;
pub mod transforms;

pub use error::{Error, Result};
pub use estimator::Estimator;
