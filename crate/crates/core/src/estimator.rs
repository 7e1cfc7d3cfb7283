use crate::error::Result;
use crate::math::Tensor;
use crate::neural::TrainedNetwork;

/// Anything that maps one flattened dataset to a parameter vector on the
/// transformed scale.
pub trait Estimator: Sync {
    fn output_dim(&self) -> usize;

    fn estimate(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Row-wise estimates for an `n x len` batch.
    fn estimate_batch(&self, xs: &Tensor) -> Result<Tensor> {
        let mut out = Vec::with_capacity(xs.rows() * self.output_dim());
        for i in 0..xs.rows() {
            out.extend(self.estimate(xs.row(i))?);
        }
        Tensor::new(vec![xs.rows(), self.output_dim()], out)
    }
}

impl Estimator for TrainedNetwork {
    fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    fn estimate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.predict(x)
    }

    fn estimate_batch(&self, xs: &Tensor) -> Result<Tensor> {
        self.forward(xs)
    }
}
