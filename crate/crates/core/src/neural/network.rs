use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::{compile, Layer, LayerSpec};
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::math::{RngStream, Tensor};

/// Architecture of a regression network mapping data to `output_dim`
/// parameters. The loss is always mean squared error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    /// Per-sample input shape: `[J]`, `[channels, length]` or `[channels, h, w]`.
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub output_dim: usize,
}

impl NetworkSpec {
    /// Multilayer perceptron with ReLU hidden layers.
    pub fn mlp(inputs: usize, hidden: &[usize], output_dim: usize) -> Self {
        let mut layers = Vec::new();
        for &h in hidden {
            layers.push(LayerSpec::Dense { units: h });
            layers.push(LayerSpec::Relu);
        }
        layers.push(LayerSpec::Dense { units: output_dim });
        Self {
            input_shape: vec![inputs],
            layers,
            output_dim,
        }
    }

    /// 1-D CNN: `conv1d(filters, kernel) + ReLU` blocks, flatten, a ReLU
    /// dense head of `head_units`, then a linear output layer.
    pub fn cnn1d(length: usize, convs: &[(usize, usize)], head_units: usize, output_dim: usize) -> Self {
        let mut layers = Vec::new();
        for &(filters, kernel) in convs {
            layers.push(LayerSpec::Conv1d { filters, kernel });
            layers.push(LayerSpec::Relu);
        }
        layers.push(LayerSpec::Flatten);
        layers.push(LayerSpec::Dense { units: head_units });
        layers.push(LayerSpec::Relu);
        layers.push(LayerSpec::Dense { units: output_dim });
        Self {
            input_shape: vec![1, length],
            layers,
            output_dim,
        }
    }

    /// 2-D CNN on a single-channel `h x w` image; same head as [`Self::cnn1d`].
    pub fn cnn2d(h: usize, w: usize, convs: &[(usize, usize)], head_units: usize, output_dim: usize) -> Self {
        let mut layers = Vec::new();
        for &(filters, k) in convs {
            layers.push(LayerSpec::Conv2d {
                filters,
                kernel: [k, k],
            });
            layers.push(LayerSpec::Relu);
        }
        layers.push(LayerSpec::Flatten);
        layers.push(LayerSpec::Dense { units: head_units });
        layers.push(LayerSpec::Relu);
        layers.push(LayerSpec::Dense { units: output_dim });
        Self {
            input_shape: vec![1, h, w],
            layers,
            output_dim,
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub(crate) fn compile(&self) -> Result<Vec<Layer>> {
        let (layers, out) = compile(&self.input_shape, &self.layers)?;
        if out != [self.output_dim] {
            return Err(Error::ShapeMismatch {
                expected: vec![self.output_dim],
                got: out,
            });
        }
        Ok(layers)
    }

    /// Parameter tensors initialized uniformly on `±sqrt(6 / (fan_in + fan_out))`,
    /// biases zero.
    pub fn init_weights(&self, rng: &mut RngStream) -> Result<Vec<Tensor>> {
        let mut weights = Vec::new();
        for layer in self.compile()? {
            if let Some((wshape, bshape)) = layer.param_shapes() {
                let (fan_in, fan_out) = layer.fans();
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let n: usize = wshape.iter().product();
                let data = (0..n).map(|_| (2.0 * rng.unit() - 1.0) * limit).collect();
                weights.push(Tensor::new(wshape, data)?);
                weights.push(Tensor::zeros(bshape));
            }
        }
        Ok(weights)
    }

    pub fn parameter_count(&self) -> Result<usize> {
        Ok(self
            .compile()?
            .iter()
            .filter_map(Layer::param_shapes)
            .map(|(w, b)| w.iter().product::<usize>() + b.iter().product::<usize>())
            .sum())
    }
}

/// A fitted network: architecture, weights and per-epoch training loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedNetwork {
    pub spec: NetworkSpec,
    pub weights: Vec<Tensor>,
    #[serde(default)]
    pub loss_history: Vec<f64>,
    #[serde(default)]
    pub config: Option<TrainConfig>,
}

/// Scratch buffers for one sample's pass through the stack.
pub(crate) struct Workspace {
    layers: Vec<Layer>,
    /// Index of each layer's first parameter tensor.
    param_index: Vec<Option<usize>>,
    acts: Vec<Vec<f64>>,
    grad_a: Vec<f64>,
    grad_b: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(spec: &NetworkSpec) -> Result<Self> {
        let layers = spec.compile()?;
        let mut param_index = Vec::with_capacity(layers.len());
        let mut next = 0;
        for l in &layers {
            if l.param_shapes().is_some() {
                param_index.push(Some(next));
                next += 2;
            } else {
                param_index.push(None);
            }
        }
        let mut acts = vec![vec![0.0; layers[0].input_size()]];
        let mut widest = 0;
        for l in &layers {
            acts.push(vec![0.0; l.output_size()]);
            widest = widest.max(l.output_size()).max(l.input_size());
        }
        Ok(Self {
            layers,
            param_index,
            acts,
            grad_a: vec![0.0; widest],
            grad_b: vec![0.0; widest],
        })
    }

    fn params<'w>(&self, i: usize, weights: &'w [Tensor]) -> Vec<&'w [f64]> {
        match self.param_index[i] {
            Some(k) => vec![weights[k].data(), weights[k + 1].data()],
            None => Vec::new(),
        }
    }

    pub(crate) fn forward(&mut self, weights: &[Tensor], x: &[f64]) -> &[f64] {
        self.acts[0].copy_from_slice(x);
        for i in 0..self.layers.len() {
            let params = self.params(i, weights);
            let (head, tail) = self.acts.split_at_mut(i + 1);
            self.layers[i].forward(&params, &head[i], &mut tail[0]);
        }
        self.acts.last().expect("at least one layer")
    }

    /// Backpropagates `grad_out` (gradient at the network output) through
    /// the activations of the last `forward` call.
    pub(crate) fn backward(&mut self, weights: &[Tensor], grad_out: &[f64], grads: &mut [Tensor]) {
        let n = self.layers.len();
        self.grad_a[..grad_out.len()].copy_from_slice(grad_out);
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            let params = self.params(i, weights);
            let out_size = layer.output_size();
            let in_size = layer.input_size();
            let need_input_grad = i > 0;
            let (gout, gin) = (&self.grad_a[..out_size], &mut self.grad_b[..in_size]);
            let gin = need_input_grad.then_some(gin);
            match self.param_index[i] {
                Some(k) => {
                    let (lo, hi) = grads.split_at_mut(k + 1);
                    let mut g = [lo[k].data_mut(), hi[0].data_mut()];
                    layer.backward(&params, &self.acts[i], gout, &mut g, gin);
                }
                None => layer.backward(&params, &self.acts[i], gout, &mut [], gin),
            }
            std::mem::swap(&mut self.grad_a, &mut self.grad_b);
        }
    }
}

fn check_batch(spec: &NetworkSpec, batch: &Tensor) -> Result<usize> {
    let shape = batch.shape();
    let ok = shape.len() == spec.input_shape.len() + 1 && shape[1..] == spec.input_shape[..];
    let flat_ok = shape.len() == 2 && shape[1] == spec.input_len();
    if !(ok || flat_ok) {
        let mut expected = vec![shape.first().copied().unwrap_or(0)];
        expected.extend(&spec.input_shape);
        return Err(Error::ShapeMismatch {
            expected,
            got: shape.to_vec(),
        });
    }
    Ok(shape[0])
}

impl TrainedNetwork {
    pub fn from_weights(spec: NetworkSpec, weights: Vec<Tensor>) -> Result<Self> {
        let net = Self {
            spec,
            weights,
            loss_history: Vec::new(),
            config: None,
        };
        net.validate()?;
        Ok(net)
    }

    /// Checks that weight tensors match the architecture and are finite.
    pub fn validate(&self) -> Result<()> {
        let mut expected = Vec::new();
        for l in self.spec.compile()? {
            if let Some((w, b)) = l.param_shapes() {
                expected.push(w);
                expected.push(b);
            }
        }
        if expected.len() != self.weights.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![expected.len()],
                got: vec![self.weights.len()],
            });
        }
        for (e, w) in expected.into_iter().zip(&self.weights) {
            if w.shape() != e.as_slice() {
                return Err(Error::ShapeMismatch {
                    expected: e,
                    got: w.shape().to_vec(),
                });
            }
            if !w.is_finite() {
                return Err(Error::InvalidArgument("non-finite weight".into()));
            }
        }
        Ok(())
    }

    /// Predictions for a batch of shape `[batch, input_shape...]` (or
    /// `[batch, flattened_len]`); returns `batch x output_dim`.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        let n = check_batch(&self.spec, batch)?;
        let mut ws = Workspace::new(&self.spec)?;
        let p = self.spec.output_dim;
        let mut out = Vec::with_capacity(n * p);
        for i in 0..n {
            out.extend_from_slice(ws.forward(&self.weights, batch.row(i)));
        }
        Tensor::new(vec![n, p], out)
    }

    /// Prediction for a single flattened sample.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.spec.input_len() {
            return Err(Error::ShapeMismatch {
                expected: self.spec.input_shape.clone(),
                got: vec![x.len()],
            });
        }
        let mut ws = Workspace::new(&self.spec)?;
        Ok(ws.forward(&self.weights, x).to_vec())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(s)?;
        net.validate()?;
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Mean over all entries of the squared difference.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            expected: pred.shape().to_vec(),
            got: target.shape().to_vec(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptySample);
    }
    let ss: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(ss / pred.len() as f64)
}

/// Gradients of the batch MSE (mean over samples and outputs) with
/// respect to every weight tensor, in the order of `net.weights`.
pub fn backprop(net: &TrainedNetwork, batch: &Tensor, targets: &Tensor) -> Result<Vec<Tensor>> {
    let n = check_batch(&net.spec, batch)?;
    let p = net.spec.output_dim;
    if targets.shape() != [n, p] {
        return Err(Error::ShapeMismatch {
            expected: vec![n, p],
            got: targets.shape().to_vec(),
        });
    }
    let mut ws = Workspace::new(&net.spec)?;
    let mut grads: Vec<Tensor> = net.weights.iter().map(|w| Tensor::zeros(w.shape().to_vec())).collect();
    let scale = 2.0 / (n * p) as f64;
    let mut g = vec![0.0; p];
    for i in 0..n {
        let pred = ws.forward(&net.weights, batch.row(i));
        for ((gv, pv), tv) in g.iter_mut().zip(pred).zip(targets.row(i)) {
            *gv = scale * (pv - tv);
        }
        ws.backward(&net.weights, &g, &mut grads);
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        let z = Tensor::from_vec(vec![0.0, 0.0]);
        let o = Tensor::from_vec(vec![1.0, 1.0]);
        assert_eq!(mse_loss(&z, &z).unwrap(), 0.0);
        assert_eq!(mse_loss(&z, &o).unwrap(), 1.0);
        let a = Tensor::from_vec(vec![1.0, 2.0]);
        let b = Tensor::from_vec(vec![0.0, 4.0]);
        assert_eq!(mse_loss(&a, &b).unwrap(), 2.5);
        assert!(matches!(
            mse_loss(&a, &Tensor::from_vec(vec![1.0])),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn zero_weight_network_outputs_zero() {
        let spec = NetworkSpec::mlp(3, &[5], 2);
        let mut net = TrainedNetwork::from_weights(spec.clone(), spec.init_weights(&mut RngStream::new(0, 0)).unwrap())
            .unwrap();
        for w in &mut net.weights {
            w.data_mut().fill(0.0);
        }
        let out = net.forward(&Tensor::from_rows(&[vec![1.0, -2.0, 3.0]]).unwrap()).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0]);
    }

    #[test]
    fn identity_dense_layer() {
        let spec = NetworkSpec {
            input_shape: vec![3],
            layers: vec![LayerSpec::Dense { units: 3 }],
            output_dim: 3,
        };
        let net = TrainedNetwork::from_weights(spec, vec![Tensor::identity(3), Tensor::zeros(vec![3])]).unwrap();
        assert_eq!(net.predict(&[1.5, -2.0, 0.25]).unwrap(), vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn conv1d_network_hand_example() {
        let spec = NetworkSpec {
            input_shape: vec![1, 4],
            layers: vec![
                LayerSpec::Conv1d {
                    filters: 1,
                    kernel: 3,
                },
                LayerSpec::Flatten,
            ],
            output_dim: 2,
        };
        let net = TrainedNetwork::from_weights(
            spec,
            vec![Tensor::new(vec![1, 1, 3], vec![1.0; 3]).unwrap(), Tensor::zeros(vec![1])],
        )
        .unwrap();
        assert_eq!(net.predict(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![6.0, 9.0]);
    }

    #[test]
    fn shape_mismatch_on_bad_batch() {
        let spec = NetworkSpec::mlp(3, &[4], 1);
        let net = TrainedNetwork::from_weights(spec.clone(), spec.init_weights(&mut RngStream::new(0, 0)).unwrap())
            .unwrap();
        assert!(matches!(
            net.forward(&Tensor::zeros(vec![2, 4])),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(net.predict(&[1.0]), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn single_dense_gradient_closed_form() {
        // pred = W x + b, loss = mean over P of (pred - t)^2
        // dL/dW = 2 (pred - t) xᵀ / P
        let spec = NetworkSpec {
            input_shape: vec![2],
            layers: vec![LayerSpec::Dense { units: 2 }],
            output_dim: 2,
        };
        let w = Tensor::new(vec![2, 2], vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        let b = Tensor::from_vec(vec![0.1, -0.2]);
        let net = TrainedNetwork::from_weights(spec, vec![w, b]).unwrap();
        let x = [1.5, -0.5];
        let t = [0.0, 1.0];
        let pred = net.predict(&x).unwrap();
        let grads = backprop(
            &net,
            &Tensor::from_rows(&[x.to_vec()]).unwrap(),
            &Tensor::from_rows(&[t.to_vec()]).unwrap(),
        )
        .unwrap();
        for o in 0..2 {
            let r = 2.0 * (pred[o] - t[o]) / 2.0;
            for i in 0..2 {
                assert!((grads[0].at(o, i) - r * x[i]).abs() < 1e-14);
            }
            assert!((grads[1].data()[o] - r).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_residual_zero_gradient() {
        let spec = NetworkSpec::mlp(3, &[4], 1);
        let net = TrainedNetwork::from_weights(spec.clone(), spec.init_weights(&mut RngStream::new(1, 0)).unwrap())
            .unwrap();
        let x = Tensor::from_rows(&[vec![0.3, -0.2, 0.9], vec![1.0, 2.0, -1.0]]).unwrap();
        let targets = net.forward(&x).unwrap();
        for g in backprop(&net, &x, &targets).unwrap() {
            assert!(g.data().iter().all(|&v| v == 0.0));
        }
    }
}
