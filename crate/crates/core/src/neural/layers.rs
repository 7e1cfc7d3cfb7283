//! Per-sample kernels for each layer kind. Convolutions are "valid"
//! (no padding) with stride 1; activations are channel-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declarative layer description. Input shapes are derived when the
/// stack is compiled against a network input shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { units: usize },
    Conv1d { filters: usize, kernel: usize },
    Conv2d { filters: usize, kernel: [usize; 2] },
    Relu,
    Flatten,
}

/// A layer with resolved input/output extents.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Layer {
    Dense {
        inputs: usize,
        units: usize,
    },
    Conv1d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        in_len: usize,
    },
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        kh: usize,
        kw: usize,
        in_h: usize,
        in_w: usize,
    },
    Relu {
        size: usize,
    },
    Flatten {
        size: usize,
    },
}

fn shape_err(expected: Vec<usize>, got: &[usize]) -> Error {
    Error::ShapeMismatch {
        expected,
        got: got.to_vec(),
    }
}

/// Resolves a layer stack against an input shape; returns the layers and
/// the final output shape.
pub(crate) fn compile(input_shape: &[usize], specs: &[LayerSpec]) -> Result<(Vec<Layer>, Vec<usize>)> {
    if input_shape.is_empty() || input_shape.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "invalid network input shape {input_shape:?}"
        )));
    }
    let mut shape = input_shape.to_vec();
    let mut layers = Vec::with_capacity(specs.len());
    for spec in specs {
        let (layer, next) = match *spec {
            LayerSpec::Dense { units } => {
                if shape.len() != 1 {
                    return Err(shape_err(vec![shape.iter().product()], &shape));
                }
                if units == 0 {
                    return Err(Error::InvalidArgument("dense layer with zero units".into()));
                }
                (
                    Layer::Dense {
                        inputs: shape[0],
                        units,
                    },
                    vec![units],
                )
            }
            LayerSpec::Conv1d { filters, kernel } => {
                if shape.len() != 2 || kernel == 0 || kernel > shape[1] || filters == 0 {
                    return Err(shape_err(vec![shape[0], kernel.max(1)], &shape));
                }
                (
                    Layer::Conv1d {
                        in_ch: shape[0],
                        out_ch: filters,
                        kernel,
                        in_len: shape[1],
                    },
                    vec![filters, shape[1] - kernel + 1],
                )
            }
            LayerSpec::Conv2d { filters, kernel } => {
                let [kh, kw] = kernel;
                if shape.len() != 3
                    || kh == 0
                    || kw == 0
                    || kh > shape[1]
                    || kw > shape[2]
                    || filters == 0
                {
                    return Err(shape_err(vec![shape[0], kh.max(1), kw.max(1)], &shape));
                }
                (
                    Layer::Conv2d {
                        in_ch: shape[0],
                        out_ch: filters,
                        kh,
                        kw,
                        in_h: shape[1],
                        in_w: shape[2],
                    },
                    vec![filters, shape[1] - kh + 1, shape[2] - kw + 1],
                )
            }
            LayerSpec::Relu => (
                Layer::Relu {
                    size: shape.iter().product(),
                },
                shape.clone(),
            ),
            LayerSpec::Flatten => {
                let size = shape.iter().product();
                (Layer::Flatten { size }, vec![size])
            }
        };
        layers.push(layer);
        shape = next;
    }
    Ok((layers, shape))
}

impl Layer {
    pub(crate) fn input_size(&self) -> usize {
        match *self {
            Layer::Dense { inputs, .. } => inputs,
            Layer::Conv1d { in_ch, in_len, .. } => in_ch * in_len,
            Layer::Conv2d {
                in_ch, in_h, in_w, ..
            } => in_ch * in_h * in_w,
            Layer::Relu { size } | Layer::Flatten { size } => size,
        }
    }

    pub(crate) fn output_size(&self) -> usize {
        match *self {
            Layer::Dense { units, .. } => units,
            Layer::Conv1d {
                out_ch,
                kernel,
                in_len,
                ..
            } => out_ch * (in_len - kernel + 1),
            Layer::Conv2d {
                out_ch,
                kh,
                kw,
                in_h,
                in_w,
                ..
            } => out_ch * (in_h - kh + 1) * (in_w - kw + 1),
            Layer::Relu { size } | Layer::Flatten { size } => size,
        }
    }

    /// Shapes of `(weights, bias)` for parametric layers.
    pub(crate) fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            Layer::Dense { inputs, units } => Some((vec![units, inputs], vec![units])),
            Layer::Conv1d {
                in_ch,
                out_ch,
                kernel,
                ..
            } => Some((vec![out_ch, in_ch, kernel], vec![out_ch])),
            Layer::Conv2d {
                in_ch,
                out_ch,
                kh,
                kw,
                ..
            } => Some((vec![out_ch, in_ch, kh, kw], vec![out_ch])),
            Layer::Relu { .. } | Layer::Flatten { .. } => None,
        }
    }

    /// `(fan_in, fan_out)` used for weight initialization.
    pub(crate) fn fans(&self) -> (usize, usize) {
        match *self {
            Layer::Dense { inputs, units } => (inputs, units),
            Layer::Conv1d {
                in_ch,
                out_ch,
                kernel,
                ..
            } => (in_ch * kernel, out_ch * kernel),
            Layer::Conv2d {
                in_ch,
                out_ch,
                kh,
                kw,
                ..
            } => (in_ch * kh * kw, out_ch * kh * kw),
            _ => (0, 0),
        }
    }

    /// `params` is `[weights, bias]` for parametric layers, empty otherwise.
    pub(crate) fn forward(&self, params: &[&[f64]], x: &[f64], out: &mut [f64]) {
        match *self {
            Layer::Dense { inputs, units } => {
                let (w, b) = (params[0], params[1]);
                for o in 0..units {
                    let row = &w[o * inputs..(o + 1) * inputs];
                    out[o] = b[o] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
                }
            }
            Layer::Conv1d {
                in_ch,
                out_ch,
                kernel,
                in_len,
            } => {
                let (w, b) = (params[0], params[1]);
                let out_len = in_len - kernel + 1;
                for oc in 0..out_ch {
                    let dst = &mut out[oc * out_len..(oc + 1) * out_len];
                    dst.fill(b[oc]);
                    for ic in 0..in_ch {
                        let src = &x[ic * in_len..(ic + 1) * in_len];
                        for k in 0..kernel {
                            let wv = w[(oc * in_ch + ic) * kernel + k];
                            for (d, s) in dst.iter_mut().zip(&src[k..k + out_len]) {
                                *d += wv * s;
                            }
                        }
                    }
                }
            }
            Layer::Conv2d {
                in_ch,
                out_ch,
                kh,
                kw,
                in_h,
                in_w,
            } => {
                let (w, b) = (params[0], params[1]);
                let (oh, ow) = (in_h - kh + 1, in_w - kw + 1);
                for oc in 0..out_ch {
                    let dst = &mut out[oc * oh * ow..(oc + 1) * oh * ow];
                    dst.fill(b[oc]);
                    for ic in 0..in_ch {
                        let src = &x[ic * in_h * in_w..(ic + 1) * in_h * in_w];
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let wv = w[((oc * in_ch + ic) * kh + ky) * kw + kx];
                                for y in 0..oh {
                                    let s = &src[(y + ky) * in_w + kx..(y + ky) * in_w + kx + ow];
                                    let d = &mut dst[y * ow..(y + 1) * ow];
                                    for (dv, sv) in d.iter_mut().zip(s) {
                                        *dv += wv * sv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Layer::Relu { .. } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v.max(0.0);
                }
            }
            Layer::Flatten { .. } => out.copy_from_slice(x),
        }
    }

    /// Accumulates parameter gradients into `grads` (`[dW, db]`) and, when
    /// `grad_in` is given, writes the gradient w.r.t. the layer input.
    pub(crate) fn backward(
        &self,
        params: &[&[f64]],
        x: &[f64],
        grad_out: &[f64],
        grads: &mut [&mut [f64]],
        grad_in: Option<&mut [f64]>,
    ) {
        match *self {
            Layer::Dense { inputs, units } => {
                let w = params[0];
                let [gw, gb] = grads else { unreachable!() };
                for o in 0..units {
                    let g = grad_out[o];
                    gb[o] += g;
                    if g == 0.0 {
                        continue;
                    }
                    for (gwv, xv) in gw[o * inputs..(o + 1) * inputs].iter_mut().zip(x) {
                        *gwv += g * xv;
                    }
                }
                if let Some(gi) = grad_in {
                    gi.fill(0.0);
                    for o in 0..units {
                        let g = grad_out[o];
                        if g == 0.0 {
                            continue;
                        }
                        for (giv, wv) in gi.iter_mut().zip(&w[o * inputs..(o + 1) * inputs]) {
                            *giv += g * wv;
                        }
                    }
                }
            }
            Layer::Conv1d {
                in_ch,
                out_ch,
                kernel,
                in_len,
            } => {
                let w = params[0];
                let [gw, gb] = grads else { unreachable!() };
                let out_len = in_len - kernel + 1;
                let mut gi = grad_in;
                if let Some(g) = gi.as_deref_mut() {
                    g.fill(0.0);
                }
                for oc in 0..out_ch {
                    let go = &grad_out[oc * out_len..(oc + 1) * out_len];
                    gb[oc] += go.iter().sum::<f64>();
                    for ic in 0..in_ch {
                        let src = &x[ic * in_len..(ic + 1) * in_len];
                        for k in 0..kernel {
                            let widx = (oc * in_ch + ic) * kernel + k;
                            gw[widx] += go.iter().zip(&src[k..k + out_len]).map(|(a, b)| a * b).sum::<f64>();
                            if let Some(g) = gi.as_deref_mut() {
                                let wv = w[widx];
                                let dst = &mut g[ic * in_len + k..ic * in_len + k + out_len];
                                for (d, gv) in dst.iter_mut().zip(go) {
                                    *d += wv * gv;
                                }
                            }
                        }
                    }
                }
            }
            Layer::Conv2d {
                in_ch,
                out_ch,
                kh,
                kw,
                in_h,
                in_w,
            } => {
                let w = params[0];
                let [gw, gb] = grads else { unreachable!() };
                let (oh, ow) = (in_h - kh + 1, in_w - kw + 1);
                let mut gi = grad_in;
                if let Some(g) = gi.as_deref_mut() {
                    g.fill(0.0);
                }
                for oc in 0..out_ch {
                    let go = &grad_out[oc * oh * ow..(oc + 1) * oh * ow];
                    gb[oc] += go.iter().sum::<f64>();
                    for ic in 0..in_ch {
                        let src = &x[ic * in_h * in_w..(ic + 1) * in_h * in_w];
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let widx = ((oc * in_ch + ic) * kh + ky) * kw + kx;
                                let mut acc = 0.0;
                                for y in 0..oh {
                                    let s = &src[(y + ky) * in_w + kx..(y + ky) * in_w + kx + ow];
                                    let g = &go[y * ow..(y + 1) * ow];
                                    acc += g.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
                                }
                                gw[widx] += acc;
                                if let Some(gin) = gi.as_deref_mut() {
                                    let wv = w[widx];
                                    let base = ic * in_h * in_w;
                                    for y in 0..oh {
                                        let start = base + (y + ky) * in_w + kx;
                                        let d = &mut gin[start..start + ow];
                                        for (dv, gv) in d.iter_mut().zip(&go[y * ow..(y + 1) * ow]) {
                                            *dv += wv * gv;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Layer::Relu { .. } => {
                if let Some(gi) = grad_in {
                    for ((g, &xv), &go) in gi.iter_mut().zip(x).zip(grad_out) {
                        *g = if xv > 0.0 { go } else { 0.0 };
                    }
                }
            }
            Layer::Flatten { .. } => {
                if let Some(gi) = grad_in {
                    gi.copy_from_slice(grad_out);
                }
            }
        }
    }
}
