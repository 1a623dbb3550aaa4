//! Recorded forward graph with per-operation backward rules.
//!
//! A [`Graph`] is an append-only arena of nodes. Every op validates its
//! input shapes, computes its output eagerly, and records what the
//! backward pass needs (input ids plus cached data such as pooling
//! argmax indices). `backward` walks the arena in reverse creation
//! order, which is a topological order by construction, and accumulates
//! gradients with a fixed summation order so replays are bit-identical.

use super::{expect_same_shape, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueId(pub(crate) usize);

/// SELU scale constant.
pub const SELU_LAMBDA: f64 = 1.050_700_98;
/// SELU alpha constant.
pub const SELU_ALPHA: f64 = 1.673_263_24;

enum Op {
    Leaf,
    Conv2d {
        input: ValueId,
        kernels: ValueId,
        stride: usize,
        padding: usize,
    },
    MaxPool2d {
        input: ValueId,
        // flat input index of the (first) max per output cell
        argmax: Vec<usize>,
    },
    Upsample2x {
        input: ValueId,
    },
    Selu {
        input: ValueId,
    },
    Sigmoid {
        input: ValueId,
    },
    Tanh {
        input: ValueId,
    },
    Softmax {
        input: ValueId,
    },
    GlobalAvgPool {
        input: ValueId,
    },
    Dense {
        input: ValueId,
        weights: ValueId,
        bias: ValueId,
    },
    Add {
        lhs: ValueId,
        rhs: ValueId,
    },
    Mul {
        lhs: ValueId,
        rhs: ValueId,
    },
    AddChannelBias {
        input: ValueId,
        bias: ValueId,
    },
    ConcatChannels {
        inputs: Vec<ValueId>,
    },
    ConcatScalars {
        inputs: Vec<ValueId>,
    },
    SelectFrame {
        input: ValueId,
        frame: usize,
    },
    WeightedSum {
        features: Vec<ValueId>,
        weights: ValueId,
    },
    MeanStack {
        inputs: Vec<ValueId>,
    },
    DotConst {
        input: ValueId,
        coeffs: Tensor,
    },
    L1Loss {
        pred: ValueId,
        target: Tensor,
    },
    MseLoss {
        pred: ValueId,
        target: Tensor,
    },
    ScalarLinComb {
        terms: Vec<(ValueId, f64)>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients per node after a backward pass.
pub struct Grads {
    grads: Vec<Tensor>,
}

impl Grads {
    pub fn get(&self, id: ValueId) -> &Tensor {
        &self.grads[id.0]
    }
}

/// Append-only computation graph for one forward/backward pass.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: ValueId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> ValueId {
        self.nodes.push(Node { value, op });
        ValueId(self.nodes.len() - 1)
    }

    /// Register an input or parameter tensor as a graph leaf.
    pub fn leaf(&mut self, value: Tensor) -> ValueId {
        self.push(value, Op::Leaf)
    }

    /// 2-D convolution with zero padding.
    ///
    /// `input` is `[C_in, H, W]`, `kernels` is `[C_out, C_in, k, k]`;
    /// output is `[C_out, H', W']` with `H' = (H + 2p - k)/s + 1`.
    pub fn conv2d(
        &mut self,
        input: ValueId,
        kernels: ValueId,
        stride: usize,
        padding: usize,
    ) -> Result<ValueId> {
        let x = self.value(input);
        let k = self.value(kernels);
        if x.shape().len() != 3 || k.shape().len() != 4 {
            return Err(Error::shape(format!(
                "conv2d expects [C,H,W] input and [Co,Ci,k,k] kernels, got {:?} and {:?}",
                x.shape(),
                k.shape()
            )));
        }
        let (ci, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (co, kci, kh, kw) = (k.shape()[0], k.shape()[1], k.shape()[2], k.shape()[3]);
        if kci != ci {
            return Err(Error::shape(format!(
                "conv2d channel mismatch: input has {ci}, kernels expect {kci}"
            )));
        }
        if stride == 0 {
            return Err(Error::shape("conv2d stride must be >= 1".to_string()));
        }
        if kh > h + 2 * padding || kw > w + 2 * padding {
            return Err(Error::shape(format!(
                "conv2d kernel {kh}x{kw} exceeds padded input {}x{}",
                h + 2 * padding,
                w + 2 * padding
            )));
        }
        let oh = (h + 2 * padding - kh) / stride + 1;
        let ow = (w + 2 * padding - kw) / stride + 1;
        let mut out = vec![0.0; co * oh * ow];
        let xd = x.data();
        let kd = k.data();
        for c_out in 0..co {
            for c_in in 0..ci {
                let kbase = (c_out * ci + c_in) * kh * kw;
                let ibase = c_in * h * w;
                let obase = c_out * oh * ow;
                for orow in 0..oh {
                    let ih0 = (orow * stride) as isize - padding as isize;
                    for krow in 0..kh {
                        let ih = ih0 + krow as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let irow = ibase + ih as usize * w;
                        let krow_base = kbase + krow * kw;
                        let orow_base = obase + orow * ow;
                        for ocol in 0..ow {
                            let iw0 = (ocol * stride) as isize - padding as isize;
                            let mut acc = 0.0;
                            for kcol in 0..kw {
                                let iw = iw0 + kcol as isize;
                                if iw < 0 || iw >= w as isize {
                                    continue;
                                }
                                acc += xd[irow + iw as usize] * kd[krow_base + kcol];
                            }
                            out[orow_base + ocol] += acc;
                        }
                    }
                }
            }
        }
        Ok(self.push(
            Tensor::from_op(vec![co, oh, ow], out),
            Op::Conv2d {
                input,
                kernels,
                stride,
                padding,
            },
        ))
    }

    /// 2x2 max pooling with stride 2. Extents must be even; ties route
    /// the gradient to the first maximal cell in row-major scan order.
    pub fn max_pool2d(&mut self, input: ValueId) -> Result<ValueId> {
        let x = self.value(input);
        if x.shape().len() != 3 {
            return Err(Error::shape(format!(
                "max_pool2d expects [C,H,W], got {:?}",
                x.shape()
            )));
        }
        let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        if !h.is_multiple_of(2) || !w.is_multiple_of(2) {
            return Err(Error::shape(format!(
                "max_pool2d requires even extents, got {h}x{w}"
            )));
        }
        let (oh, ow) = (h / 2, w / 2);
        let xd = x.data();
        let mut out = vec![0.0; c * oh * ow];
        let mut argmax = vec![0usize; c * oh * ow];
        for ch in 0..c {
            for orow in 0..oh {
                for ocol in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for dh in 0..2 {
                        for dw in 0..2 {
                            let idx = (ch * h + 2 * orow + dh) * w + 2 * ocol + dw;
                            if xd[idx] > best {
                                best = xd[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let o = (ch * oh + orow) * ow + ocol;
                    out[o] = best;
                    argmax[o] = best_idx;
                }
            }
        }
        Ok(self.push(
            Tensor::from_op(vec![c, oh, ow], out),
            Op::MaxPool2d { input, argmax },
        ))
    }

    /// Nearest-neighbor 2x upsampling of a `[C,H,W]` tensor.
    pub fn upsample2x(&mut self, input: ValueId) -> Result<ValueId> {
        let x = self.value(input);
        if x.shape().len() != 3 {
            return Err(Error::shape(format!(
                "upsample2x expects [C,H,W], got {:?}",
                x.shape()
            )));
        }
        let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (oh, ow) = (2 * h, 2 * w);
        let xd = x.data();
        let mut out = vec![0.0; c * oh * ow];
        for ch in 0..c {
            for row in 0..oh {
                for col in 0..ow {
                    out[(ch * oh + row) * ow + col] = xd[(ch * h + row / 2) * w + col / 2];
                }
            }
        }
        Ok(self.push(Tensor::from_op(vec![c, oh, ow], out), Op::Upsample2x { input }))
    }

    /// Scaled exponential linear unit.
    pub fn selu(&mut self, input: ValueId) -> ValueId {
        let out = self.value(input).map(|v| {
            if v > 0.0 {
                SELU_LAMBDA * v
            } else {
                SELU_LAMBDA * SELU_ALPHA * (v.exp() - 1.0)
            }
        });
        self.push(out, Op::Selu { input })
    }

    /// Logistic sigmoid, computed without overflow for large |x|.
    pub fn sigmoid(&mut self, input: ValueId) -> ValueId {
        let out = self.value(input).map(stable_sigmoid);
        self.push(out, Op::Sigmoid { input })
    }

    pub fn tanh(&mut self, input: ValueId) -> ValueId {
        let out = self.value(input).map(f64::tanh);
        self.push(out, Op::Tanh { input })
    }

    /// Softmax over a rank-1 tensor, with max-subtraction for stability.
    pub fn softmax(&mut self, input: ValueId) -> Result<ValueId> {
        let x = self.value(input);
        if x.shape().len() != 1 {
            return Err(Error::shape(format!(
                "softmax expects rank-1 input, got {:?}",
                x.shape()
            )));
        }
        let m = x.max_value();
        let exps: Vec<f64> = x.data().iter().map(|&v| (v - m).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let out = Tensor::from_op(x.shape().to_vec(), exps.iter().map(|e| e / sum).collect());
        Ok(self.push(out, Op::Softmax { input }))
    }

    /// Per-channel spatial mean: `[C,H,W] -> [C]`.
    pub fn global_avg_pool(&mut self, input: ValueId) -> Result<ValueId> {
        let x = self.value(input);
        if x.shape().len() != 3 {
            return Err(Error::shape(format!(
                "global_avg_pool expects [C,H,W], got {:?}",
                x.shape()
            )));
        }
        let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let hw = (h * w) as f64;
        let xd = x.data();
        let out: Vec<f64> = (0..c)
            .map(|ch| xd[ch * h * w..(ch + 1) * h * w].iter().sum::<f64>() / hw)
            .collect();
        Ok(self.push(Tensor::from_op(vec![c], out), Op::GlobalAvgPool { input }))
    }

    /// Affine map: `weights [p,m] * input [m] + bias [p]`.
    pub fn dense(&mut self, input: ValueId, weights: ValueId, bias: ValueId) -> Result<ValueId> {
        let x = self.value(input);
        let w = self.value(weights);
        let b = self.value(bias);
        if x.shape().len() != 1 || w.shape().len() != 2 || b.shape().len() != 1 {
            return Err(Error::shape(format!(
                "dense expects input [m], weights [p,m], bias [p]; got {:?}, {:?}, {:?}",
                x.shape(),
                w.shape(),
                b.shape()
            )));
        }
        let (p, m) = (w.shape()[0], w.shape()[1]);
        if x.shape()[0] != m || b.shape()[0] != p {
            return Err(Error::shape(format!(
                "dense dimension mismatch: input {}, weights {p}x{m}, bias {}",
                x.shape()[0],
                b.shape()[0]
            )));
        }
        let xd = x.data();
        let wd = w.data();
        let out: Vec<f64> = (0..p)
            .map(|i| {
                let row = &wd[i * m..(i + 1) * m];
                b.data()[i] + row.iter().zip(xd).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        Ok(self.push(
            Tensor::from_op(vec![p], out),
            Op::Dense {
                input,
                weights,
                bias,
            },
        ))
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, lhs: ValueId, rhs: ValueId) -> Result<ValueId> {
        expect_same_shape("add", self.value(lhs), self.value(rhs))?;
        let out = Tensor::from_op(
            self.value(lhs).shape().to_vec(),
            self.value(lhs)
                .data()
                .iter()
                .zip(self.value(rhs).data())
                .map(|(a, b)| a + b)
                .collect(),
        );
        Ok(self.push(out, Op::Add { lhs, rhs }))
    }

    /// Elementwise (Hadamard) product of two same-shape tensors.
    pub fn mul(&mut self, lhs: ValueId, rhs: ValueId) -> Result<ValueId> {
        expect_same_shape("mul", self.value(lhs), self.value(rhs))?;
        let out = Tensor::from_op(
            self.value(lhs).shape().to_vec(),
            self.value(lhs)
                .data()
                .iter()
                .zip(self.value(rhs).data())
                .map(|(a, b)| a * b)
                .collect(),
        );
        Ok(self.push(out, Op::Mul { lhs, rhs }))
    }

    /// Broadcast a `[C]` bias over a `[C,H,W]` tensor.
    pub fn add_channel_bias(&mut self, input: ValueId, bias: ValueId) -> Result<ValueId> {
        let x = self.value(input);
        let b = self.value(bias);
        if x.shape().len() != 3 || b.shape().len() != 1 || b.shape()[0] != x.shape()[0] {
            return Err(Error::shape(format!(
                "add_channel_bias expects [C,H,W] + [C], got {:?} + {:?}",
                x.shape(),
                b.shape()
            )));
        }
        let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let mut out = x.data().to_vec();
        for ch in 0..c {
            let bv = b.data()[ch];
            for v in &mut out[ch * h * w..(ch + 1) * h * w] {
                *v += bv;
            }
        }
        Ok(self.push(
            Tensor::from_op(vec![c, h, w], out),
            Op::AddChannelBias { input, bias },
        ))
    }

    /// Concatenate `[C_i,H,W]` tensors along the channel axis.
    pub fn concat_channels(&mut self, inputs: &[ValueId]) -> Result<ValueId> {
        if inputs.is_empty() {
            return Err(Error::shape("concat_channels with no inputs".to_string()));
        }
        let first = self.value(inputs[0]);
        if first.shape().len() != 3 {
            return Err(Error::shape(format!(
                "concat_channels expects [C,H,W], got {:?}",
                first.shape()
            )));
        }
        let (h, w) = (first.shape()[1], first.shape()[2]);
        let mut total_c = 0;
        for &id in inputs {
            let t = self.value(id);
            if t.shape().len() != 3 || t.shape()[1] != h || t.shape()[2] != w {
                return Err(Error::shape(format!(
                    "concat_channels spatial mismatch: {:?} vs {h}x{w}",
                    t.shape()
                )));
            }
            total_c += t.shape()[0];
        }
        let mut out = Vec::with_capacity(total_c * h * w);
        for &id in inputs {
            out.extend_from_slice(self.value(id).data());
        }
        Ok(self.push(
            Tensor::from_op(vec![total_c, h, w], out),
            Op::ConcatChannels {
                inputs: inputs.to_vec(),
            },
        ))
    }

    /// Stack scalar nodes into a rank-1 tensor.
    pub fn concat_scalars(&mut self, inputs: &[ValueId]) -> Result<ValueId> {
        if inputs.is_empty() {
            return Err(Error::shape("concat_scalars with no inputs".to_string()));
        }
        let mut out = Vec::with_capacity(inputs.len());
        for &id in inputs {
            out.push(self.value(id).item()?);
        }
        Ok(self.push(
            Tensor::from_op(vec![inputs.len()], out),
            Op::ConcatScalars {
                inputs: inputs.to_vec(),
            },
        ))
    }

    /// Select sub-tensor `frame` along the leading axis:
    /// `[n, d...] -> [d...]`.
    pub fn select_frame(&mut self, input: ValueId, frame: usize) -> Result<ValueId> {
        let x = self.value(input);
        if x.shape().len() < 2 {
            return Err(Error::shape(format!(
                "select_frame expects rank >= 2, got {:?}",
                x.shape()
            )));
        }
        let n = x.shape()[0];
        if frame >= n {
            return Err(Error::shape(format!(
                "select_frame index {frame} out of range for leading extent {n}"
            )));
        }
        let rest: Vec<usize> = x.shape()[1..].to_vec();
        let block: usize = rest.iter().product();
        let out = x.data()[frame * block..(frame + 1) * block].to_vec();
        Ok(self.push(Tensor::from_op(rest, out), Op::SelectFrame { input, frame }))
    }

    /// Convex (or arbitrary) combination of same-shape feature tensors,
    /// weighted by a rank-1 tensor with one entry per feature.
    pub fn weighted_sum(&mut self, features: &[ValueId], weights: ValueId) -> Result<ValueId> {
        let wt = self.value(weights);
        if wt.shape().len() != 1 || wt.shape()[0] != features.len() {
            return Err(Error::shape(format!(
                "weighted_sum expects weights [{}], got {:?}",
                features.len(),
                wt.shape()
            )));
        }
        if features.is_empty() {
            return Err(Error::shape("weighted_sum with no features".to_string()));
        }
        let shape = self.value(features[0]).shape().to_vec();
        for &f in features {
            if self.value(f).shape() != shape.as_slice() {
                return Err(Error::shape("weighted_sum feature shape mismatch".to_string()));
            }
        }
        let mut out = vec![0.0; shape.iter().product()];
        for (k, &f) in features.iter().enumerate() {
            let wv = self.value(weights).data()[k];
            for (o, &v) in out.iter_mut().zip(self.value(f).data()) {
                *o += wv * v;
            }
        }
        Ok(self.push(
            Tensor::from_op(shape, out),
            Op::WeightedSum {
                features: features.to_vec(),
                weights,
            },
        ))
    }

    /// Mean of same-shape tensors: `(1/k) * sum_i inputs[i]`.
    pub fn mean_stack(&mut self, inputs: &[ValueId]) -> Result<ValueId> {
        if inputs.is_empty() {
            return Err(Error::shape("mean_stack with no inputs".to_string()));
        }
        let shape = self.value(inputs[0]).shape().to_vec();
        let mut out = vec![0.0; shape.iter().product()];
        for &id in inputs {
            if self.value(id).shape() != shape.as_slice() {
                return Err(Error::shape("mean_stack shape mismatch".to_string()));
            }
            for (o, &v) in out.iter_mut().zip(self.value(id).data()) {
                *o += v;
            }
        }
        let inv = 1.0 / inputs.len() as f64;
        for o in &mut out {
            *o *= inv;
        }
        Ok(self.push(
            Tensor::from_op(shape, out),
            Op::MeanStack {
                inputs: inputs.to_vec(),
            },
        ))
    }

    /// Fixed-coefficient dot product producing a scalar node. The
    /// coefficients are constants, not graph values.
    pub fn dot_const(&mut self, input: ValueId, coeffs: Tensor) -> Result<ValueId> {
        expect_same_shape("dot_const", self.value(input), &coeffs)?;
        let v = self
            .value(input)
            .data()
            .iter()
            .zip(coeffs.data())
            .map(|(a, b)| a * b)
            .sum();
        Ok(self.push(Tensor::scalar(v), Op::DotConst { input, coeffs }))
    }

    /// Mean absolute difference against a constant target.
    pub fn l1_loss(&mut self, pred: ValueId, target: Tensor) -> Result<ValueId> {
        expect_same_shape("l1_loss", self.value(pred), &target)?;
        let n = target.len() as f64;
        let v = self
            .value(pred)
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t).abs())
            .sum::<f64>()
            / n;
        Ok(self.push(Tensor::scalar(v), Op::L1Loss { pred, target }))
    }

    /// Mean squared difference against a constant target.
    pub fn mse_loss(&mut self, pred: ValueId, target: Tensor) -> Result<ValueId> {
        expect_same_shape("mse_loss", self.value(pred), &target)?;
        let n = target.len() as f64;
        let v = self
            .value(pred)
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        Ok(self.push(Tensor::scalar(v), Op::MseLoss { pred, target }))
    }

    /// Linear combination of scalar nodes with constant coefficients.
    pub fn scalar_lincomb(&mut self, terms: &[(ValueId, f64)]) -> Result<ValueId> {
        if terms.is_empty() {
            return Err(Error::shape("scalar_lincomb with no terms".to_string()));
        }
        let mut v = 0.0;
        for &(id, c) in terms {
            v += c * self.value(id).item()?;
        }
        Ok(self.push(
            Tensor::scalar(v),
            Op::ScalarLinComb {
                terms: terms.to_vec(),
            },
        ))
    }

    /// Reverse-mode gradient of a scalar `root` with respect to every
    /// node. Nodes recorded after `root` are ignored.
    pub fn backward(&self, root: ValueId) -> Result<Grads> {
        if !self.value(root).is_scalar() {
            return Err(Error::shape(format!(
                "backward root must be scalar, got {:?}",
                self.value(root).shape()
            )));
        }
        let mut grads: Vec<Tensor> = self
            .nodes
            .iter()
            .map(|n| Tensor::zeros(n.value.shape().to_vec()))
            .collect();
        grads[root.0].data_mut()[0] = 1.0;

        for idx in (0..=root.0).rev() {
            // Move the out-grad aside so input grads can be borrowed mutably.
            let g = std::mem::replace(&mut grads[idx], Tensor::zeros(vec![1]));
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = g;
        }
        Ok(Grads { grads })
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Tensor]) -> Result<()> {
        let node = &self.nodes[idx];
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                kernels,
                stride,
                padding,
            } => {
                let x = self.value(*input);
                let k = self.value(*kernels);
                let (ci, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
                let (co, _, kh, kw) = (k.shape()[0], k.shape()[1], k.shape()[2], k.shape()[3]);
                let (oh, ow) = (node.value.shape()[1], node.value.shape()[2]);
                let xd = x.data();
                let kd = k.data();
                // Split the two mutable grad slots out of the arena.
                let (a, b) = (input.0, kernels.0);
                let (dinput, dkernels) = two_mut(grads, a, b);
                let din = dinput.data_mut();
                let dk = dkernels.data_mut();
                for c_out in 0..co {
                    for orow in 0..oh {
                        for ocol in 0..ow {
                            let go = gd[(c_out * oh + orow) * ow + ocol];
                            if go == 0.0 {
                                continue;
                            }
                            let ih0 = (orow * stride) as isize - *padding as isize;
                            let iw0 = (ocol * stride) as isize - *padding as isize;
                            for c_in in 0..ci {
                                let kbase = (c_out * ci + c_in) * kh * kw;
                                let ibase = c_in * h * w;
                                for krow in 0..kh {
                                    let ih = ih0 + krow as isize;
                                    if ih < 0 || ih >= h as isize {
                                        continue;
                                    }
                                    let irow = ibase + ih as usize * w;
                                    for kcol in 0..kw {
                                        let iw = iw0 + kcol as isize;
                                        if iw < 0 || iw >= w as isize {
                                            continue;
                                        }
                                        let ii = irow + iw as usize;
                                        let ki = kbase + krow * kw + kcol;
                                        din[ii] += go * kd[ki];
                                        dk[ki] += go * xd[ii];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Op::MaxPool2d { input, argmax } => {
                let din = grads[input.0].data_mut();
                for (o, &src) in argmax.iter().enumerate() {
                    din[src] += gd[o];
                }
            }
            Op::Upsample2x { input } => {
                let x = self.value(*input);
                let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
                let (oh, ow) = (2 * h, 2 * w);
                let din = grads[input.0].data_mut();
                for ch in 0..c {
                    for row in 0..oh {
                        for col in 0..ow {
                            din[(ch * h + row / 2) * w + col / 2] +=
                                gd[(ch * oh + row) * ow + col];
                        }
                    }
                }
            }
            Op::Selu { input } => {
                let x = self.value(*input);
                let din = grads[input.0].data_mut();
                for (i, &v) in x.data().iter().enumerate() {
                    let d = if v > 0.0 {
                        SELU_LAMBDA
                    } else {
                        SELU_LAMBDA * SELU_ALPHA * v.exp()
                    };
                    din[i] += gd[i] * d;
                }
            }
            Op::Sigmoid { input } => {
                let y = node.value.data();
                let din = grads[input.0].data_mut();
                for i in 0..y.len() {
                    din[i] += gd[i] * y[i] * (1.0 - y[i]);
                }
            }
            Op::Tanh { input } => {
                let y = node.value.data();
                let din = grads[input.0].data_mut();
                for i in 0..y.len() {
                    din[i] += gd[i] * (1.0 - y[i] * y[i]);
                }
            }
            Op::Softmax { input } => {
                let y = node.value.data();
                let dot: f64 = y.iter().zip(gd).map(|(a, b)| a * b).sum();
                let din = grads[input.0].data_mut();
                for i in 0..y.len() {
                    din[i] += y[i] * (gd[i] - dot);
                }
            }
            Op::GlobalAvgPool { input } => {
                let x = self.value(*input);
                let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
                let inv = 1.0 / (h * w) as f64;
                let din = grads[input.0].data_mut();
                for ch in 0..c {
                    let gc = gd[ch] * inv;
                    for v in &mut din[ch * h * w..(ch + 1) * h * w] {
                        *v += gc;
                    }
                }
            }
            Op::Dense {
                input,
                weights,
                bias,
            } => {
                let x = self.value(*input);
                let w = self.value(*weights);
                let (p, m) = (w.shape()[0], w.shape()[1]);
                {
                    let din = grads[input.0].data_mut();
                    for (i, &gi) in gd.iter().enumerate().take(p) {
                        let row = &w.data()[i * m..(i + 1) * m];
                        for (j, &wv) in row.iter().enumerate() {
                            din[j] += gi * wv;
                        }
                    }
                }
                {
                    let dw = grads[weights.0].data_mut();
                    for (i, &gi) in gd.iter().enumerate().take(p) {
                        for (j, &xv) in x.data().iter().enumerate() {
                            dw[i * m + j] += gi * xv;
                        }
                    }
                }
                {
                    let db = grads[bias.0].data_mut();
                    for (i, &gi) in gd.iter().enumerate().take(p) {
                        db[i] += gi;
                    }
                }
            }
            Op::Add { lhs, rhs } => {
                for (i, &gv) in gd.iter().enumerate() {
                    grads[lhs.0].data_mut()[i] += gv;
                }
                for (i, &gv) in gd.iter().enumerate() {
                    grads[rhs.0].data_mut()[i] += gv;
                }
            }
            Op::Mul { lhs, rhs } => {
                let lv = self.value(*lhs).data().to_vec();
                let rv = self.value(*rhs).data().to_vec();
                {
                    let dl = grads[lhs.0].data_mut();
                    for i in 0..gd.len() {
                        dl[i] += gd[i] * rv[i];
                    }
                }
                {
                    let dr = grads[rhs.0].data_mut();
                    for i in 0..gd.len() {
                        dr[i] += gd[i] * lv[i];
                    }
                }
            }
            Op::AddChannelBias { input, bias } => {
                let x = self.value(*input);
                let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
                {
                    let din = grads[input.0].data_mut();
                    for i in 0..gd.len() {
                        din[i] += gd[i];
                    }
                }
                {
                    let db = grads[bias.0].data_mut();
                    for ch in 0..c {
                        db[ch] += gd[ch * h * w..(ch + 1) * h * w].iter().sum::<f64>();
                    }
                }
            }
            Op::ConcatChannels { inputs } => {
                let mut offset = 0;
                for &id in inputs {
                    let len = self.value(id).len();
                    let din = grads[id.0].data_mut();
                    for i in 0..len {
                        din[i] += gd[offset + i];
                    }
                    offset += len;
                }
            }
            Op::ConcatScalars { inputs } => {
                for (i, &id) in inputs.iter().enumerate() {
                    grads[id.0].data_mut()[0] += gd[i];
                }
            }
            Op::SelectFrame { input, frame } => {
                let block = gd.len();
                let din = grads[input.0].data_mut();
                for i in 0..block {
                    din[frame * block + i] += gd[i];
                }
            }
            Op::WeightedSum { features, weights } => {
                let wv = self.value(*weights).data().to_vec();
                for (k, &f) in features.iter().enumerate() {
                    let fv = self.value(f).data().to_vec();
                    let mut dot = 0.0;
                    {
                        let df = grads[f.0].data_mut();
                        for i in 0..gd.len() {
                            df[i] += wv[k] * gd[i];
                            dot += gd[i] * fv[i];
                        }
                    }
                    grads[weights.0].data_mut()[k] += dot;
                }
            }
            Op::MeanStack { inputs } => {
                let inv = 1.0 / inputs.len() as f64;
                for &id in inputs {
                    let din = grads[id.0].data_mut();
                    for i in 0..gd.len() {
                        din[i] += gd[i] * inv;
                    }
                }
            }
            Op::DotConst { input, coeffs } => {
                let din = grads[input.0].data_mut();
                for (i, &c) in coeffs.data().iter().enumerate() {
                    din[i] += gd[0] * c;
                }
            }
            Op::L1Loss { pred, target } => {
                let p = self.value(*pred);
                let n = target.len() as f64;
                let din = grads[pred.0].data_mut();
                for (i, (pv, tv)) in p.data().iter().zip(target.data()).enumerate() {
                    let d = pv - tv;
                    let s = if d > 0.0 {
                        1.0
                    } else if d < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    din[i] += gd[0] * s / n;
                }
            }
            Op::MseLoss { pred, target } => {
                let p = self.value(*pred);
                let n = target.len() as f64;
                let din = grads[pred.0].data_mut();
                for (i, (pv, tv)) in p.data().iter().zip(target.data()).enumerate() {
                    din[i] += gd[0] * 2.0 * (pv - tv) / n;
                }
            }
            Op::ScalarLinComb { terms } => {
                for &(id, c) in terms {
                    grads[id.0].data_mut()[0] += gd[0] * c;
                }
            }
        }
        Ok(())
    }
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Borrow two distinct slots of a slice mutably.
fn two_mut(slice: &mut [Tensor], a: usize, b: usize) -> (&mut Tensor, &mut Tensor) {
    debug_assert_ne!(a, b);
    if a < b {
        let (lo, hi) = slice.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = slice.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn conv2d_identity_kernel_is_identity() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[1, 3, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]));
        let k = g.leaf(t(&[1, 1, 1, 1], &[1.0]));
        let y = g.conv2d(x, k, 1, 0).unwrap();
        assert_eq!(g.value(y).data(), g.value(x).data());
        assert_eq!(g.value(y).shape(), &[1, 3, 3]);
    }

    #[test]
    fn conv2d_all_ones_sums_window() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::full(vec![1, 3, 3], 1.0));
        let k = g.leaf(Tensor::full(vec![1, 1, 3, 3], 1.0));
        let y = g.conv2d(x, k, 1, 0).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 1, 1]);
        assert_eq!(g.value(y).data()[0], 9.0);
    }

    #[test]
    fn conv2d_rejects_channel_mismatch() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(vec![2, 4, 4]));
        let k = g.leaf(Tensor::zeros(vec![3, 1, 3, 3]));
        assert!(g.conv2d(x, k, 1, 1).is_err());
    }

    #[test]
    fn conv2d_output_extent_formula() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(vec![1, 16, 16]));
        let k = g.leaf(Tensor::zeros(vec![4, 1, 3, 3]));
        let y = g.conv2d(x, k, 2, 1).unwrap();
        assert_eq!(g.value(y).shape(), &[4, 8, 8]);
    }

    #[test]
    fn max_pool_forced_max_and_tie_break() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let y = g.max_pool2d(x).unwrap();
        assert_eq!(g.value(y).data(), &[4.0]);

        // constant window: gradient goes to the first cell in scan order
        let mut g = Graph::new();
        let x = g.leaf(Tensor::full(vec![1, 2, 2], 7.0));
        let y = g.max_pool2d(x).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(x).data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn max_pool_rejects_odd_extent() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(vec![1, 3, 4]));
        assert!(g.max_pool2d(x).is_err());
    }

    #[test]
    fn max_pool_constant_image_halves_resolution() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::full(vec![2, 4, 4], 3.25));
        let y = g.max_pool2d(x).unwrap();
        assert_eq!(g.value(y).shape(), &[2, 2, 2]);
        assert!(g.value(y).data().iter().all(|&v| v == 3.25));
    }

    #[test]
    fn selu_fixed_points() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[3], &[0.0, 1.0, -20.0]));
        let y = g.selu(x);
        let out = g.value(y).data();
        assert_eq!(out[0], 0.0);
        assert!((out[1] - 1.050_700_98).abs() < 1e-12);
        assert!((out[2] - (-1.758_099_32)).abs() < 1e-6);
    }

    #[test]
    fn sigmoid_tanh_at_zero_and_saturation() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[2], &[0.0, 50.0]));
        let s = g.sigmoid(x);
        assert_eq!(g.value(s).data()[0], 0.5);
        assert!((g.value(s).data()[1] - 1.0).abs() < 1e-12);
        let y = g.tanh(x);
        assert_eq!(g.value(y).data()[0], 0.0);
    }

    #[test]
    fn softmax_symmetry_closed_form_and_shift() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[3], &[0.0, 0.0, 0.0]));
        let y = g.softmax(x).unwrap();
        for &v in g.value(y).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }

        let c = 4.2;
        let x = g.leaf(t(&[2], &[c, c + std::f64::consts::LN_2]));
        let y = g.softmax(x).unwrap();
        assert!((g.value(y).data()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((g.value(y).data()[1] - 2.0 / 3.0).abs() < 1e-12);

        let x = g.leaf(t(&[2], &[1000.0, 1000.0]));
        let y = g.softmax(x).unwrap();
        assert_eq!(g.value(y).data(), &[0.5, 0.5]);
        let sum: f64 = g.value(y).data().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn global_avg_pool_mean_and_uniform_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[1, 2, 2], &[0.0, 2.0, 4.0, 6.0]));
        let y = g.global_avg_pool(x).unwrap();
        assert_eq!(g.value(y).data(), &[3.0]);
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(x).data(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn dense_identity_and_arithmetic() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[2], &[3.0, -1.5]));
        let w = g.leaf(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let b = g.leaf(Tensor::zeros(vec![2]));
        let y = g.dense(x, w, b).unwrap();
        assert_eq!(g.value(y).data(), g.value(x).data());

        let x = g.leaf(t(&[2], &[2.0, 3.0]));
        let w = g.leaf(t(&[1, 2], &[1.0, 1.0]));
        let b = g.leaf(t(&[1], &[-5.0]));
        let y = g.dense(x, w, b).unwrap();
        assert_eq!(g.value(y).data(), &[0.0]);
    }

    #[test]
    fn select_frame_roundtrip_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[2, 1, 2, 2], &[1., 2., 3., 4., 5., 6., 7., 8.]));
        let f1 = g.select_frame(x, 1).unwrap();
        assert_eq!(g.value(f1).shape(), &[1, 2, 2]);
        assert_eq!(g.value(f1).data(), &[5., 6., 7., 8.]);
        let s = g.dot_const(f1, Tensor::full(vec![1, 2, 2], 1.0)).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).data(), &[0., 0., 0., 0., 1., 1., 1., 1.]);
    }

    #[test]
    fn weighted_sum_convexity() {
        let mut g = Graph::new();
        let f = t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let a = g.leaf(f.clone());
        let b = g.leaf(f.clone());
        let w = g.leaf(t(&[2], &[0.3, 0.7]));
        let y = g.weighted_sum(&[a, b], w).unwrap();
        for (o, e) in g.value(y).data().iter().zip(f.data()) {
            assert!((o - e).abs() < 1e-15);
        }
    }

    #[test]
    fn loss_nodes_match_hand_values() {
        let mut g = Graph::new();
        let p = g.leaf(t(&[2], &[0.0, 0.5]));
        let l1 = g.l1_loss(p, t(&[2], &[1.0, 0.5])).unwrap();
        assert_eq!(g.value(l1).data()[0], 0.5);

        let p = g.leaf(t(&[2], &[0.0, 1.0]));
        let mse = g.mse_loss(p, t(&[2], &[1.0, 1.0])).unwrap();
        assert_eq!(g.value(mse).data()[0], 0.5);
    }

    #[test]
    fn backward_requires_scalar_root() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(vec![3]));
        assert!(g.backward(x).is_err());
    }
}
