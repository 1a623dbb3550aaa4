//! Time-distributed convolutional encoder-decoder with nested skip
//! pathways (depth-2).
//!
//! Every timestep runs through the same weights. The encoder downsamples
//! twice; nested skip nodes re-convolve concatenations of encoder
//! features with upsampled deeper features so decoder inputs sit closer
//! semantically to the encoder maps they fuse with. Per-timestep outputs
//! are aggregated by averaging across the n timesteps, and a final
//! 1-channel convolution reshapes the aggregate into the H x W heatmap.

use super::{apply_output_activation, Forecaster, ModelConfig, ModelKind};
use crate::error::{Error, Result};
use crate::tensor::{Graph, Initializer, Parameter, ParamSet, Tensor, ValueId};

struct ConvParams {
    w: usize,
    b: usize,
}

impl ConvParams {
    fn init(
        params: &mut ParamSet,
        init: &mut Initializer,
        name: &str,
        c_in: usize,
        c_out: usize,
    ) -> ConvParams {
        ConvParams {
            w: params.register(Parameter::new(
                format!("{name}.w"),
                init.conv_kernels(c_out, c_in, 3),
            )),
            b: params.register(Parameter::new(format!("{name}.b"), Tensor::zeros(vec![c_out]))),
        }
    }

    fn apply(&self, g: &mut Graph, ids: &[ValueId], x: ValueId) -> Result<ValueId> {
        let y = g.conv2d(x, ids[self.w], 1, 1)?;
        let y = g.add_channel_bias(y, ids[self.b])?;
        Ok(g.selu(y))
    }
}

pub struct TdEncDecModel {
    cfg: ModelConfig,
    params: ParamSet,
    enc00: ConvParams,
    enc10: ConvParams,
    enc20: ConvParams,
    skip01: ConvParams,
    skip11: ConvParams,
    skip02: ConvParams,
    head_w: usize,
    head_b: usize,
}

impl TdEncDecModel {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let [c1, c2, c3] = cfg.stack_channels;
        let mut params = ParamSet::new();
        let mut init = Initializer::new(seed);
        let enc00 = ConvParams::init(&mut params, &mut init, "enc00", 1, c1);
        let enc10 = ConvParams::init(&mut params, &mut init, "enc10", c1, c2);
        let enc20 = ConvParams::init(&mut params, &mut init, "enc20", c2, c3);
        let skip01 = ConvParams::init(&mut params, &mut init, "skip01", c1 + c2, c1);
        let skip11 = ConvParams::init(&mut params, &mut init, "skip11", c2 + c3, c2);
        let skip02 = ConvParams::init(&mut params, &mut init, "skip02", c1 + c1 + c2, c1);
        let head_w = params.register(Parameter::new("head.w", init.conv_kernels(1, c1, 3)));
        let head_b = params.register(Parameter::new("head.b", Tensor::zeros(vec![1])));
        Ok(TdEncDecModel {
            cfg,
            params,
            enc00,
            enc10,
            enc20,
            skip01,
            skip11,
            skip02,
            head_w,
            head_b,
        })
    }

    /// The shared-weight block applied to one frame. Returns the final
    /// decoder features `[c1, H, W]`.
    fn frame_features(&self, g: &mut Graph, ids: &[ValueId], frame: ValueId) -> Result<ValueId> {
        let x00 = self.enc00.apply(g, ids, frame)?;
        let p0 = g.max_pool2d(x00)?;
        let x10 = self.enc10.apply(g, ids, p0)?;
        let p1 = g.max_pool2d(x10)?;
        let x20 = self.enc20.apply(g, ids, p1)?;

        let up10 = g.upsample2x(x10)?;
        let cat01 = g.concat_channels(&[x00, up10])?;
        let x01 = self.skip01.apply(g, ids, cat01)?;

        let up20 = g.upsample2x(x20)?;
        let cat11 = g.concat_channels(&[x10, up20])?;
        let x11 = self.skip11.apply(g, ids, cat11)?;

        let up11 = g.upsample2x(x11)?;
        let cat02 = g.concat_channels(&[x00, x01, up11])?;
        self.skip02.apply(g, ids, cat02)
    }

    /// Per-timestep features, exposed so the time-distribution contract
    /// (identical frames give identical features) is directly testable.
    pub fn per_timestep_features(
        &self,
        g: &mut Graph,
        input: ValueId,
        ids: &[ValueId],
    ) -> Result<Vec<ValueId>> {
        (0..self.cfg.n)
            .map(|t| {
                let frame = g.select_frame(input, t)?;
                self.frame_features(g, ids, frame)
            })
            .collect()
    }
}

impl Forecaster for TdEncDecModel {
    fn kind(&self) -> ModelKind {
        ModelKind::TdEncDec
    }

    fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn forward(&self, g: &mut Graph, input: ValueId, ids: &[ValueId]) -> Result<ValueId> {
        let shape = g.value(input).shape().to_vec();
        if shape != self.cfg.input_shape() {
            return Err(Error::shape(format!(
                "expected input {:?}, got {shape:?}",
                self.cfg.input_shape()
            )));
        }
        let features = self.per_timestep_features(g, input, ids)?;
        let agg = g.mean_stack(&features)?;
        let out = g.conv2d(agg, ids[self.head_w], 1, 1)?;
        let out = g.add_channel_bias(out, ids[self.head_b])?;
        Ok(apply_output_activation(g, out, self.cfg.mode))
    }
}
