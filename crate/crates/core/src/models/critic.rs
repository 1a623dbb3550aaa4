//! Convolutional critic for the adversarial pair: four strided 3x3
//! convolutions with SELU, global average pooling, and a dense head
//! producing one unbounded score (no squashing — this is a Wasserstein
//! critic, not a probability).

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::tensor::{Graph, Initializer, Parameter, ParamSet, Tensor, ValueId};

pub struct Critic {
    cfg: ModelConfig,
    params: ParamSet,
    convs: [(usize, usize); 4],
    dense_w: usize,
    dense_b: usize,
}

impl Critic {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let widths = cfg.critic_channels;
        let mut params = ParamSet::new();
        let mut init = Initializer::new(seed);
        let mut convs = [(0usize, 0usize); 4];
        let mut c_in = 1;
        for (i, &c_out) in widths.iter().enumerate() {
            let w = params.register(Parameter::new(
                format!("conv{}.w", i + 1),
                init.conv_kernels(c_out, c_in, 3),
            ));
            let b = params.register(Parameter::new(
                format!("conv{}.b", i + 1),
                Tensor::zeros(vec![c_out]),
            ));
            convs[i] = (w, b);
            c_in = c_out;
        }
        let dense_w = params.register(Parameter::new(
            "score.w",
            init.dense_weights(1, widths[3]),
        ));
        let dense_b = params.register(Parameter::new("score.b", Tensor::zeros(vec![1])));
        Ok(Critic {
            cfg,
            params,
            convs,
            dense_w,
            dense_b,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Score one `[1, H, W]` heatmap; returns a scalar node.
    pub fn forward(&self, g: &mut Graph, heatmap: ValueId, ids: &[ValueId]) -> Result<ValueId> {
        let shape = g.value(heatmap).shape().to_vec();
        if shape != [1, self.cfg.height, self.cfg.width] {
            return Err(Error::shape(format!(
                "critic expects [1, {}, {}], got {shape:?}",
                self.cfg.height, self.cfg.width
            )));
        }
        let mut x = heatmap;
        for &(w, b) in &self.convs {
            x = g.conv2d(x, ids[w], 2, 1)?;
            x = g.add_channel_bias(x, ids[b])?;
            x = g.selu(x);
        }
        let pooled = g.global_avg_pool(x)?;
        g.dense(pooled, ids[self.dense_w], ids[self.dense_b])
    }

    /// Convenience: bind, forward, and return the scalar score.
    pub fn score(&self, heatmap: &Tensor) -> Result<f64> {
        let mut g = Graph::new();
        let input = g.leaf(heatmap.clone());
        let ids = self.params.bind(&mut g);
        let out = self.forward(&mut g, input, &ids)?;
        g.value(out).item()
    }
}
