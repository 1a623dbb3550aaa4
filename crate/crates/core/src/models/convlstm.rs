//! Convolutional LSTM cells, the three-stage stack, and temporal
//! attention pooling.

use super::{Forecaster, HeadParams, ModelConfig, ModelKind};
use crate::error::{Error, Result};
use crate::tensor::{Graph, Initializer, Parameter, ParamSet, Tensor, ValueId};

/// Graph ids of one cell's gate parameters, in gate order
/// input / forget / cell / output.
#[derive(Debug, Clone, Copy)]
pub struct CellGateIds {
    /// Input-to-state kernels `[C_out, C_in, 3, 3]`.
    pub wx: [ValueId; 4],
    /// State-to-state kernels `[C_out, C_out, 3, 3]`.
    pub wh: [ValueId; 4],
    /// Per-gate channel biases `[C_out]`.
    pub b: [ValueId; 4],
}

/// One ConvLSTM step. All gate transformations are 3x3 convolutions
/// with padding 1, so spatial extent is preserved:
///
/// ```text
/// i = sigmoid(Wxi*x + Whi*h + bi)      f = sigmoid(Wxf*x + Whf*h + bf)
/// g = tanh  (Wxg*x + Whg*h + bg)      o = sigmoid(Wxo*x + Who*h + bo)
/// c_t = f .* c_prev + i .* g           h_t = o .* tanh(c_t)
/// ```
pub fn convlstm_cell_step(
    g: &mut Graph,
    x: ValueId,
    h_prev: ValueId,
    c_prev: ValueId,
    gates: &CellGateIds,
) -> Result<(ValueId, ValueId)> {
    let mut pre = [None; 4];
    for (k, slot) in pre.iter_mut().enumerate() {
        let zx = g.conv2d(x, gates.wx[k], 1, 1)?;
        let zh = g.conv2d(h_prev, gates.wh[k], 1, 1)?;
        let z = g.add(zx, zh)?;
        *slot = Some(g.add_channel_bias(z, gates.b[k])?);
    }
    let gate_i = g.sigmoid(pre[0].unwrap());
    let gate_f = g.sigmoid(pre[1].unwrap());
    let gate_g = g.tanh(pre[2].unwrap());
    let gate_o = g.sigmoid(pre[3].unwrap());
    let keep = g.mul(gate_f, c_prev)?;
    let write = g.mul(gate_i, gate_g)?;
    let c_t = g.add(keep, write)?;
    let c_act = g.tanh(c_t);
    let h_t = g.mul(gate_o, c_act)?;
    Ok((h_t, c_t))
}

/// Softmax attention over per-timestep feature maps: each map is
/// globally average-pooled, scored by a shared dense head, and the maps
/// are combined with the softmax weights of those scores.
pub fn attention_pool(
    g: &mut Graph,
    features: &[ValueId],
    score_w: ValueId,
    score_b: ValueId,
) -> Result<ValueId> {
    if features.is_empty() {
        return Err(Error::shape("attention_pool needs at least one feature"));
    }
    let mut scores = Vec::with_capacity(features.len());
    for &f in features {
        let pooled = g.global_avg_pool(f)?;
        scores.push(g.dense(pooled, score_w, score_b)?);
    }
    let stacked = g.concat_scalars(&scores)?;
    let weights = g.softmax(stacked)?;
    g.weighted_sum(features, weights)
}

// Parameter indices (into the owning ParamSet) for one cell.
#[derive(Debug, Clone, Copy)]
struct CellParams {
    wx: [usize; 4],
    wh: [usize; 4],
    b: [usize; 4],
}

impl CellParams {
    fn init(
        params: &mut ParamSet,
        init: &mut Initializer,
        prefix: &str,
        c_in: usize,
        c_out: usize,
    ) -> CellParams {
        const GATES: [&str; 4] = ["i", "f", "g", "o"];
        let mut wx = [0usize; 4];
        let mut wh = [0usize; 4];
        let mut b = [0usize; 4];
        for (k, gate) in GATES.iter().enumerate() {
            wx[k] = params.register(Parameter::new(
                format!("{prefix}.wx_{gate}"),
                init.conv_kernels(c_out, c_in, 3),
            ));
            wh[k] = params.register(Parameter::new(
                format!("{prefix}.wh_{gate}"),
                init.conv_kernels(c_out, c_out, 3),
            ));
            // forget-gate bias starts at 1 so early gradients flow
            let bias = if *gate == "f" {
                Tensor::full(vec![c_out], 1.0)
            } else {
                Tensor::zeros(vec![c_out])
            };
            b[k] = params.register(Parameter::new(format!("{prefix}.b_{gate}"), bias));
        }
        CellParams { wx, wh, b }
    }

    fn bind(&self, ids: &[ValueId]) -> CellGateIds {
        CellGateIds {
            wx: self.wx.map(|i| ids[i]),
            wh: self.wh.map(|i| ids[i]),
            b: self.b.map(|i| ids[i]),
        }
    }
}

/// Three-stage ConvLSTM forecaster.
///
/// Per timestep: stage 1 at full resolution, 2x2 max-pool, stage 2 at
/// half resolution, another pool, stage 3 at quarter resolution, SELU
/// after each stage output. Without attention the last timestep's
/// stage-3 features feed the upsampling head; with attention the
/// per-timestep features are softmax-pooled first. With a symmetric
/// scaling mode the head ends in tanh, making this the adversarial
/// generator.
pub struct ConvLstmModel {
    cfg: ModelConfig,
    attention: bool,
    params: ParamSet,
    cells: [CellParams; 3],
    attn_w: usize,
    attn_b: usize,
    head: HeadParams,
}

impl ConvLstmModel {
    pub fn new(cfg: ModelConfig, attention: bool, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let [c1, c2, c3] = cfg.stack_channels;
        let mut params = ParamSet::new();
        let mut init = Initializer::new(seed);
        let cells = [
            CellParams::init(&mut params, &mut init, "stage1", 1, c1),
            CellParams::init(&mut params, &mut init, "stage2", c1, c2),
            CellParams::init(&mut params, &mut init, "stage3", c2, c3),
        ];
        let attn_w = params.register(Parameter::new("attention.w", init.dense_weights(1, c3)));
        let attn_b = params.register(Parameter::new("attention.b", Tensor::zeros(vec![1])));
        let head = HeadParams::init(&mut params, &mut init, "head", cfg.stack_channels);
        Ok(ConvLstmModel {
            cfg,
            attention,
            params,
            cells,
            attn_w,
            attn_b,
            head,
        })
    }

    /// Stage-3 feature maps per timestep, `[c3, H/4, W/4]` each.
    fn timestep_features(
        &self,
        g: &mut Graph,
        input: ValueId,
        ids: &[ValueId],
    ) -> Result<Vec<ValueId>> {
        let (h, w) = (self.cfg.height, self.cfg.width);
        let [c1, c2, c3] = self.cfg.stack_channels;
        let mut state = [
            (g.leaf(Tensor::zeros(vec![c1, h, w])), g.leaf(Tensor::zeros(vec![c1, h, w]))),
            (
                g.leaf(Tensor::zeros(vec![c2, h / 2, w / 2])),
                g.leaf(Tensor::zeros(vec![c2, h / 2, w / 2])),
            ),
            (
                g.leaf(Tensor::zeros(vec![c3, h / 4, w / 4])),
                g.leaf(Tensor::zeros(vec![c3, h / 4, w / 4])),
            ),
        ];
        let gates: Vec<CellGateIds> = self.cells.iter().map(|c| c.bind(ids)).collect();
        let mut features = Vec::with_capacity(self.cfg.n);
        for t in 0..self.cfg.n {
            let x_t = g.select_frame(input, t)?;

            let (h1, c1s) = convlstm_cell_step(g, x_t, state[0].0, state[0].1, &gates[0])?;
            state[0] = (h1, c1s);
            let f1 = g.selu(h1);
            let p1 = g.max_pool2d(f1)?;

            let (h2, c2s) = convlstm_cell_step(g, p1, state[1].0, state[1].1, &gates[1])?;
            state[1] = (h2, c2s);
            let f2 = g.selu(h2);
            let p2 = g.max_pool2d(f2)?;

            let (h3, c3s) = convlstm_cell_step(g, p2, state[2].0, state[2].1, &gates[2])?;
            state[2] = (h3, c3s);
            features.push(g.selu(h3));
        }
        Ok(features)
    }
}

impl Forecaster for ConvLstmModel {
    fn kind(&self) -> ModelKind {
        if self.attention {
            ModelKind::AttConvlstm
        } else {
            ModelKind::Convlstm
        }
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
        let features = self.timestep_features(g, input, ids)?;
        let pooled = if self.attention {
            attention_pool(g, &features, ids[self.attn_w], ids[self.attn_b])?
        } else {
            *features.last().expect("n >= 2")
        };
        self.head.apply(g, ids, pooled, self.cfg.mode)
    }
}
