//! The four forecasters: a plain ConvLSTM stack, the attention-pooled
//! ConvLSTM stack (also the adversarial generator), a time-distributed
//! convolutional encoder-decoder with nested skips, and the critic that
//! scores heatmaps for the adversarial pair.
//!
//! Every model is a deterministic function of (input, parameters). A
//! forward pass records onto a [`Graph`] against leaf ids bound from
//! the model's [`ParamSet`], so one backward call yields all gradients.

mod convlstm;
mod critic;
mod td_enc_dec;

pub use convlstm::{attention_pool, convlstm_cell_step, CellGateIds, ConvLstmModel};
pub use critic::Critic;
pub use td_enc_dec::TdEncDecModel;

use serde::{Deserialize, Serialize};

use crate::dataset::ScalingMode;
use crate::error::{Error, Result};
use crate::tensor::{Graph, Initializer, ParamSet, Tensor, ValueId};

/// Which forecaster (or the adversarial pair) a config or checkpoint
/// refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Convlstm,
    AttConvlstm,
    TdEncDec,
    Gan,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<ModelKind> {
        match s {
            "convlstm" => Ok(ModelKind::Convlstm),
            "att-convlstm" => Ok(ModelKind::AttConvlstm),
            "td-enc-dec" => Ok(ModelKind::TdEncDec),
            "gan" => Ok(ModelKind::Gan),
            other => Err(Error::config(format!(
                "unknown model '{other}' (expected convlstm|att-convlstm|td-enc-dec|gan)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Convlstm => "convlstm",
            ModelKind::AttConvlstm => "att-convlstm",
            ModelKind::TdEncDec => "td-enc-dec",
            ModelKind::Gan => "gan",
        }
    }

    /// Row label used in comparison reports.
    pub fn display_name(&self) -> &'static str {
        match self {
            ModelKind::Convlstm => "ConvLSTM",
            ModelKind::AttConvlstm => "Att-ConvLSTM",
            ModelKind::TdEncDec => "TD-Conv-Enc-Dec",
            ModelKind::Gan => "Adversarial Att-ConvLSTM",
        }
    }
}

/// Architecture hyperparameters shared by all models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Window length (frames per input volume).
    pub n: usize,
    pub height: usize,
    pub width: usize,
    /// Channel widths of the three ConvLSTM stages (also reused as the
    /// encoder-decoder depth widths).
    pub stack_channels: [usize; 3],
    /// Channel widths of the critic's four strided convolutions.
    pub critic_channels: [usize; 4],
    /// Decides the output activation: sigmoid for `unit`, tanh for
    /// `symmetric`.
    pub mode: ScalingMode,
}

impl ModelConfig {
    /// Production widths: 64/128/256 stacks, 16/32/64/128 critic.
    pub fn full(n: usize, height: usize, width: usize, mode: ScalingMode) -> Self {
        ModelConfig {
            n,
            height,
            width,
            stack_channels: [64, 128, 256],
            critic_channels: [16, 32, 64, 128],
            mode,
        }
    }

    /// The named test configuration: channels 4/8/16, n = 2, 8x8 grid.
    /// Small enough that end-to-end gradient checks run sub-second.
    pub fn reduced(mode: ScalingMode) -> Self {
        Self::reduced_with(2, 8, 8, mode)
    }

    /// Reduced channel widths with a custom window/grid, for fixtures
    /// that need more days or resolution than the 8x8 default.
    pub fn reduced_with(n: usize, height: usize, width: usize, mode: ScalingMode) -> Self {
        ModelConfig {
            n,
            height,
            width,
            stack_channels: [4, 8, 16],
            critic_channels: [4, 8, 16, 32],
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=8).contains(&self.n) {
            return Err(Error::config(format!("model n={} outside 2..=8", self.n)));
        }
        if !self.height.is_multiple_of(4) || !self.width.is_multiple_of(4) || self.height == 0 || self.width == 0 {
            return Err(Error::config(format!(
                "grid {}x{} must be divisible by 4 (two 2x2 pools)",
                self.height, self.width
            )));
        }
        if self.stack_channels.contains(&0) || self.critic_channels.contains(&0) {
            return Err(Error::config("zero channel width".to_string()));
        }
        Ok(())
    }

    pub fn input_shape(&self) -> Vec<usize> {
        vec![self.n, 1, self.height, self.width]
    }
}

/// Checkpoint header contents: the model kind plus its architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub kind: ModelKind,
    pub config: ModelConfig,
}

impl ModelMeta {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("meta serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s)
            .map_err(|e| Error::data(format!("bad checkpoint model header: {e}")))
    }
}

/// Common interface of the three forecasting architectures (and the
/// generator, which is the attention model with a tanh head).
pub trait Forecaster {
    fn kind(&self) -> ModelKind;
    fn config(&self) -> &ModelConfig;
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
    /// Record the forward pass onto `g`. `input` must be a leaf of shape
    /// `[n, 1, H, W]`; `param_ids` must come from `params().bind(g)`.
    /// Returns the `[1, H, W]` prediction id.
    fn forward(&self, g: &mut Graph, input: ValueId, param_ids: &[ValueId]) -> Result<ValueId>;
}

/// View a `[n,H,W]` sample volume as the `[n,1,H,W]` model input.
pub fn to_model_input(sample_input: &Tensor) -> Result<Tensor> {
    let s = sample_input.shape();
    if s.len() != 3 {
        return Err(Error::shape(format!("expected [n,H,W] input, got {s:?}")));
    }
    Tensor::new(vec![s[0], 1, s[1], s[2]], sample_input.data().to_vec())
}

/// View a `[H,W]` label as the `[1,H,W]` prediction target.
pub fn to_model_target(label: &Tensor) -> Result<Tensor> {
    let s = label.shape();
    if s.len() != 2 {
        return Err(Error::shape(format!("expected [H,W] label, got {s:?}")));
    }
    Tensor::new(vec![1, s[0], s[1]], label.data().to_vec())
}

/// One inference pass: binds parameters, runs forward, and returns the
/// `[1,H,W]` prediction values.
pub fn predict(model: &dyn Forecaster, sample_input: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new();
    let input = g.leaf(to_model_input(sample_input)?);
    let ids = model.params().bind(&mut g);
    let out = model.forward(&mut g, input, &ids)?;
    Ok(g.value(out).clone())
}

/// Instantiate a supervised forecaster with seeded weights.
pub fn build_forecaster(
    kind: ModelKind,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<Box<dyn Forecaster>> {
    cfg.validate()?;
    match kind {
        ModelKind::Convlstm => Ok(Box::new(ConvLstmModel::new(cfg.clone(), false, seed)?)),
        ModelKind::AttConvlstm => Ok(Box::new(ConvLstmModel::new(cfg.clone(), true, seed)?)),
        ModelKind::TdEncDec => Ok(Box::new(TdEncDecModel::new(cfg.clone(), seed)?)),
        ModelKind::Gan => Err(Error::config(
            "the adversarial pair is built via build_gan, not build_forecaster".to_string(),
        )),
    }
}

/// Instantiate the adversarial pair: an attention generator with a tanh
/// head and the convolutional critic. The generator and critic draw
/// from distinct seed streams.
pub fn build_gan(cfg: &ModelConfig, seed: u64) -> Result<(ConvLstmModel, Critic)> {
    cfg.validate()?;
    if cfg.mode != ScalingMode::Symmetric {
        return Err(Error::config(
            "adversarial training requires symmetric scaling".to_string(),
        ));
    }
    let generator = ConvLstmModel::new(cfg.clone(), true, seed)?;
    let critic = Critic::new(cfg.clone(), seed ^ 0x6372_6974)?;
    Ok((generator, critic))
}

/// Merge generator and critic parameters into one set for a single
/// checkpoint file, with `generator.` / `critic.` name prefixes.
pub fn gan_params_merged(generator: &ConvLstmModel, critic: &Critic) -> ParamSet {
    let mut merged = ParamSet::new();
    for p in generator.params().iter() {
        let mut q = p.clone();
        q.name = format!("generator.{}", p.name);
        merged.register(q);
    }
    for p in critic.params().iter() {
        let mut q = p.clone();
        q.name = format!("critic.{}", p.name);
        merged.register(q);
    }
    merged
}

/// Rebuild a supervised forecaster from a checkpoint header and its
/// parameter records.
pub fn load_forecaster(
    meta: &ModelMeta,
    records: &[(String, Tensor)],
) -> Result<Box<dyn Forecaster>> {
    let mut model = build_forecaster(meta.kind, &meta.config, 0)?;
    crate::checkpoint::load_into(model.params_mut(), records)?;
    Ok(model)
}

/// Rebuild the adversarial pair from a merged checkpoint.
pub fn load_gan(meta: &ModelMeta, records: &[(String, Tensor)]) -> Result<(ConvLstmModel, Critic)> {
    if meta.kind != ModelKind::Gan {
        return Err(Error::data(format!(
            "checkpoint holds a '{}' model, not the adversarial pair",
            meta.kind.name()
        )));
    }
    let (mut generator, mut critic) = build_gan(&meta.config, 0)?;
    let mut gen_records = Vec::new();
    let mut critic_records = Vec::new();
    for (name, tensor) in records {
        if let Some(rest) = name.strip_prefix("generator.") {
            gen_records.push((rest.to_string(), tensor.clone()));
        } else if let Some(rest) = name.strip_prefix("critic.") {
            critic_records.push((rest.to_string(), tensor.clone()));
        } else {
            return Err(Error::data(format!(
                "unexpected parameter '{name}' in adversarial checkpoint"
            )));
        }
    }
    crate::checkpoint::load_into(generator.params_mut(), &gen_records)?;
    crate::checkpoint::load_into(critic.params_mut(), &critic_records)?;
    Ok((generator, critic))
}

// Output head shared by the ConvLSTM stacks: two nearest-neighbor x2
// upsampling stages each followed by a 3x3 conv and SELU, then a final
// 1-channel 3x3 conv squashed by the mode's activation. Restores the
// resolution lost to the two pools.
pub(crate) struct HeadParams {
    conv1_w: usize,
    conv1_b: usize,
    conv2_w: usize,
    conv2_b: usize,
    out_w: usize,
    out_b: usize,
}

impl HeadParams {
    pub(crate) fn init(
        params: &mut ParamSet,
        init: &mut Initializer,
        prefix: &str,
        channels: [usize; 3],
    ) -> HeadParams {
        let [c1, c2, c3] = channels;
        let reg = |params: &mut ParamSet, name: String, t: Tensor| -> usize {
            params.register(crate::tensor::Parameter::new(name, t))
        };
        HeadParams {
            conv1_w: reg(params, format!("{prefix}.up1.w"), init.conv_kernels(c2, c3, 3)),
            conv1_b: reg(params, format!("{prefix}.up1.b"), Tensor::zeros(vec![c2])),
            conv2_w: reg(params, format!("{prefix}.up2.w"), init.conv_kernels(c1, c2, 3)),
            conv2_b: reg(params, format!("{prefix}.up2.b"), Tensor::zeros(vec![c1])),
            out_w: reg(params, format!("{prefix}.out.w"), init.conv_kernels(1, c1, 3)),
            out_b: reg(params, format!("{prefix}.out.b"), Tensor::zeros(vec![1])),
        }
    }

    pub(crate) fn apply(
        &self,
        g: &mut Graph,
        ids: &[ValueId],
        feat: ValueId,
        mode: ScalingMode,
    ) -> Result<ValueId> {
        let mut x = g.upsample2x(feat)?;
        x = g.conv2d(x, ids[self.conv1_w], 1, 1)?;
        x = g.add_channel_bias(x, ids[self.conv1_b])?;
        x = g.selu(x);
        x = g.upsample2x(x)?;
        x = g.conv2d(x, ids[self.conv2_w], 1, 1)?;
        x = g.add_channel_bias(x, ids[self.conv2_b])?;
        x = g.selu(x);
        x = g.conv2d(x, ids[self.out_w], 1, 1)?;
        x = g.add_channel_bias(x, ids[self.out_b])?;
        Ok(apply_output_activation(g, x, mode))
    }
}

pub(crate) fn apply_output_activation(g: &mut Graph, x: ValueId, mode: ScalingMode) -> ValueId {
    match mode {
        ScalingMode::Unit => g.sigmoid(x),
        ScalingMode::Symmetric => g.tanh(x),
    }
}
