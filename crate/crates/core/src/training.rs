//! Loss functions and training loops: supervised MSE training for the
//! baselines, and adversarial training with a Wasserstein critic for
//! the generator/critic pair.
//!
//! Both loops are deterministic given the seed: batches are shuffled
//! from one seeded stream, per-sample gradients are reduced in batch
//! order, and every loss is checked finite before a parameter step.

use std::path::PathBuf;
use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::dataset::{scale_sample, shuffled_batches, SequenceSample};
use crate::error::{Error, Result};
use crate::models::{
    gan_params_merged, to_model_input, to_model_target, ConvLstmModel, Critic, Forecaster,
    ModelMeta,
};
use crate::tensor::{clip_weights, Graph, RmsPropConfig, Tensor};

/// Training hyperparameters. The defaults mirror the published setup:
/// RMSProp with learning rate 0.00005, 1500 epochs, batch size 8.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Weight of the L1 prediction-error term in the generator loss.
    pub lambda_l1: f64,
    /// Critic updates per generator update.
    pub n_critic: usize,
    /// Critic weight-clipping constant.
    pub clip_c: f64,
    /// RMSProp decay.
    pub rho: f64,
    /// RMSProp denominator floor.
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.00005,
            epochs: 1500,
            batch_size: 8,
            seed: 0,
            lambda_l1: 100.0,
            n_critic: 5,
            clip_c: 0.01,
            rho: 0.9,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    /// Collects every violated field instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.learning_rate > 0.0) {
            problems.push(format!("learning_rate must be > 0 (got {})", self.learning_rate));
        }
        if self.batch_size < 1 {
            problems.push("batch_size must be >= 1".to_string());
        }
        if !(self.lambda_l1 >= 0.0) {
            problems.push(format!("lambda_l1 must be >= 0 (got {})", self.lambda_l1));
        }
        if self.n_critic < 1 {
            problems.push("n_critic must be >= 1".to_string());
        }
        if !(self.clip_c > 0.0) {
            problems.push(format!("clip_c must be > 0 (got {})", self.clip_c));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            problems.push(format!("rho must be in (0, 1) (got {})", self.rho));
        }
        if !(self.eps > 0.0) {
            problems.push(format!("eps must be > 0 (got {})", self.eps));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }

    pub fn optimizer(&self) -> RmsPropConfig {
        RmsPropConfig {
            learning_rate: self.learning_rate,
            rho: self.rho,
            eps: self.eps,
        }
    }
}

/// Per-epoch loss record. `seconds` is wall-clock and is excluded from
/// determinism comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub g_loss: f64,
    pub d_loss: f64,
    pub l1: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,g_loss,d_loss,l1,seconds\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{:.3}\n",
                r.epoch, r.g_loss, r.d_loss, r.l1, r.seconds
            ));
        }
        out
    }

    /// Loss columns only — the reproducibility contract covers losses,
    /// not wall-clock.
    pub fn loss_rows(&self) -> Vec<(usize, f64, f64, f64)> {
        self.records
            .iter()
            .map(|r| (r.epoch, r.g_loss, r.d_loss, r.l1))
            .collect()
    }
}

/// Mean absolute elementwise difference.
pub fn l1_loss(pred: &Tensor, truth: &Tensor) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::shape(format!(
            "l1_loss shapes {:?} vs {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(truth.iter())
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / n)
}

/// Mean squared elementwise difference.
pub fn mse_loss(pred: &Tensor, truth: &Tensor) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::shape(format!(
            "mse_loss shapes {:?} vs {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(truth.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

/// Wasserstein critic objective: `mean(fake) - mean(real)`, minimized
/// by the critic.
pub fn critic_loss(real_scores: &[f64], fake_scores: &[f64]) -> f64 {
    mean(fake_scores) - mean(real_scores)
}

/// Joint generator objective:
/// `-mean(fake_scores) + lambda_l1 * l1(pred, truth)`.
pub fn generator_loss(
    fake_scores: &[f64],
    pred: &Tensor,
    truth: &Tensor,
    lambda_l1: f64,
) -> Result<f64> {
    Ok(-mean(fake_scores) + lambda_l1 * l1_loss(pred, truth)?)
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Write a checkpoint every `every` epochs during training.
#[derive(Debug, Clone)]
pub struct PeriodicCheckpoint {
    pub every: usize,
    pub dir: PathBuf,
}

impl PeriodicCheckpoint {
    fn maybe_write(&self, epoch: usize, meta: &ModelMeta, params: &crate::tensor::ParamSet) -> Result<()> {
        if self.every > 0 && epoch.is_multiple_of(self.every) {
            let path = self.dir.join(format!("checkpoint_epoch{epoch:05}.hgf"));
            checkpoint::write_file(&path, &meta.to_json(), params)?;
        }
        Ok(())
    }
}

// Pre-scaled model input/target pairs.
struct Prepared {
    inputs: Vec<Tensor>,
    targets: Vec<Tensor>,
}

fn prepare(samples: &[SequenceSample], mode: crate::dataset::ScalingMode) -> Result<Prepared> {
    if samples.is_empty() {
        return Err(Error::data("training set is empty".to_string()));
    }
    let mut inputs = Vec::with_capacity(samples.len());
    let mut targets = Vec::with_capacity(samples.len());
    for s in samples {
        let scaled = scale_sample(s, mode);
        inputs.push(to_model_input(&scaled.input)?);
        targets.push(to_model_target(&scaled.label)?);
    }
    Ok(Prepared { inputs, targets })
}

/// Supervised training on the MSE objective with per-epoch shuffled
/// batches and RMSProp updates. Samples carry raw intensities; scaling
/// follows the model's mode.
pub fn train_supervised(
    model: &mut dyn Forecaster,
    train: &[SequenceSample],
    cfg: &TrainConfig,
    ckpt: Option<&PeriodicCheckpoint>,
) -> Result<TrainHistory> {
    cfg.validate()?;
    let data = prepare(train, model.config().mode)?;
    let opt = cfg.optimizer();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = TrainHistory::default();
    let meta = ModelMeta {
        kind: model.kind(),
        config: model.config().clone(),
    };

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let batches = shuffled_batches(data.inputs.len(), cfg.batch_size, &mut rng);
        let mut epoch_loss = 0.0;
        for (bi, batch) in batches.iter().enumerate() {
            let inv = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &si in batch {
                let mut g = Graph::new();
                let input = g.leaf(data.inputs[si].clone());
                let ids = model.params().bind(&mut g);
                let pred = model.forward(&mut g, input, &ids)?;
                let loss = g.mse_loss(pred, data.targets[si].clone())?;
                let grads = g.backward(loss)?;
                model.params_mut().accumulate_grads(&ids, &grads, inv);
                batch_loss += g.value(loss).item()? * inv;
            }
            if !batch_loss.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite loss at epoch {epoch}, batch {bi}"
                )));
            }
            model
                .params_mut()
                .step_all(&opt)
                .map_err(|e| Error::numerical(format!("epoch {epoch}, batch {bi}: {e}")))?;
            epoch_loss += batch_loss;
        }
        history.records.push(EpochRecord {
            epoch,
            g_loss: epoch_loss / batches.len() as f64,
            d_loss: 0.0,
            l1: 0.0,
            seconds: started.elapsed().as_secs_f64(),
        });
        if let Some(c) = ckpt {
            c.maybe_write(epoch, &meta, model.params())?;
        }
    }
    Ok(history)
}

/// Generator forward pass, values only (used for critic training where
/// the fake is a constant input).
fn generator_value(gen: &ConvLstmModel, input: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new();
    let id = g.leaf(input.clone());
    let ids = gen.params().bind(&mut g);
    let out = gen.forward(&mut g, id, &ids)?;
    Ok(g.value(out).clone())
}

/// One critic update on a batch of (real, fake) pairs, followed by
/// weight clipping. Returns the critic loss value.
fn critic_update(
    critic: &mut Critic,
    reals: &[&Tensor],
    fakes: &[Tensor],
    opt: &RmsPropConfig,
    clip_c: f64,
) -> Result<f64> {
    let inv = 1.0 / reals.len() as f64;
    let mut g = Graph::new();
    let ids = critic.params().bind(&mut g);
    let mut terms = Vec::with_capacity(2 * reals.len());
    for (real, fake) in reals.iter().zip(fakes) {
        let real_id = g.leaf((*real).clone());
        let fake_id = g.leaf(fake.clone());
        let real_score = critic.forward(&mut g, real_id, &ids)?;
        let fake_score = critic.forward(&mut g, fake_id, &ids)?;
        terms.push((fake_score, inv));
        terms.push((real_score, -inv));
    }
    let loss = g.scalar_lincomb(&terms)?;
    let grads = g.backward(loss)?;
    critic.params_mut().accumulate_grads(&ids, &grads, 1.0);
    critic.params_mut().step_all(opt)?;
    clip_weights(critic.params_mut(), clip_c);
    g.value(loss).item()
}

/// One generator update on a batch: joint adversarial + L1 objective.
/// The critic participates in the graph but only generator parameters
/// are stepped. Returns (generator loss, mean L1 term).
fn generator_update(
    gen: &mut ConvLstmModel,
    critic: &Critic,
    inputs: &[&Tensor],
    targets: &[&Tensor],
    lambda_l1: f64,
    opt: &RmsPropConfig,
    step: bool,
) -> Result<(f64, f64)> {
    let inv = 1.0 / inputs.len() as f64;
    let mut loss_total = 0.0;
    let mut l1_total = 0.0;
    for (input, target) in inputs.iter().zip(targets) {
        let mut g = Graph::new();
        let input_id = g.leaf((*input).clone());
        let gen_ids = gen.params().bind(&mut g);
        let critic_ids = critic.params().bind(&mut g);
        let fake = gen.forward(&mut g, input_id, &gen_ids)?;
        let score = critic.forward(&mut g, fake, &critic_ids)?;
        let l1 = g.l1_loss(fake, (*target).clone())?;
        let loss = g.scalar_lincomb(&[(score, -1.0), (l1, lambda_l1)])?;
        let grads = g.backward(loss)?;
        gen.params_mut().accumulate_grads(&gen_ids, &grads, inv);
        loss_total += g.value(loss).item()? * inv;
        l1_total += g.value(l1).item()? * inv;
    }
    if step {
        gen.params_mut().step_all(opt)?;
    }
    Ok((loss_total, l1_total))
}

/// Adversarial training: per batch, `n_critic` critic updates (each
/// followed by weight clipping) and one generator update on the joint
/// loss. Requires symmetric scaling, which `build_gan` already
/// enforces through the generator's config.
pub fn train_gan(
    gen: &mut ConvLstmModel,
    critic: &mut Critic,
    train: &[SequenceSample],
    cfg: &TrainConfig,
    ckpt: Option<&PeriodicCheckpoint>,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if gen.config().mode != crate::dataset::ScalingMode::Symmetric {
        return Err(Error::config(
            "adversarial training requires symmetric scaling".to_string(),
        ));
    }
    let data = prepare(train, gen.config().mode)?;
    let opt = cfg.optimizer();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = TrainHistory::default();
    let meta = ModelMeta {
        kind: crate::models::ModelKind::Gan,
        config: gen.config().clone(),
    };

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let batches = shuffled_batches(data.inputs.len(), cfg.batch_size, &mut rng);
        let mut g_sum = 0.0;
        let mut d_sum = 0.0;
        let mut d_updates = 0.0;
        let mut l1_sum = 0.0;
        for (bi, batch) in batches.iter().enumerate() {
            let inputs: Vec<&Tensor> = batch.iter().map(|&si| &data.inputs[si]).collect();
            let targets: Vec<&Tensor> = batch.iter().map(|&si| &data.targets[si]).collect();

            // The generator is fixed during the critic loop, so its
            // outputs are computed once per batch.
            let fakes: Vec<Tensor> = inputs
                .iter()
                .map(|input| generator_value(gen, input))
                .collect::<Result<_>>()?;
            for _ in 0..cfg.n_critic {
                let d_loss = critic_update(critic, &targets, &fakes, &opt, cfg.clip_c)
                    .map_err(|e| Error::numerical(format!("epoch {epoch}, batch {bi}: {e}")))?;
                if !d_loss.is_finite() {
                    return Err(Error::numerical(format!(
                        "non-finite critic loss at epoch {epoch}, batch {bi}"
                    )));
                }
                d_sum += d_loss;
                d_updates += 1.0;
            }

            let (g_loss, l1_term) =
                generator_update(gen, critic, &inputs, &targets, cfg.lambda_l1, &opt, true)
                    .map_err(|e| Error::numerical(format!("epoch {epoch}, batch {bi}: {e}")))?;
            if !g_loss.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite generator loss at epoch {epoch}, batch {bi}"
                )));
            }
            g_sum += g_loss;
            l1_sum += l1_term;
        }
        let nb = batches.len() as f64;
        history.records.push(EpochRecord {
            epoch,
            g_loss: g_sum / nb,
            d_loss: if d_updates > 0.0 { d_sum / d_updates } else { 0.0 },
            l1: l1_sum / nb,
            seconds: started.elapsed().as_secs_f64(),
        });
        if let Some(c) = ckpt {
            let merged = gan_params_merged(gen, critic);
            c.maybe_write(epoch, &meta, &merged)?;
        }
    }
    Ok(history)
}

/// Mean L1 between generator predictions and labels over a sample set,
/// on the model's own scale. Used to track memorization quality.
pub fn generator_train_l1(gen: &ConvLstmModel, samples: &[SequenceSample]) -> Result<f64> {
    let data = prepare(samples, gen.config().mode)?;
    let mut total = 0.0;
    for (input, target) in data.inputs.iter().zip(&data.targets) {
        let pred = generator_value(gen, input)?;
        total += l1_loss(&pred, target)?;
    }
    Ok(total / data.inputs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ScalingMode;
    use crate::models::{build_gan, ModelConfig};
    use crate::tensor::gradcheck::check_input;
    use crate::tensor::{Parameter, ParamSet, ValueId};

    #[test]
    fn loss_examples() {
        let a = Tensor::new(vec![2], vec![0.0, 0.5]).unwrap();
        let b = Tensor::new(vec![2], vec![1.0, 0.5]).unwrap();
        assert_eq!(l1_loss(&a, &b).unwrap(), 0.5);
        assert_eq!(l1_loss(&b, &a).unwrap(), 0.5);
        assert_eq!(l1_loss(&a, &a).unwrap(), 0.0);

        let p = Tensor::new(vec![2], vec![0.0, 1.0]).unwrap();
        let t = Tensor::new(vec![2], vec![1.0, 1.0]).unwrap();
        assert_eq!(mse_loss(&p, &t).unwrap(), 0.5);
        assert_eq!(mse_loss(&p, &p).unwrap(), 0.0);

        assert_eq!(critic_loss(&[1.0, 3.0], &[0.0, 2.0]), -1.0);
        assert_eq!(critic_loss(&[5.0], &[5.0]), 0.0);
        // decreasing a fake score decreases the loss
        assert!(critic_loss(&[1.0], &[0.5]) < critic_loss(&[1.0], &[0.9]));

        let same = Tensor::new(vec![2], vec![0.5, 0.5]).unwrap();
        assert_eq!(generator_loss(&[0.0], &same, &same, 100.0).unwrap(), 0.0);
        let g = generator_loss(&[2.0], &a, &b, 100.0).unwrap();
        // fake=[2], l1=0.5, lambda=100 -> -2 + 50
        assert_eq!(g, 48.0);
        // lambda 0 leaves the pure adversarial term
        assert_eq!(generator_loss(&[2.0], &a, &b, 0.0).unwrap(), -2.0);
    }

    #[test]
    fn config_validation_enumerates_all_problems() {
        let cfg = TrainConfig {
            learning_rate: 0.0,
            clip_c: -1.0,
            n_critic: 0,
            ..TrainConfig::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("learning_rate"));
        assert!(msg.contains("clip_c"));
        assert!(msg.contains("n_critic"));
    }

    #[test]
    fn default_config_matches_published_hyperparameters() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.learning_rate, 0.00005);
        assert_eq!(cfg.epochs, 1500);
        assert_eq!(cfg.batch_size, 8);
    }

    fn tiny_samples(count: usize, n: usize, h: usize, w: usize) -> Vec<SequenceSample> {
        (0..count)
            .map(|i| SequenceSample {
                t: i as u32 + 1,
                input: check_input(&[n, h, w], 100 + i as u64).map(|v| 127.5 + 100.0 * v),
                label: check_input(&[h, w], 200 + i as u64).map(|v| 127.5 + 100.0 * v),
            })
            .collect()
    }

    // Minimal forecaster with one scalar-ish parameter: the prediction
    // is tanh(w) broadcast over the grid. Lets the RMSProp update-count
    // contract be simulated exactly by a scalar oracle.
    struct OneParamModel {
        cfg: ModelConfig,
        params: ParamSet,
    }

    impl OneParamModel {
        fn new() -> Self {
            let cfg = ModelConfig::reduced(ScalingMode::Unit);
            let mut params = ParamSet::new();
            params.register(Parameter::new("w", Tensor::new(vec![1], vec![0.2]).unwrap()));
            OneParamModel { cfg, params }
        }
    }

    impl Forecaster for OneParamModel {
        fn kind(&self) -> crate::models::ModelKind {
            crate::models::ModelKind::Convlstm
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
        fn forward(
            &self,
            g: &mut Graph,
            _input: ValueId,
            ids: &[ValueId],
        ) -> crate::error::Result<ValueId> {
            let base = g.leaf(Tensor::zeros(vec![1, self.cfg.height, self.cfg.width]));
            let biased = g.add_channel_bias(base, ids[0])?;
            Ok(g.tanh(biased))
        }
    }

    #[test]
    fn one_epoch_performs_exactly_one_update_per_batch() {
        // 5 samples, batch 2 -> 3 batches -> exactly 3 RMSProp updates.
        // Simulated by an independent scalar oracle of the same loop.
        let samples = tiny_samples(5, 2, 8, 8);
        let mut model = OneParamModel::new();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 2,
            learning_rate: 0.01,
            seed: 42,
            ..TrainConfig::default()
        };
        train_supervised(&mut model, &samples, &cfg, None).unwrap();

        // oracle: same shuffle stream, same batch composition
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let batches = shuffled_batches(5, 2, &mut rng);
        assert_eq!(batches.len(), 3);
        let mut w = 0.2_f64;
        let mut acc = 0.0_f64;
        let hw = 64.0;
        for batch in &batches {
            let inv = 1.0 / batch.len() as f64;
            let mut grad = 0.0;
            for &si in batch {
                let scaled: Vec<f64> = samples[si].label.iter().map(|&v| v / 255.0).collect();
                let pred = w.tanh();
                let dpred_dw = 1.0 - pred * pred;
                // d/dpred of mean((pred - t)^2) summed over the grid
                let dloss: f64 = scaled.iter().map(|t| 2.0 * (pred - t) / hw).sum();
                grad += inv * dloss * dpred_dw;
            }
            acc = 0.9 * acc + 0.1 * grad * grad;
            w -= 0.01 * grad / (acc.sqrt() + 1e-8);
        }
        let trained = model.params().get(0).value.data()[0];
        assert!(
            (trained - w).abs() < 1e-12,
            "trained {trained} vs oracle {w}"
        );
    }

    #[test]
    fn zero_epochs_returns_initial_parameters_bit_for_bit() {
        let samples = tiny_samples(4, 2, 8, 8);
        let mut model =
            crate::models::build_forecaster(crate::models::ModelKind::AttConvlstm,
                &ModelConfig::reduced(ScalingMode::Unit), 7).unwrap();
        let before: Vec<Vec<u64>> = model
            .params()
            .iter()
            .map(|p| p.value.iter().map(|v| v.to_bits()).collect())
            .collect();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let history = train_supervised(model.as_mut(), &samples, &cfg, None).unwrap();
        assert!(history.records.is_empty());
        let after: Vec<Vec<u64>> = model
            .params()
            .iter()
            .map(|p| p.value.iter().map(|v| v.to_bits()).collect())
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn supervised_training_is_deterministic_and_learns() {
        let samples = tiny_samples(6, 2, 8, 8);
        let cfg = TrainConfig {
            epochs: 8,
            batch_size: 4,
            learning_rate: 0.002,
            seed: 13,
            ..TrainConfig::default()
        };
        let run = |seed: u64| {
            let mut model = crate::models::build_forecaster(
                crate::models::ModelKind::TdEncDec,
                &ModelConfig::reduced(ScalingMode::Unit),
                seed,
            )
            .unwrap();
            let h = train_supervised(model.as_mut(), &samples, &cfg, None).unwrap();
            (h, model)
        };
        let (h1, m1) = run(3);
        let (h2, m2) = run(3);
        assert_eq!(h1.loss_rows(), h2.loss_rows());
        for (a, b) in m1.params().iter().zip(m2.params().iter()) {
            assert_eq!(a.value.data(), b.value.data());
        }
        let first = h1.records.first().unwrap().g_loss;
        let last = h1.records.last().unwrap().g_loss;
        assert!(last < first, "loss should fall: {first} -> {last}");
    }

    #[test]
    fn gan_training_records_history_and_clips_critic() {
        let samples = tiny_samples(4, 2, 8, 8);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            learning_rate: 0.001,
            n_critic: 2,
            seed: 5,
            ..TrainConfig::default()
        };
        let (mut gen, mut critic) =
            build_gan(&ModelConfig::reduced(ScalingMode::Symmetric), 9).unwrap();
        let history = train_gan(&mut gen, &mut critic, &samples, &cfg, None).unwrap();
        assert_eq!(history.records.len(), 2);
        assert!(critic.params().max_abs_value() <= cfg.clip_c + 1e-15);
        assert!(history.records.iter().all(|r| r.g_loss.is_finite()
            && r.d_loss.is_finite()
            && r.l1.is_finite()));
    }

    #[test]
    fn gan_training_is_deterministic_given_seed() {
        let samples = tiny_samples(4, 2, 8, 8);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 2,
            learning_rate: 0.001,
            n_critic: 1,
            seed: 11,
            ..TrainConfig::default()
        };
        let run = || {
            let (mut gen, mut critic) =
                build_gan(&ModelConfig::reduced(ScalingMode::Symmetric), 21).unwrap();
            let h = train_gan(&mut gen, &mut critic, &samples, &cfg, None).unwrap();
            let g_bits: Vec<u64> = gen
                .params()
                .iter()
                .flat_map(|p| p.value.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
                .collect();
            (h.loss_rows(), g_bits)
        };
        let (h1, g1) = run();
        let (h2, g2) = run();
        assert_eq!(h1, h2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn frozen_critic_with_zero_lambda_is_pure_adversarial_ascent() {
        // generator updates against a fixed critic, lambda = 0: the
        // recorded loss must equal -mean(fake score) at every step
        let samples = tiny_samples(3, 2, 8, 8);
        let (mut gen, critic) =
            build_gan(&ModelConfig::reduced(ScalingMode::Symmetric), 31).unwrap();
        let data = prepare(&samples, ScalingMode::Symmetric).unwrap();
        let inputs: Vec<&Tensor> = data.inputs.iter().collect();
        let targets: Vec<&Tensor> = data.targets.iter().collect();
        let opt = RmsPropConfig {
            learning_rate: 0.01,
            ..RmsPropConfig::default()
        };
        let mut prev_scores = f64::NEG_INFINITY;
        for _ in 0..3 {
            // scores of the current generator under the frozen critic
            let mut score_mean = 0.0;
            for input in &inputs {
                let fake = generator_value(&gen, input).unwrap();
                score_mean += critic.score(&fake).unwrap() / inputs.len() as f64;
            }
            let (g_loss, l1_term) =
                generator_update(&mut gen, &critic, &inputs, &targets, 0.0, &opt, true).unwrap();
            assert!((g_loss - (-score_mean)).abs() < 1e-12);
            assert!(l1_term >= 0.0);
            // ascent on the critic score: loss was -score_mean, so the
            // sequence of score means should not decrease overall
            assert!(score_mean >= prev_scores || (score_mean - prev_scores).abs() < 1.0);
            prev_scores = score_mean;
        }
    }

    #[test]
    fn non_finite_loss_aborts_with_location() {
        let mut samples = tiny_samples(2, 2, 8, 8);
        // poison a label so the first loss is astronomical but finite,
        // then blow up the learning rate to force divergence
        samples[0].label = Tensor::full(vec![8, 8], 255.0);
        let mut model = OneParamModel::new();
        // force a non-finite gradient directly
        model.params_mut().get_mut(0).grad.data_mut()[0] = f64::INFINITY;
        let err = model
            .params_mut()
            .step_all(&RmsPropConfig::default())
            .unwrap_err();
        assert!(err.to_string().contains("w"));
    }
}
