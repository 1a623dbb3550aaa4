//! Trainable parameters, RMSProp updates, and seeded initialization.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, Tensor, ValueId};
use crate::error::{Error, Result};

/// A named trainable tensor with its gradient accumulator and the
/// RMSProp second-moment accumulator. All three share one shape.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub acc: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let shape = value.shape().to_vec();
        Parameter {
            name: name.into(),
            value,
            grad: Tensor::zeros(shape.clone()),
            acc: Tensor::zeros(shape),
        }
    }
}

/// RMSProp hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub rho: f64,
    pub eps: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            learning_rate: 0.00005,
            rho: 0.9,
            eps: 1e-8,
        }
    }
}

impl RmsPropConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("rmsprop learning_rate must be > 0"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::config("rmsprop rho must be in (0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::config("rmsprop eps must be > 0"));
        }
        Ok(())
    }
}

/// One RMSProp update:
/// `acc <- rho*acc + (1-rho)*g^2; value <- value - lr*g/(sqrt(acc)+eps)`.
/// The gradient is zeroed afterwards. A non-finite gradient aborts the
/// step, naming the offending parameter.
pub fn rmsprop_step(param: &mut Parameter, cfg: &RmsPropConfig) -> Result<()> {
    cfg.validate()?;
    if !param.grad.all_finite() {
        return Err(Error::numerical(format!(
            "non-finite gradient for parameter '{}'",
            param.name
        )));
    }
    let grad = param.grad.data_mut();
    let acc = param.acc.data_mut();
    let value = param.value.data_mut();
    for i in 0..grad.len() {
        let g = grad[i];
        acc[i] = cfg.rho * acc[i] + (1.0 - cfg.rho) * g * g;
        value[i] -= cfg.learning_rate * g / (acc[i].sqrt() + cfg.eps);
        grad[i] = 0.0;
    }
    Ok(())
}

/// Clamp every parameter value into `[-c, c]` (Lipschitz enforcement
/// for the critic). Idempotent.
pub fn clip_weights(params: &mut ParamSet, c: f64) {
    for p in params.iter_mut() {
        for v in p.value.data_mut() {
            *v = v.clamp(-c, c);
        }
    }
}

/// Ordered collection of parameters. Order is the registration order,
/// which fixes checkpoint layout and gradient reduction order.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet { params: Vec::new() }
    }

    /// Append a parameter and return its index.
    pub fn register(&mut self, param: Parameter) -> usize {
        self.params.push(param);
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Parameter {
        &self.params[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Parameter {
        &mut self.params[idx]
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> std::slice::IterMut<'_, Parameter> {
        self.params.iter_mut()
    }

    /// Bind every parameter value as a graph leaf, in registration order.
    pub fn bind(&self, g: &mut Graph) -> Vec<ValueId> {
        self.params
            .iter()
            .map(|p| g.leaf(p.value.clone()))
            .collect()
    }

    /// Accumulate `scale * grads[i]` into each parameter's gradient.
    pub fn accumulate_grads(&mut self, ids: &[ValueId], grads: &super::graph::Grads, scale: f64) {
        for (p, &id) in self.params.iter_mut().zip(ids) {
            let src = grads.get(id).data();
            let dst = p.grad.data_mut();
            for i in 0..dst.len() {
                dst[i] += scale * src[i];
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            for v in p.grad.data_mut() {
                *v = 0.0;
            }
        }
    }

    /// RMSProp step over every parameter, then zero gradients. Values
    /// are re-checked for finiteness after the step.
    pub fn step_all(&mut self, cfg: &RmsPropConfig) -> Result<()> {
        for p in &mut self.params {
            rmsprop_step(p, cfg)?;
            if !p.value.all_finite() {
                return Err(Error::numerical(format!(
                    "parameter '{}' became non-finite after update",
                    p.name
                )));
            }
        }
        Ok(())
    }

    pub fn total_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Largest absolute value over all parameters. Zero when empty.
    pub fn max_abs_value(&self) -> f64 {
        self.params
            .iter()
            .flat_map(|p| p.value.iter())
            .fold(0.0_f64, |m, &v| m.max(v.abs()))
    }
}

/// Deterministic weight initializer backed by a seeded ChaCha stream.
///
/// Conv and dense weights draw uniformly from
/// `[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]`; biases are
/// zero unless explicitly set (the ConvLSTM forget gate uses 1.0).
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Initializer {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform_glorot(&mut self, shape: Vec<usize>, fan_in: usize, fan_out: usize) -> Tensor {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let len: usize = shape.iter().product();
        let data: Vec<f64> = (0..len)
            .map(|_| self.rng.gen_range(-bound..=bound))
            .collect();
        Tensor::from_op(shape, data)
    }

    /// Conv kernels `[C_out, C_in, k, k]` with fans `C_in*k*k` / `C_out*k*k`.
    pub fn conv_kernels(&mut self, c_out: usize, c_in: usize, k: usize) -> Tensor {
        self.uniform_glorot(vec![c_out, c_in, k, k], c_in * k * k, c_out * k * k)
    }

    /// Dense weights `[p, m]` with fans `m` / `p`.
    pub fn dense_weights(&mut self, p: usize, m: usize) -> Tensor {
        self.uniform_glorot(vec![p, m], m, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmsprop_zero_gradient_leaves_value_fixed_and_decays_acc() {
        let mut p = Parameter::new("w", Tensor::new(vec![2], vec![1.0, -2.0]).unwrap());
        p.acc = Tensor::new(vec![2], vec![0.5, 0.5]).unwrap();
        let cfg = RmsPropConfig {
            learning_rate: 0.1,
            rho: 0.9,
            eps: 1e-8,
        };
        rmsprop_step(&mut p, &cfg).unwrap();
        assert_eq!(p.value.data(), &[1.0, -2.0]);
        assert!((p.acc.data()[0] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn rmsprop_single_step_arithmetic() {
        // fresh acc, g=1, rho=0.9, lr=0.1, eps ~ 0:
        // acc = 0.1, delta = -0.1/sqrt(0.1)
        let mut p = Parameter::new("w", Tensor::new(vec![1], vec![0.0]).unwrap());
        p.grad = Tensor::new(vec![1], vec![1.0]).unwrap();
        let cfg = RmsPropConfig {
            learning_rate: 0.1,
            rho: 0.9,
            eps: 1e-300,
        };
        rmsprop_step(&mut p, &cfg).unwrap();
        assert!((p.acc.data()[0] - 0.1).abs() < 1e-15);
        let expect = -0.1 / 0.1_f64.sqrt();
        assert!((p.value.data()[0] - expect).abs() < 1e-9);
        assert!((p.value.data()[0] - (-0.31623)).abs() < 1e-5);
        assert_eq!(p.grad.data()[0], 0.0);
    }

    #[test]
    fn rmsprop_step_size_approaches_lr_under_constant_gradient() {
        let mut p = Parameter::new("w", Tensor::new(vec![1], vec![0.0]).unwrap());
        let cfg = RmsPropConfig {
            learning_rate: 0.01,
            rho: 0.9,
            eps: 1e-12,
        };
        let mut prev = 0.0;
        let mut delta = 0.0;
        for _ in 0..400 {
            p.grad = Tensor::new(vec![1], vec![2.0]).unwrap();
            rmsprop_step(&mut p, &cfg).unwrap();
            delta = (p.value.data()[0] - prev).abs();
            prev = p.value.data()[0];
        }
        // as acc -> g^2, |delta| -> lr
        assert!((delta - cfg.learning_rate).abs() < 1e-4, "delta={delta}");
    }

    #[test]
    fn rmsprop_rejects_non_finite_gradient_with_name() {
        let mut p = Parameter::new("stage1.wx", Tensor::zeros(vec![1]));
        p.grad.data_mut()[0] = f64::NAN;
        let err = rmsprop_step(&mut p, &RmsPropConfig::default()).unwrap_err();
        assert!(err.to_string().contains("stage1.wx"));
    }

    #[test]
    fn clip_weights_clamps_and_is_idempotent() {
        let mut set = ParamSet::new();
        set.register(Parameter::new(
            "a",
            Tensor::new(vec![3], vec![5.0, -0.005, -3.0]).unwrap(),
        ));
        clip_weights(&mut set, 0.01);
        assert_eq!(set.get(0).value.data(), &[0.01, -0.005, -0.01]);
        assert!(set.max_abs_value() <= 0.01);
        let snapshot = set.get(0).value.clone();
        clip_weights(&mut set, 0.01);
        assert_eq!(set.get(0).value.data(), snapshot.data());
    }

    #[test]
    fn initializer_is_deterministic_and_bounded() {
        let mut a = Initializer::new(7);
        let mut b = Initializer::new(7);
        let ta = a.conv_kernels(4, 2, 3);
        let tb = b.conv_kernels(4, 2, 3);
        assert_eq!(ta.data(), tb.data());
        let bound = (6.0_f64 / (2.0 * 9.0 + 4.0 * 9.0)).sqrt();
        assert!(ta.iter().all(|v| v.abs() <= bound));

        let mut c = Initializer::new(8);
        assert_ne!(c.conv_kernels(4, 2, 3).data(), ta.data());
    }
}
