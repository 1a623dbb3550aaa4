//! Dense 64-bit tensors and the differentiable operations built on them.
//!
//! Everything model-related in this crate is composed from the ops in
//! [`graph`]: a forward pass records nodes into a [`graph::Graph`], and
//! `Graph::backward` replays them in reverse with per-operation gradient
//! rules. [`Parameter`]s live outside the graph and are bound as leaves
//! for the duration of one forward/backward pass.

pub mod gradcheck;
pub mod graph;
pub mod param;

pub use gradcheck::grad_check;
pub use graph::{Graph, ValueId};
pub use param::{clip_weights, rmsprop_step, Initializer, Parameter, ParamSet, RmsPropConfig};

use crate::error::{Error, Result};

/// An N-dimensional array of `f64` in row-major order.
///
/// Shapes are immutable after construction. A scalar is represented as
/// shape `[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Build a tensor, rejecting shape/data mismatches and non-finite values.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if shape.contains(&0) {
            return Err(Error::shape(format!("zero extent in shape {shape:?}")));
        }
        if expect != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} implies {expect} elements, got {}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite value {bad} rejected at tensor construction"
            )));
        }
        Ok(Tensor { shape, data })
    }

    /// Construction without the finite check, for op outputs whose inputs
    /// were already validated. Shape/extent consistency is still enforced.
    pub(crate) fn from_op(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn full(shape: Vec<usize>, value: f64) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; len],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The sole element of a scalar tensor.
    pub fn item(&self) -> Result<f64> {
        if self.is_scalar() {
            Ok(self.data[0])
        } else {
            Err(Error::shape(format!(
                "item() on non-scalar shape {:?}",
                self.shape
            )))
        }
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise map into a new tensor.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_op(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    /// Row-major offset for a 2-D index. Debug-checked.
    pub fn at2(&self, r: usize, c: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[r * self.shape[1] + c]
    }

    /// Row-major offset for a 3-D index. Debug-checked.
    pub fn at3(&self, c: usize, h: usize, w: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 3);
        self.data[(c * self.shape[1] + h) * self.shape[2] + w]
    }
}

/// Exact shape equality check with a context label for error messages.
pub(crate) fn expect_same_shape(ctx: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "{ctx}: shape {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_shape_data_mismatch() {
        assert!(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Tensor::new(vec![2], vec![1.0, f64::NAN]).is_err());
        assert!(Tensor::new(vec![2], vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn rejects_zero_extent() {
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn scalar_item() {
        let t = Tensor::scalar(3.5);
        assert_eq!(t.item().unwrap(), 3.5);
        assert!(Tensor::zeros(vec![2]).item().is_err());
    }

    #[test]
    fn row_major_indexing() {
        let t = Tensor::new(vec![2, 3], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(t.at2(1, 2), 5.0);
        let u = Tensor::new(vec![2, 2, 2], (0..8).map(|v| v as f64).collect()).unwrap();
        assert_eq!(u.at3(1, 0, 1), 5.0);
    }
}
