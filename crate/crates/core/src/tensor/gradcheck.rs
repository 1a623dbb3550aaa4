//! Finite-difference verification of analytic gradients.

use super::{Graph, Tensor, ValueId};
use crate::error::Result;

/// Compare the analytic gradient of a scalar-valued computation against
/// central finite differences, coordinate by coordinate, over every
/// input tensor. Returns the worst relative discrepancy, where the
/// per-coordinate error is `|a - n| / max(1, |a| + |n|)` so near-zero
/// gradients are judged on absolute error.
///
/// `build` must construct the computation from leaf ids and return the
/// scalar output id. It is re-invoked on fresh graphs for the
/// perturbed evaluations, so it must be a pure function of its inputs.
pub fn grad_check<F>(build: F, inputs: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[ValueId]) -> Result<ValueId>,
{
    let mut g = Graph::new();
    let ids: Vec<ValueId> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let root = build(&mut g, &ids)?;
    let grads = g.backward(root)?;
    let analytic: Vec<Tensor> = ids.iter().map(|&id| grads.get(id).clone()).collect();

    let eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let ids: Vec<ValueId> = perturbed.iter().map(|t| g.leaf(t.clone())).collect();
        let root = build(&mut g, &ids)?;
        g.value(root).item()
    };

    let mut worst = 0.0_f64;
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (ti, input) in inputs.iter().enumerate() {
        for ci in 0..input.len() {
            let orig = input.data()[ci];
            work[ti].data_mut()[ci] = orig + eps;
            let plus = eval(&work)?;
            work[ti].data_mut()[ci] = orig - eps;
            let minus = eval(&work)?;
            work[ti].data_mut()[ci] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[ti].data()[ci];
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1.0);
            if err > worst {
                worst = err;
            }
        }
    }
    Ok(worst)
}

/// Like [`grad_check`], but probing at most `max_coords` coordinates
/// per input tensor (a deterministic sample). Full sweeps over every
/// weight of a whole model would cost one forward pass pair per
/// coordinate; sampling keeps end-to-end checks fast while still
/// touching every parameter tensor.
pub fn grad_check_sampled<F>(
    build: F,
    inputs: &[Tensor],
    eps: f64,
    max_coords: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&mut Graph, &[ValueId]) -> Result<ValueId>,
{
    use rand::seq::SliceRandom;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    let mut g = Graph::new();
    let ids: Vec<ValueId> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let root = build(&mut g, &ids)?;
    let grads = g.backward(root)?;
    let analytic: Vec<Tensor> = ids.iter().map(|&id| grads.get(id).clone()).collect();

    let eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let ids: Vec<ValueId> = perturbed.iter().map(|t| g.leaf(t.clone())).collect();
        let root = build(&mut g, &ids)?;
        g.value(root).item()
    };

    let mut worst = 0.0_f64;
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (ti, input) in inputs.iter().enumerate() {
        let mut coords: Vec<usize> = (0..input.len()).collect();
        coords.shuffle(&mut rng);
        coords.truncate(max_coords);
        coords.sort_unstable();
        for ci in coords {
            let orig = input.data()[ci];
            work[ti].data_mut()[ci] = orig + eps;
            let plus = eval(&work)?;
            work[ti].data_mut()[ci] = orig - eps;
            let minus = eval(&work)?;
            work[ti].data_mut()[ci] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[ti].data()[ci];
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1.0);
            if err > worst {
                worst = err;
            }
        }
    }
    Ok(worst)
}

/// Deterministic pseudo-random tensor for gradient-check fixtures.
pub fn check_input(shape: &[usize], seed: u64) -> Tensor {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let len: usize = shape.iter().product();
    let data: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    Tensor::from_op(shape.to_vec(), data)
}

/// Fixed projection coefficients used to scalarize tensor-valued ops
/// for checking; entries are bounded away from zero so every output
/// coordinate contributes.
pub fn projection(shape: &[usize], seed: u64) -> Tensor {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let len: usize = shape.iter().product();
    let data: Vec<f64> = (0..len)
        .map(|_| {
            let v: f64 = rng.gen_range(0.25..=1.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::from_op(shape.to_vec(), data)
}
