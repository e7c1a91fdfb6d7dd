//! Finite-difference check of straight-through gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::net::{DenseNet, Targets};

/// Outcome of [`gradient_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    /// `‖g − g_fd‖ / ‖g_fd‖` at every probed parameter point.
    pub relative_errors: Vec<f64>,
    pub max_relative_error: f64,
}

/// Copy of `net` with every quantized activation replaced by its smooth function.
pub fn smooth_counterpart(net: &DenseNet) -> DenseNet {
    let mut smooth = net.clone();
    for layer in &mut smooth.layers {
        if let Activation::Quantized(spec) = &layer.activation {
            layer.activation = Activation::Smooth(spec.kind());
        }
    }
    smooth
}

/// Central-difference gradient of the smooth counterpart's loss.
pub fn finite_difference_gradient(
    net: &DenseNet,
    inputs: &[f64],
    targets: Targets<'_>,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let mut probe = smooth_counterpart(net);
    let theta = probe.parameters();
    let mut grad = Vec::with_capacity(theta.len());
    let mut params = theta.clone();
    for i in 0..theta.len() {
        params[i] = theta[i] + epsilon;
        probe.set_parameters(&params)?;
        let up = probe.loss(&probe.forward_train(inputs)?, targets)?;
        params[i] = theta[i] - epsilon;
        probe.set_parameters(&params)?;
        let down = probe.loss(&probe.forward_train(inputs)?, targets)?;
        params[i] = theta[i];
        grad.push((up - down) / (2.0 * epsilon));
    }
    Ok(grad)
}

/// Straight-through gradient of `net` against central differences of its
/// smooth counterpart, at `points` random perturbations of the parameters
/// (Gaussian, standard deviation `spread`).
pub fn gradient_check(
    net: &DenseNet,
    inputs: &[f64],
    targets: Targets<'_>,
    points: usize,
    spread: f64,
    seed: u64,
) -> Result<GradientCheck> {
    if net.input.is_some() {
        return Err(Error::InvalidArgument(
            "gradient check runs on raw inputs; drop the input quantizer".into(),
        ));
    }
    let noise = Normal::new(0.0, spread)
        .map_err(|e| Error::InvalidArgument(format!("bad perturbation spread: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = net.parameters();
    let mut probe = net.clone();
    let mut relative_errors = Vec::with_capacity(points);
    for _ in 0..points {
        let params: Vec<f64> = base.iter().map(|p| p + noise.sample(&mut rng)).collect();
        probe.set_parameters(&params)?;
        let (_, grads) = probe.backward(&probe.forward_train(inputs)?, targets)?;
        let g = grads.flatten();
        let fd = finite_difference_gradient(&probe, inputs, targets, 1e-5)?;
        let diff = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm = fd.iter().map(|b| b * b).sum::<f64>().sqrt();
        relative_errors.push(if norm == 0.0 { diff } else { diff / norm });
    }
    let max_relative_error = relative_errors.iter().copied().fold(0.0, f64::max);
    Ok(GradientCheck {
        relative_errors,
        max_relative_error,
    })
}
