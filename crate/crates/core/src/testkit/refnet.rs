//! A shadow of the network forward pass in 64-bit arithmetic, plus central
//! finite differences on top of it.

use crate::nn::{Activation, Batch, LayerSpec, NetworkSpec, ParameterVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct RefPass {
    predictions: Vec<f64>,
    /// Pre-activation values of every ReLU layer (for kink-margin checks).
    relu_pre: Vec<f64>,
    /// Largest |activation| seen anywhere in the pass.
    max_abs_activation: f64,
}

/// Evaluates the network in `f64`, mirroring the documented engine contract:
/// zero same-padding stride-1 convolutions, step-major flattening, and
/// inverted dropout drawn as one `f32` per output element from a ChaCha
/// stream over `rng_seed` (kept when the draw is `>= rate`).
fn run(spec: &NetworkSpec, params: &[f64], batch: &Batch, training: bool, rng_seed: u64) -> RefPass {
    let dims = spec.layer_dims().expect("valid spec");
    let layout = spec.parameter_layout().expect("valid spec");
    assert_eq!(params.len(), layout.total_len());

    let n = batch.len();
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let mut relu_pre = Vec::new();
    let mut max_abs = 0.0f64;

    let mut current: Vec<f64> = batch.inputs().iter().map(|&v| v as f64).collect();
    for v in &current {
        max_abs = max_abs.max(v.abs());
    }

    for (layer_index, (layer, d)) in spec.layers().iter().zip(&dims).enumerate() {
        let (w_slot, b_slot) = layout.layer_slots(layer_index);
        let w = &params[w_slot.offset..w_slot.offset + w_slot.len];
        let bias = &params[b_slot.offset..b_slot.offset + b_slot.len];

        let out_features = d.out_features();
        let mut pre = vec![0.0f64; n * out_features];

        match *layer {
            LayerSpec::Conv1d { kernel_len, .. } => {
                let (t_len, c_in, o_len) = (d.in_steps, d.in_channels, d.out_channels);
                let pad = (kernel_len - 1) / 2;
                for b in 0..n {
                    for t in 0..t_len {
                        for o in 0..o_len {
                            let mut acc = bias[o];
                            for k in 0..kernel_len {
                                let ti = t as isize + k as isize - pad as isize;
                                if ti < 0 || ti >= t_len as isize {
                                    continue;
                                }
                                for c in 0..c_in {
                                    acc += w[(o * kernel_len + k) * c_in + c]
                                        * current[(b * t_len + ti as usize) * c_in + c];
                                }
                            }
                            pre[(b * t_len + t) * o_len + o] = acc;
                        }
                    }
                }
            }
            LayerSpec::Dense { .. } | LayerSpec::Output => {
                let (f_len, u_len) = (d.in_features(), d.out_channels);
                for b in 0..n {
                    for u in 0..u_len {
                        let mut acc = bias[u];
                        for f in 0..f_len {
                            acc += w[u * f_len + f] * current[b * f_len + f];
                        }
                        pre[b * u_len + u] = acc;
                    }
                }
            }
        }

        let activation = match *layer {
            LayerSpec::Conv1d { activation, .. } | LayerSpec::Dense { activation, .. } => {
                activation
            }
            LayerSpec::Output => Activation::Linear,
        };
        let mut out = pre.clone();
        if activation == Activation::ReLU {
            relu_pre.extend_from_slice(&pre);
            for v in &mut out {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }

        let rate = match *layer {
            LayerSpec::Conv1d { dropout, .. } | LayerSpec::Dense { dropout, .. } => dropout,
            LayerSpec::Output => 0.0,
        };
        if training && rate > 0.0 {
            let keep_scale = 1.0 / (1.0 - rate as f64);
            for v in &mut out {
                if rng.random::<f32>() >= rate {
                    *v *= keep_scale;
                } else {
                    *v = 0.0;
                }
            }
        }

        for v in &out {
            max_abs = max_abs.max(v.abs());
        }
        current = out;
    }

    RefPass {
        predictions: current,
        relu_pre,
        max_abs_activation: max_abs,
    }
}

/// 64-bit predictions for explicit parameter values.
pub fn reference_predictions(
    spec: &NetworkSpec,
    params: &[f64],
    batch: &Batch,
    training: bool,
    rng_seed: u64,
) -> Vec<f64> {
    run(spec, params, batch, training, rng_seed).predictions
}

/// 64-bit RMSE of the reference pass.
pub fn reference_rmse_loss(
    spec: &NetworkSpec,
    params: &[f64],
    batch: &Batch,
    training: bool,
    rng_seed: u64,
) -> f64 {
    let preds = reference_predictions(spec, params, batch, training, rng_seed);
    let sq: f64 = preds
        .iter()
        .zip(batch.targets())
        .map(|(p, t)| (p - *t as f64) * (p - *t as f64))
        .sum();
    (sq / batch.len() as f64).sqrt()
}

/// Central finite differences of the reference loss, one entry per
/// parameter coordinate.
pub fn finite_difference_gradient(
    spec: &NetworkSpec,
    params: &ParameterVector,
    batch: &Batch,
    training: bool,
    rng_seed: u64,
    h: f64,
) -> Vec<f64> {
    let base: Vec<f64> = params.values().iter().map(|&v| v as f64).collect();
    let mut grad = Vec::with_capacity(base.len());
    let mut probe = base.clone();
    for i in 0..base.len() {
        probe[i] = base[i] + h;
        let up = reference_rmse_loss(spec, &probe, batch, training, rng_seed);
        probe[i] = base[i] - h;
        let down = reference_rmse_loss(spec, &probe, batch, training, rng_seed);
        probe[i] = base[i];
        grad.push((up - down) / (2.0 * h));
    }
    grad
}

/// Smallest |pre-activation| over all ReLU units of the pass, together with
/// the largest |activation|. Used to skip finite-difference probes that
/// would step across a ReLU kink, where the loss is not differentiable.
pub fn relu_kink_margin(
    spec: &NetworkSpec,
    params: &[f64],
    batch: &Batch,
    training: bool,
    rng_seed: u64,
) -> (f64, f64) {
    let pass = run(spec, params, batch, training, rng_seed);
    let min_pre = pass
        .relu_pre
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.abs()));
    (min_pre, pass.max_abs_activation)
}
