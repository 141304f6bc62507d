//! Seeded generator of small gradient-check cases.

use super::refnet::relu_kink_margin;
use crate::nn::{Activation, Batch, LayerSpec, NetworkSpec, ParameterVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// One (network, parameters, batch) triple for a finite-difference check.
pub struct GradcheckCase {
    pub spec: NetworkSpec,
    pub params: ParameterVector,
    pub batch: Batch,
    pub training: bool,
    pub rng_seed: u64,
}

/// Draws a random small network (well under 500 parameters), random
/// parameters and a random batch, entirely from `seed`.
///
/// Returns `None` when the candidate is unusable for finite differencing:
/// some ReLU pre-activation sits within the probe's reach of zero (the loss
/// is not differentiable at a kink crossing, so the estimator itself is
/// invalid there), or the loss is too close to zero. Callers draw further
/// seeds until enough valid cases are collected; the sequence stays fully
/// deterministic.
pub fn random_gradcheck_case(seed: u64, h: f64) -> Option<GradcheckCase> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    let channels = rng.random_range(1..=3usize);
    let window = rng.random_range(6..=12usize);
    let conv_layers = rng.random_range(0..=2usize);
    let with_dropout = rng.random_range(0..4u32) == 0;

    let mut layers = Vec::new();
    for _ in 0..conv_layers {
        layers.push(LayerSpec::Conv1d {
            kernels: rng.random_range(1..=2usize),
            kernel_len: [3, 5][rng.random_range(0..2usize)],
            activation: Activation::ReLU,
            dropout: 0.0,
        });
    }
    layers.push(LayerSpec::Dense {
        units: rng.random_range(2..=6usize),
        activation: Activation::ReLU,
        dropout: if with_dropout { 0.25 } else { 0.0 },
    });
    layers.push(LayerSpec::Output);

    let spec = NetworkSpec::new(layers, window, channels, seed).ok()?;
    let layout = spec.parameter_layout().ok()?;
    debug_assert!(layout.total_len() <= 500);

    let values: Vec<f32> = (0..layout.total_len())
        .map(|_| rng.random_range(-0.6..0.6f32))
        .collect();
    let params = ParameterVector::from_values(layout, values).ok()?;

    let mut batch = Batch::new(window, channels);
    let batch_len = rng.random_range(2..=3usize);
    for _ in 0..batch_len {
        let sample: Vec<f32> = (0..window * channels)
            .map(|_| rng.random_range(-1.0..1.0f32))
            .collect();
        let target = rng.random_range(-3.0..3.0f32);
        batch.push(&sample, target).unwrap();
    }

    let training = with_dropout;
    let rng_seed = rng.random::<u64>();

    let params_f64: Vec<f64> = params.values().iter().map(|&v| v as f64).collect();
    let (min_pre, max_act) = relu_kink_margin(&spec, &params_f64, &batch, training, rng_seed);
    // A +/-h parameter probe moves any pre-activation by at most
    // h * max|activation| (one factor in the affine map changes); require
    // twice that much clearance from every kink.
    let margin = 2.0 * h * max_act.max(1.0);
    if min_pre < margin {
        return None;
    }
    let loss = super::refnet::reference_rmse_loss(&spec, &params_f64, &batch, training, rng_seed);
    if loss < 0.05 {
        return None;
    }

    Some(GradcheckCase {
        spec,
        params,
        batch,
        training,
        rng_seed,
    })
}
