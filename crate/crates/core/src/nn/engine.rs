use super::{Activation, Batch, LayerSpec, NetworkSpec, NnError, ParameterVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Runs the network over a batch and returns one scalar prediction per
/// sample.
///
/// With `training = true`, inverted dropout is applied to the outputs of
/// layers with a nonzero dropout rate: each retained element is scaled by
/// `1/(1-rate)` so that eval-mode activations match the training-time
/// expectation. Masks are drawn from a ChaCha stream over `rng_seed`, one
/// `f32` per output element, walking the layers in network order and each
/// output buffer in `[sample][step][channel]` order; an element is kept when
/// its draw is `>= rate`. With `training = false` the pass is deterministic
/// and `rng_seed` is ignored.
pub fn forward(
    spec: &NetworkSpec,
    params: &ParameterVector,
    batch: &Batch,
    training: bool,
    rng_seed: u64,
) -> Result<Vec<f32>, NnError> {
    let pass = run_forward(spec, params, batch, training, rng_seed)?;
    Ok(pass.predictions())
}

/// Computes the batch RMSE loss and its exact gradient with respect to every
/// parameter. Dropout masks are shared between the forward and backward pass
/// (same `rng_seed` contract as [`forward`]).
///
/// When the loss is exactly zero the gradient is the zero vector (the RMSE
/// derivative is undefined at zero residual; the error term contributes
/// nothing there).
pub fn backward(
    spec: &NetworkSpec,
    params: &ParameterVector,
    batch: &Batch,
    training: bool,
    rng_seed: u64,
) -> Result<(f64, ParameterVector), NnError> {
    let pass = run_forward(spec, params, batch, training, rng_seed)?;
    let n = batch.len();
    let targets = batch.targets();
    let predictions = pass.predictions();

    let mut sq_sum = 0.0f64;
    for (p, t) in predictions.iter().zip(targets) {
        let r = *p as f64 - *t as f64;
        sq_sum += r * r;
    }
    let loss = (sq_sum / n as f64).sqrt();

    let layout = params.layout().clone();
    if loss == 0.0 {
        return Ok((0.0, ParameterVector::zeros(layout)));
    }

    // dL/dyhat_b = r_b / (n * L)
    let scale = 1.0 / (n as f64 * loss);
    let mut grad_out: Vec<f64> = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (*p as f64 - *t as f64) * scale)
        .collect();

    let mut grad_values = vec![0.0f64; layout.total_len()];
    let dims = spec.layer_dims()?;

    for layer_index in (0..spec.layers().len()).rev() {
        let layer = &spec.layers()[layer_index];
        let d = dims[layer_index];
        let stage = &pass.stages[layer_index];

        // Dropout: the stored mask already carries the inverted scaling.
        if let Some(mask) = &stage.mask {
            for (g, m) in grad_out.iter_mut().zip(mask) {
                *g *= *m as f64;
            }
        }

        // Activation.
        if activation_of(layer) == Activation::ReLU {
            for (g, pre) in grad_out.iter_mut().zip(&stage.pre) {
                if *pre <= 0.0 {
                    *g = 0.0;
                }
            }
        }

        let (w_slot, b_slot) = layout.layer_slots(layer_index);
        let weights = &params.values()[w_slot.offset..w_slot.offset + w_slot.len];
        let (gw, rest) = grad_values[w_slot.offset..].split_at_mut(w_slot.len);
        let gb = &mut rest[..b_slot.len];

        let x = &stage.input;
        let mut grad_in = vec![0.0f64; n * d.in_features()];

        match *layer {
            LayerSpec::Conv1d { kernel_len, .. } => {
                let (t_len, c_in, o_len, k_len) =
                    (d.in_steps, d.in_channels, d.out_channels, kernel_len);
                let pad = (k_len - 1) / 2;
                for b in 0..n {
                    let x_s = &x[b * t_len * c_in..(b + 1) * t_len * c_in];
                    let gx_s = &mut grad_in[b * t_len * c_in..(b + 1) * t_len * c_in];
                    let go_s = &grad_out[b * t_len * o_len..(b + 1) * t_len * o_len];
                    for t in 0..t_len {
                        for o in 0..o_len {
                            let g = go_s[t * o_len + o];
                            if g == 0.0 {
                                continue;
                            }
                            gb[o] += g;
                            for k in 0..k_len {
                                let ti = t + k;
                                if ti < pad || ti - pad >= t_len {
                                    continue;
                                }
                                let ti = ti - pad;
                                let w_row = &weights[(o * k_len + k) * c_in..][..c_in];
                                let gw_row = &mut gw[(o * k_len + k) * c_in..][..c_in];
                                let x_row = &x_s[ti * c_in..][..c_in];
                                let gx_row = &mut gx_s[ti * c_in..][..c_in];
                                for c in 0..c_in {
                                    gw_row[c] += g * x_row[c] as f64;
                                    gx_row[c] += g * w_row[c] as f64;
                                }
                            }
                        }
                    }
                }
            }
            LayerSpec::Dense { .. } | LayerSpec::Output => {
                let (f_len, u_len) = (d.in_features(), d.out_channels);
                for b in 0..n {
                    let x_s = &x[b * f_len..(b + 1) * f_len];
                    let gx_s = &mut grad_in[b * f_len..(b + 1) * f_len];
                    let go_s = &grad_out[b * u_len..(b + 1) * u_len];
                    for (u, &g) in go_s.iter().enumerate() {
                        if g == 0.0 {
                            continue;
                        }
                        gb[u] += g;
                        let w_row = &weights[u * f_len..][..f_len];
                        let gw_row = &mut gw[u * f_len..][..f_len];
                        for f in 0..f_len {
                            gw_row[f] += g * x_s[f] as f64;
                            gx_s[f] += g * w_row[f] as f64;
                        }
                    }
                }
            }
        }
        grad_out = grad_in;
    }

    let gradient =
        ParameterVector::from_values(layout, grad_values.iter().map(|&g| g as f32).collect())?;
    Ok((loss, gradient))
}

fn activation_of(layer: &LayerSpec) -> Activation {
    match *layer {
        LayerSpec::Conv1d { activation, .. } | LayerSpec::Dense { activation, .. } => activation,
        LayerSpec::Output => Activation::Linear,
    }
}

fn dropout_of(layer: &LayerSpec) -> f32 {
    match *layer {
        LayerSpec::Conv1d { dropout, .. } | LayerSpec::Dense { dropout, .. } => dropout,
        LayerSpec::Output => 0.0,
    }
}

/// Per-layer buffers of one forward pass.
struct Stage {
    /// Input activations of the layer, `[sample][step][channel]`.
    input: Vec<f32>,
    /// Pre-activation values (before the nonlinearity).
    pre: Vec<f32>,
    /// Inverted-dropout multipliers (0 or 1/(1-rate)); `None` without dropout.
    mask: Option<Vec<f32>>,
    /// Layer output after activation and dropout.
    output: Vec<f32>,
}

struct ForwardPass {
    stages: Vec<Stage>,
}

impl ForwardPass {
    fn predictions(&self) -> Vec<f32> {
        self.stages.last().expect("validated spec has layers").output.clone()
    }
}

fn run_forward(
    spec: &NetworkSpec,
    params: &ParameterVector,
    batch: &Batch,
    training: bool,
    rng_seed: u64,
) -> Result<ForwardPass, NnError> {
    if batch.is_empty() {
        return Err(NnError::EmptyInput);
    }
    if batch.window() != spec.input_window() || batch.channels() != spec.input_channels() {
        return Err(NnError::ShapeMismatch {
            expected: format!("{}x{}", spec.input_window(), spec.input_channels()),
            found: format!("{}x{}", batch.window(), batch.channels()),
        });
    }
    let layout = spec.parameter_layout()?;
    if layout != *params.layout() {
        return Err(NnError::ShapeMismatch {
            expected: format!("parameter layout of {} values", layout.total_len()),
            found: format!("layout of {} values", params.layout().total_len()),
        });
    }
    let dims = spec.layer_dims()?;
    let n = batch.len();

    let mut rng = training.then(|| ChaCha20Rng::seed_from_u64(rng_seed));
    let mut stages = Vec::with_capacity(spec.layers().len());
    let mut current: Vec<f32> = batch.inputs().to_vec();

    for (layer_index, (layer, d)) in spec.layers().iter().zip(&dims).enumerate() {
        let (w_slot, b_slot) = layout.layer_slots(layer_index);
        let weights = &params.values()[w_slot.offset..w_slot.offset + w_slot.len];
        let biases = &params.values()[b_slot.offset..b_slot.offset + b_slot.len];

        let out_len = n * d.out_features();
        let mut pre = vec![0.0f32; out_len];

        match *layer {
            LayerSpec::Conv1d { kernel_len, .. } => {
                let (t_len, c_in, o_len, k_len) =
                    (d.in_steps, d.in_channels, d.out_channels, kernel_len);
                let pad = (k_len - 1) / 2;
                for b in 0..n {
                    let x_s = &current[b * t_len * c_in..(b + 1) * t_len * c_in];
                    let pre_s = &mut pre[b * t_len * o_len..(b + 1) * t_len * o_len];
                    for t in 0..t_len {
                        for o in 0..o_len {
                            let mut acc = biases[o] as f64;
                            for k in 0..k_len {
                                let ti = t + k;
                                if ti < pad || ti - pad >= t_len {
                                    continue;
                                }
                                let ti = ti - pad;
                                let w_row = &weights[(o * k_len + k) * c_in..][..c_in];
                                let x_row = &x_s[ti * c_in..][..c_in];
                                for c in 0..c_in {
                                    acc += w_row[c] as f64 * x_row[c] as f64;
                                }
                            }
                            pre_s[t * o_len + o] = acc as f32;
                        }
                    }
                }
            }
            LayerSpec::Dense { .. } | LayerSpec::Output => {
                let (f_len, u_len) = (d.in_features(), d.out_channels);
                for b in 0..n {
                    let x_s = &current[b * f_len..(b + 1) * f_len];
                    let pre_s = &mut pre[b * u_len..(b + 1) * u_len];
                    for (u, p) in pre_s.iter_mut().enumerate() {
                        let mut acc = biases[u] as f64;
                        let w_row = &weights[u * f_len..][..f_len];
                        for f in 0..f_len {
                            acc += w_row[f] as f64 * x_s[f] as f64;
                        }
                        *p = acc as f32;
                    }
                }
            }
        }

        let mut output = pre.clone();
        if activation_of(layer) == Activation::ReLU {
            for v in &mut output {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }

        let rate = dropout_of(layer);
        let mask = match (&mut rng, rate > 0.0) {
            (Some(rng), true) => {
                let keep_scale = 1.0 / (1.0 - rate);
                let mask: Vec<f32> = (0..out_len)
                    .map(|_| {
                        if rng.random::<f32>() >= rate {
                            keep_scale
                        } else {
                            0.0
                        }
                    })
                    .collect();
                for (v, m) in output.iter_mut().zip(&mask) {
                    *v *= *m;
                }
                Some(mask)
            }
            _ => None,
        };

        let input = std::mem::replace(&mut current, output.clone());
        stages.push(Stage {
            input,
            pre,
            mask,
            output,
        });
    }

    Ok(ForwardPass { stages })
}
