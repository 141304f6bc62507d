use super::{NnError, ParameterVector};

/// Adam optimizer state. Moment estimates are kept in `f64` (one entry per
/// parameter, zero-initialized); the update itself runs in `f64` and the new
/// parameters are stored back as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamState {
    /// Fresh state with the default hyperparameters
    /// (lr 0.001, beta1 0.9, beta2 0.999, epsilon 1e-8).
    pub fn new(param_len: usize) -> Self {
        AdamState::with_learning_rate(param_len, 0.001)
    }

    pub fn with_learning_rate(param_len: usize, learning_rate: f64) -> Self {
        AdamState {
            first_moment: vec![0.0; param_len],
            second_moment: vec![0.0; param_len],
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }
}

/// One bias-corrected Adam update, applied coordinate-wise:
///
/// ```text
/// m <- b1*m + (1-b1)*g        mhat = m / (1 - b1^t)
/// v <- b2*v + (1-b2)*g^2      vhat = v / (1 - b2^t)
/// theta <- theta - lr * mhat / (sqrt(vhat) + eps)
/// ```
///
/// Pure: returns the updated parameters and state, leaving the inputs
/// untouched, so identical calls give identical results.
pub fn adam_step(
    state: &AdamState,
    params: &ParameterVector,
    gradient: &ParameterVector,
) -> Result<(ParameterVector, AdamState), NnError> {
    if params.len() != state.len() {
        return Err(NnError::LengthMismatch {
            expected: state.len(),
            found: params.len(),
        });
    }
    if gradient.len() != params.len() {
        return Err(NnError::LengthMismatch {
            expected: params.len(),
            found: gradient.len(),
        });
    }

    let mut next = state.clone();
    next.step_count += 1;
    let t = next.step_count as i32;
    let bias1 = 1.0 - state.beta1.powi(t);
    let bias2 = 1.0 - state.beta2.powi(t);

    let mut values = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let g = gradient.values()[i] as f64;
        let m = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
        let v = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
        next.first_moment[i] = m;
        next.second_moment[i] = v;
        let m_hat = m / bias1;
        let v_hat = v / bias2;
        let theta = params.values()[i] as f64
            - state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        values.push(theta as f32);
    }

    let updated = params.with_values(values)?;
    Ok((updated, next))
}
