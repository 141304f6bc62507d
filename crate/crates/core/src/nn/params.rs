use super::{NetworkSpec, NnError, ParameterLayout, TensorRole};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Flat, ordered vector of all weights and biases of a network.
///
/// This is the unit exchanged between server and clients: the global model
/// and every local model are `ParameterVector`s over the same layout. Only
/// the raw values cross the wire; the receiver re-attaches the layout from
/// its own copy of the [`NetworkSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f32>,
    layout: ParameterLayout,
}

impl ParameterVector {
    /// Wraps raw values in a layout, checking the length.
    pub fn from_values(layout: ParameterLayout, values: Vec<f32>) -> Result<Self, NnError> {
        if values.len() != layout.total_len() {
            return Err(NnError::LengthMismatch {
                expected: layout.total_len(),
                found: values.len(),
            });
        }
        Ok(ParameterVector { values, layout })
    }

    /// All-zero vector for a layout.
    pub fn zeros(layout: ParameterLayout) -> Self {
        let values = vec![0.0; layout.total_len()];
        ParameterVector { values, layout }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    /// The values backing one tensor slot.
    pub fn slot_values(&self, slot_index: usize) -> &[f32] {
        let slot = &self.layout.slots()[slot_index];
        &self.values[slot.offset..slot.offset + slot.len]
    }

    /// Replaces the values, keeping the layout. Lengths must match.
    pub fn with_values(&self, values: Vec<f32>) -> Result<Self, NnError> {
        ParameterVector::from_values(self.layout.clone(), values)
    }
}

/// Draws initial parameters for a spec: weights from a fan-in-scaled uniform
/// distribution `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, biases zero. The draw
/// is a ChaCha stream over `spec.seed()`, so equal specs yield byte-identical
/// vectors.
pub fn init_parameters(spec: &NetworkSpec) -> Result<ParameterVector, NnError> {
    let layout = spec.parameter_layout()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed());
    let mut values = vec![0.0f32; layout.total_len()];
    for slot in layout.slots() {
        match slot.role {
            TensorRole::Weight => {
                // fan_in = product of all but the leading (output) dimension
                let fan_in: usize = slot.shape[1..].iter().product();
                let limit = (6.0 / fan_in as f32).sqrt();
                let dist = Uniform::new(-limit, limit)
                    .map_err(|e| NnError::InvalidSpec(format!("bad init bounds: {e}")))?;
                for v in &mut values[slot.offset..slot.offset + slot.len] {
                    *v = dist.sample(&mut rng);
                }
            }
            TensorRole::Bias => {}
        }
    }
    ParameterVector::from_values(layout, values)
}
