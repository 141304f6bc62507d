use super::NnError;

/// A batch of fixed-size input windows with their RUL targets.
///
/// Inputs are stored row-major as `[sample][step][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    window: usize,
    channels: usize,
    inputs: Vec<f32>,
    targets: Vec<f32>,
}

impl Batch {
    pub fn new(window: usize, channels: usize) -> Self {
        Batch {
            window,
            channels,
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    /// Appends one sample; `values` must hold `window * channels` floats in
    /// step-major order.
    pub fn push(&mut self, values: &[f32], target: f32) -> Result<(), NnError> {
        let expected = self.window * self.channels;
        if values.len() != expected {
            return Err(NnError::LengthMismatch {
                expected,
                found: values.len(),
            });
        }
        self.inputs.extend_from_slice(values);
        self.targets.push(target);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn inputs(&self) -> &[f32] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f32] {
        &self.targets
    }

    /// The `[step][channel]` values of sample `index`.
    pub fn sample(&self, index: usize) -> &[f32] {
        let stride = self.window * self.channels;
        &self.inputs[index * stride..(index + 1) * stride]
    }
}
