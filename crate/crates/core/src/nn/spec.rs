use super::NnError;
use serde::{Deserialize, Serialize};

/// Element-wise activation applied after a layer's affine transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    ReLU,
    Linear,
}

/// One layer of the network.
///
/// `dropout` is an inverted-dropout rate applied to the layer *output* when
/// running in training mode; it must lie in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    /// 1D convolution over the step axis, stride 1, zero same-padding
    /// (`kernel_len` must be odd so the output keeps the input length).
    Conv1d {
        kernels: usize,
        kernel_len: usize,
        activation: Activation,
        dropout: f32,
    },
    /// Fully connected layer over the flattened input.
    Dense {
        units: usize,
        activation: Activation,
        dropout: f32,
    },
    /// Final fully connected layer: one unit, linear activation, no dropout.
    Output,
}

/// Input/output extents of a layer once placed in a concrete network.
///
/// Dense layers are carried as `(1, units)` so that the step×channel framing
/// holds uniformly; the flattened feature count is `in_steps * in_channels`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerDims {
    pub in_steps: usize,
    pub in_channels: usize,
    pub out_steps: usize,
    pub out_channels: usize,
}

impl LayerDims {
    pub fn in_features(&self) -> usize {
        self.in_steps * self.in_channels
    }

    pub fn out_features(&self) -> usize {
        self.out_steps * self.out_channels
    }
}

/// Which tensor of a layer a parameter slot holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TensorRole {
    Weight,
    Bias,
}

/// Location of one tensor inside the flat parameter vector.
///
/// Weight shapes are `[kernels, kernel_len, in_channels]` for convolutions
/// and `[units, in_features]` for dense layers; biases are `[units]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSlot {
    pub layer: usize,
    pub role: TensorRole,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// Ordered tensor slots of a network; fixes the meaning of every coordinate
/// of a [`super::ParameterVector`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterLayout {
    slots: Vec<TensorSlot>,
    total: usize,
}

impl ParameterLayout {
    pub fn slots(&self) -> &[TensorSlot] {
        &self.slots
    }

    pub fn total_len(&self) -> usize {
        self.total
    }

    /// The (weight, bias) slots of a layer.
    pub fn layer_slots(&self, layer: usize) -> (&TensorSlot, &TensorSlot) {
        let w = &self.slots[2 * layer];
        let b = &self.slots[2 * layer + 1];
        debug_assert!(w.layer == layer && b.layer == layer);
        (w, b)
    }
}

/// Immutable description of a network: layer stack, input window extents and
/// the seed used for parameter initialization. Two specs with equal fields
/// produce byte-identical initial parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    layers: Vec<LayerSpec>,
    input_window: usize,
    input_channels: usize,
    seed: u64,
}

impl NetworkSpec {
    /// Builds and validates a spec. The layer chain must end in [`LayerSpec::Output`]
    /// and produce a single scalar; convolutions may not follow dense layers.
    pub fn new(
        layers: Vec<LayerSpec>,
        input_window: usize,
        input_channels: usize,
        seed: u64,
    ) -> Result<Self, NnError> {
        let spec = NetworkSpec {
            layers,
            input_window,
            input_channels,
            seed,
        };
        spec.layer_dims()?;
        Ok(spec)
    }

    /// The RUL regressor used throughout the benchmarks: three same-padding
    /// convolutions (10, 10 and 1 kernels of length 9), a 100-unit dense
    /// layer with dropout 0.5, and a linear scalar output.
    pub fn rul_cnn(input_window: usize, input_channels: usize, seed: u64) -> Self {
        NetworkSpec::new(
            vec![
                LayerSpec::Conv1d {
                    kernels: 10,
                    kernel_len: 9,
                    activation: Activation::ReLU,
                    dropout: 0.0,
                },
                LayerSpec::Conv1d {
                    kernels: 10,
                    kernel_len: 9,
                    activation: Activation::ReLU,
                    dropout: 0.0,
                },
                LayerSpec::Conv1d {
                    kernels: 1,
                    kernel_len: 9,
                    activation: Activation::ReLU,
                    dropout: 0.0,
                },
                LayerSpec::Dense {
                    units: 100,
                    activation: Activation::ReLU,
                    dropout: 0.5,
                },
                LayerSpec::Output,
            ],
            input_window,
            input_channels,
            seed,
        )
        .expect("built-in RUL CNN spec is valid")
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_window(&self) -> usize {
        self.input_window
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Per-layer dimensions, checking that the chain is consistent and ends
    /// in a single scalar output.
    pub fn layer_dims(&self) -> Result<Vec<LayerDims>, NnError> {
        if self.input_window == 0 || self.input_channels == 0 {
            return Err(NnError::InvalidSpec(
                "input window and channel count must be positive".into(),
            ));
        }
        if self.layers.is_empty() {
            return Err(NnError::InvalidSpec("network has no layers".into()));
        }
        let mut dims = Vec::with_capacity(self.layers.len());
        let mut steps = self.input_window;
        let mut channels = self.input_channels;
        let mut flattened = false;
        for (index, layer) in self.layers.iter().enumerate() {
            let d = match *layer {
                LayerSpec::Conv1d {
                    kernels,
                    kernel_len,
                    dropout,
                    ..
                } => {
                    if flattened {
                        return Err(NnError::InvalidSpec(format!(
                            "layer {index}: convolution after a dense layer"
                        )));
                    }
                    if kernels == 0 {
                        return Err(NnError::InvalidSpec(format!(
                            "layer {index}: convolution needs at least one kernel"
                        )));
                    }
                    if kernel_len == 0 || kernel_len % 2 == 0 {
                        return Err(NnError::InvalidSpec(format!(
                            "layer {index}: same-padding requires an odd kernel length, got {kernel_len}"
                        )));
                    }
                    check_dropout(index, dropout)?;
                    LayerDims {
                        in_steps: steps,
                        in_channels: channels,
                        out_steps: steps,
                        out_channels: kernels,
                    }
                }
                LayerSpec::Dense { units, dropout, .. } => {
                    if units == 0 {
                        return Err(NnError::InvalidSpec(format!(
                            "layer {index}: dense layer needs at least one unit"
                        )));
                    }
                    check_dropout(index, dropout)?;
                    flattened = true;
                    LayerDims {
                        in_steps: steps,
                        in_channels: channels,
                        out_steps: 1,
                        out_channels: units,
                    }
                }
                LayerSpec::Output => {
                    if index + 1 != self.layers.len() {
                        return Err(NnError::InvalidSpec(format!(
                            "layer {index}: output layer must be last"
                        )));
                    }
                    flattened = true;
                    LayerDims {
                        in_steps: steps,
                        in_channels: channels,
                        out_steps: 1,
                        out_channels: 1,
                    }
                }
            };
            steps = d.out_steps;
            channels = d.out_channels;
            dims.push(d);
        }
        match self.layers.last() {
            Some(LayerSpec::Output) => {}
            _ => {
                return Err(NnError::InvalidSpec(
                    "network must end in the scalar output layer".into(),
                ))
            }
        }
        Ok(dims)
    }

    /// Flat parameter layout: for each layer, a weight slot then a bias slot.
    pub fn parameter_layout(&self) -> Result<ParameterLayout, NnError> {
        let dims = self.layer_dims()?;
        let mut slots = Vec::with_capacity(2 * self.layers.len());
        let mut offset = 0;
        for (index, (layer, d)) in self.layers.iter().zip(&dims).enumerate() {
            let (w_shape, b_len) = match *layer {
                LayerSpec::Conv1d {
                    kernels,
                    kernel_len,
                    ..
                } => (vec![kernels, kernel_len, d.in_channels], kernels),
                LayerSpec::Dense { units, .. } => (vec![units, d.in_features()], units),
                LayerSpec::Output => (vec![1, d.in_features()], 1),
            };
            let w_len: usize = w_shape.iter().product();
            slots.push(TensorSlot {
                layer: index,
                role: TensorRole::Weight,
                shape: w_shape,
                offset,
                len: w_len,
            });
            offset += w_len;
            slots.push(TensorSlot {
                layer: index,
                role: TensorRole::Bias,
                shape: vec![b_len],
                offset,
                len: b_len,
            });
            offset += b_len;
        }
        Ok(ParameterLayout {
            slots,
            total: offset,
        })
    }
}

fn check_dropout(index: usize, rate: f32) -> Result<(), NnError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::InvalidSpec(format!(
            "layer {index}: dropout rate {rate} outside [0, 1)"
        )));
    }
    Ok(())
}
