use super::DataError;
use crate::ClientId;

/// Multi-channel measurements of one flight of one engine, with the RUL
/// label (flights remaining after this flight; 0 on the final flight).
///
/// Values are stored row-major as `[step][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightSeries {
    engine_id: String,
    flight_index: u32,
    rul_label: u32,
    channels: usize,
    values: Vec<f32>,
}

impl FlightSeries {
    pub fn new(
        engine_id: impl Into<String>,
        flight_index: u32,
        rul_label: u32,
        channels: usize,
        values: Vec<f32>,
    ) -> Result<Self, DataError> {
        if channels == 0 {
            return Err(DataError::InvalidArg("channel count must be positive".into()));
        }
        if flight_index == 0 {
            return Err(DataError::InvalidArg("flight_index starts at 1".into()));
        }
        if values.is_empty() || !values.len().is_multiple_of(channels) {
            return Err(DataError::InvalidArg(format!(
                "{} values do not form a nonempty step x {channels} matrix",
                values.len()
            )));
        }
        Ok(FlightSeries {
            engine_id: engine_id.into(),
            flight_index,
            rul_label,
            channels,
            values,
        })
    }

    pub fn engine_id(&self) -> &str {
        &self.engine_id
    }

    pub fn flight_index(&self) -> u32 {
        self.flight_index
    }

    pub fn rul_label(&self) -> u32 {
        self.rul_label
    }

    pub fn steps(&self) -> usize {
        self.values.len() / self.channels
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Measurement of `channel` at 0-based `step`.
    pub fn value(&self, step: usize, channel: usize) -> f32 {
        self.values[step * self.channels + channel]
    }

    /// All channels at 0-based `step`.
    pub fn step_row(&self, step: usize) -> &[f32] {
        &self.values[step * self.channels..(step + 1) * self.channels]
    }

    /// Same flight with replaced values (dimensions must be preserved).
    pub(crate) fn with_values(&self, values: Vec<f32>) -> FlightSeries {
        assert!(values.len().is_multiple_of(self.channels));
        FlightSeries {
            engine_id: self.engine_id.clone(),
            flight_index: self.flight_index,
            rul_label: self.rul_label,
            channels: self.channels,
            values,
        }
    }
}

/// Per-channel minima and maxima of one engine's measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    min: Vec<f32>,
    max: Vec<f32>,
}

impl NormalizationStats {
    pub fn new(min: Vec<f32>, max: Vec<f32>) -> Result<Self, DataError> {
        if min.is_empty() || min.len() != max.len() {
            return Err(DataError::InvalidArg(
                "min and max must be nonempty and equally long".into(),
            ));
        }
        for (h, (lo, hi)) in min.iter().zip(&max).enumerate() {
            if lo > hi {
                return Err(DataError::InvalidArg(format!(
                    "channel {h}: min {lo} above max {hi}"
                )));
            }
        }
        Ok(NormalizationStats { min, max })
    }

    pub fn channels(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f32] {
        &self.min
    }

    pub fn max(&self) -> &[f32] {
        &self.max
    }

    /// Elementwise union of two fits, as if fit over the combined data.
    pub fn merge(&self, other: &NormalizationStats) -> Result<NormalizationStats, DataError> {
        if self.channels() != other.channels() {
            return Err(DataError::ChannelMismatch {
                expected: self.channels(),
                found: other.channels(),
            });
        }
        let min = self.min.iter().zip(&other.min).map(|(a, b)| a.min(*b)).collect();
        let max = self.max.iter().zip(&other.max).map(|(a, b)| a.max(*b)).collect();
        NormalizationStats::new(min, max)
    }
}

/// A fixed-length slice of a normalized flight, carrying the flight's RUL
/// label. Windows never cross flight boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub engine_id: String,
    pub flight_index: u32,
    /// 1-based step the window starts at in the source flight.
    pub start_step: u32,
    pub window: usize,
    pub channels: usize,
    /// `[step][channel]`, `window * channels` floats.
    pub values: Vec<f32>,
    pub rul_label: u32,
}

/// One client's training and validation material plus its normalization
/// stats. Training and validation windows come from disjoint flight sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientDataset {
    pub client_id: ClientId,
    pub training_windows: Vec<WindowSample>,
    pub validation_windows: Vec<WindowSample>,
    /// The normalized validation flights the windows were cut from.
    pub validation_flights: Vec<FlightSeries>,
    pub stats: NormalizationStats,
    pub n_train: usize,
}
