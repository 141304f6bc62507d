//! Per-client dataset construction.
//!
//! A client's raw data is a list of run-to-failure flights (multi-channel
//! time series labelled with flights-remaining). This module turns raw
//! flights into train/validation window sets: synthetic generation or CSV
//! ingestion, bucket-mean aggregation, per-engine min-max normalization to
//! [-1, 1], a flight-level 80/20 split, length-50/stride-10 windowing, and
//! Gaussian sensor-noise injection for the robustness experiments.
//!
//! Everything is a pure, seed-deterministic transformation; per-client
//! pipelines can run concurrently without coordination.

mod csv_io;
mod flight;
mod noise;
mod pipeline;
mod synth;

pub use csv_io::{emit_flights, ingest};
pub use flight::{ClientDataset, FlightSeries, NormalizationStats, WindowSample};
pub use noise::inject_noise;
pub use pipeline::{
    aggregate_mean, build_client_dataset, minmax_fit, minmax_apply, split_flights,
    window_extract, StatsSource,
};
pub use synth::{generate, FaultMode, SynthProfile, CONDITION_CHANNELS, SENSOR_CHANNELS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    #[error("empty input")]
    EmptyInput,
    #[error("channel count mismatch: expected {expected}, found {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("need at least {needed} flights, found {found}")]
    TooFewFlights { needed: usize, found: usize },
    #[error("{file}:{row}: {reason}")]
    Ingest {
        file: String,
        row: u64,
        reason: String,
    },
    #[error("io error on {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}
