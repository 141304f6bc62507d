use super::{ClientDataset, DataError, FlightSeries, NormalizationStats, WindowSample};
use crate::ClientId;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Replaces consecutive non-overlapping buckets of `bucket` steps by their
/// per-channel mean; a trailing partial bucket is averaged over its actual
/// length. `bucket = 1` returns the series unchanged.
pub fn aggregate_mean(series: &FlightSeries, bucket: usize) -> Result<FlightSeries, DataError> {
    if bucket == 0 {
        return Err(DataError::InvalidArg("bucket must be at least 1".into()));
    }
    if bucket == 1 {
        return Ok(series.clone());
    }
    let channels = series.channels();
    let steps = series.steps();
    let out_steps = steps.div_ceil(bucket);
    let mut values = Vec::with_capacity(out_steps * channels);
    for b in 0..out_steps {
        let start = b * bucket;
        let end = (start + bucket).min(steps);
        let len = (end - start) as f64;
        for c in 0..channels {
            let sum: f64 = (start..end).map(|t| series.value(t, c) as f64).sum();
            values.push((sum / len) as f32);
        }
    }
    Ok(series.with_values(values))
}

/// Per-channel min/max over all steps of all provided flights.
pub fn minmax_fit(flights: &[FlightSeries]) -> Result<NormalizationStats, DataError> {
    let first = flights.first().ok_or(DataError::EmptyInput)?;
    let channels = first.channels();
    let mut min = vec![f32::INFINITY; channels];
    let mut max = vec![f32::NEG_INFINITY; channels];
    for flight in flights {
        if flight.channels() != channels {
            return Err(DataError::ChannelMismatch {
                expected: channels,
                found: flight.channels(),
            });
        }
        for row in flight.values().chunks_exact(channels) {
            for (c, &v) in row.iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
    }
    NormalizationStats::new(min, max)
}

/// Affine map to [-1, 1] per channel: `x' = 2 (x - min) / (max - min) - 1`.
/// A constant channel (min = max) maps to 0. Values outside the fitted range
/// land outside [-1, 1] and are deliberately not clamped.
pub fn minmax_apply(
    series: &FlightSeries,
    stats: &NormalizationStats,
) -> Result<FlightSeries, DataError> {
    let channels = series.channels();
    if stats.channels() != channels {
        return Err(DataError::ChannelMismatch {
            expected: channels,
            found: stats.channels(),
        });
    }
    let mut values = Vec::with_capacity(series.values().len());
    for row in series.values().chunks_exact(channels) {
        for (c, &v) in row.iter().enumerate() {
            let (lo, hi) = (stats.min()[c] as f64, stats.max()[c] as f64);
            let out = if lo == hi {
                0.0
            } else {
                2.0 * (v as f64 - lo) / (hi - lo) - 1.0
            };
            values.push(out as f32);
        }
    }
    Ok(series.with_values(values))
}

/// Cuts fixed-length windows with the given stride: start steps 1, 1+stride,
/// 1+2*stride, ... as long as the window fits; an incomplete tail is
/// dropped. A flight shorter than one window yields no samples (logged).
pub fn window_extract(
    series: &FlightSeries,
    length: usize,
    stride: usize,
) -> Result<Vec<WindowSample>, DataError> {
    if length == 0 || stride == 0 {
        return Err(DataError::InvalidArg(
            "window length and stride must be at least 1".into(),
        ));
    }
    let steps = series.steps();
    if steps < length {
        log::warn!(
            "flight {} of {} has {} steps, shorter than one {}-step window; skipped",
            series.flight_index(),
            series.engine_id(),
            steps,
            length
        );
        return Ok(Vec::new());
    }
    let channels = series.channels();
    let mut samples = Vec::new();
    let mut start = 0usize;
    while start + length <= steps {
        let values = series.values()[start * channels..(start + length) * channels].to_vec();
        samples.push(WindowSample {
            engine_id: series.engine_id().to_string(),
            flight_index: series.flight_index(),
            start_step: start as u32 + 1,
            window: length,
            channels,
            values,
            rul_label: series.rul_label(),
        });
        start += stride;
    }
    Ok(samples)
}

/// Splits flights into training and validation sets at the flight level:
/// a seeded uniform sample without replacement of `round(val_fraction * F)`
/// flights (at least 1, at most F-1) becomes validation. Both partitions
/// keep the input order.
pub fn split_flights(
    flights: Vec<FlightSeries>,
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<FlightSeries>, Vec<FlightSeries>), DataError> {
    let total = flights.len();
    if total < 2 {
        return Err(DataError::TooFewFlights {
            needed: 2,
            found: total,
        });
    }
    if !(0.0..1.0).contains(&val_fraction) || val_fraction <= 0.0 {
        return Err(DataError::InvalidArg(format!(
            "val_fraction {val_fraction} outside (0, 1)"
        )));
    }
    let n_val = ((val_fraction * total as f64).round() as usize).clamp(1, total - 1);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, total, n_val);
    let mut is_val = vec![false; total];
    for index in chosen.iter() {
        is_val[index] = true;
    }
    let mut train = Vec::with_capacity(total - n_val);
    let mut val = Vec::with_capacity(n_val);
    for (flight, to_val) in flights.into_iter().zip(is_val) {
        if to_val {
            val.push(flight);
        } else {
            train.push(flight);
        }
    }
    Ok((train, val))
}

/// Where a client's normalization stats come from: its own flights, or
/// externally provided (the test-engine case).
#[derive(Debug, Clone, PartialEq)]
pub enum StatsSource {
    OwnFlights,
    Provided(NormalizationStats),
}

/// The per-client pipeline, composed in order: fit (or adopt) stats,
/// normalize every flight, split at the flight level, window each partition.
pub fn build_client_dataset(
    client_id: ClientId,
    flights: Vec<FlightSeries>,
    val_fraction: f64,
    seed: u64,
    stats_source: StatsSource,
    window_len: usize,
    stride: usize,
) -> Result<ClientDataset, DataError> {
    if flights.is_empty() {
        return Err(DataError::EmptyInput);
    }
    let stats = match stats_source {
        StatsSource::OwnFlights => minmax_fit(&flights)?,
        StatsSource::Provided(stats) => stats,
    };
    let normalized: Vec<FlightSeries> = flights
        .iter()
        .map(|f| minmax_apply(f, &stats))
        .collect::<Result<_, _>>()?;
    let (train_flights, val_flights) = split_flights(normalized, val_fraction, seed)?;

    let mut training_windows = Vec::new();
    for flight in &train_flights {
        training_windows.extend(window_extract(flight, window_len, stride)?);
    }
    let mut validation_windows = Vec::new();
    for flight in &val_flights {
        validation_windows.extend(window_extract(flight, window_len, stride)?);
    }
    let n_train = training_windows.len();
    Ok(ClientDataset {
        client_id,
        training_windows,
        validation_windows,
        validation_flights: val_flights,
        stats,
        n_train,
    })
}
