use super::{DataError, FlightSeries};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

/// Adds independent Gaussian noise to every non-normalized measurement of an
/// engine: channel `h` gets `N(0, alpha * sigma_h)` where `sigma_h` is the
/// standard deviation of that channel over all steps of all given flights.
///
/// `alpha = 0` returns the flights bit-identical; a constant channel
/// (`sigma_h = 0`) is never perturbed. Draws walk flights, steps and
/// channels in order from a ChaCha stream over `seed`.
pub fn inject_noise(
    flights: &[FlightSeries],
    alpha: f64,
    seed: u64,
) -> Result<Vec<FlightSeries>, DataError> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(DataError::InvalidArg(format!(
            "noise multiplier {alpha} must be nonnegative"
        )));
    }
    if flights.is_empty() {
        return Err(DataError::EmptyInput);
    }
    if alpha == 0.0 {
        return Ok(flights.to_vec());
    }
    let channels = flights[0].channels();
    for flight in flights {
        if flight.channels() != channels {
            return Err(DataError::ChannelMismatch {
                expected: channels,
                found: flight.channels(),
            });
        }
    }

    let sigma = channel_std(flights, channels);
    let dists: Vec<Option<Normal<f64>>> = sigma
        .iter()
        .map(|&s| {
            if s > 0.0 {
                Some(Normal::new(0.0, alpha * s).expect("positive std"))
            } else {
                None
            }
        })
        .collect();

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noisy = flights
        .iter()
        .map(|flight| {
            let values: Vec<f32> = flight
                .values()
                .iter()
                .enumerate()
                .map(|(i, &v)| match &dists[i % channels] {
                    Some(dist) => (v as f64 + dist.sample(&mut rng)) as f32,
                    None => v,
                })
                .collect();
            flight.with_values(values)
        })
        .collect();
    Ok(noisy)
}

/// Population standard deviation per channel over all steps of all flights.
fn channel_std(flights: &[FlightSeries], channels: usize) -> Vec<f64> {
    let mut count = 0u64;
    let mut mean = vec![0.0f64; channels];
    for flight in flights {
        for row in flight.values().chunks_exact(channels) {
            for (c, &v) in row.iter().enumerate() {
                mean[c] += v as f64;
            }
        }
        count += flight.steps() as u64;
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let mut var = vec![0.0f64; channels];
    for flight in flights {
        for row in flight.values().chunks_exact(channels) {
            for (c, &v) in row.iter().enumerate() {
                let d = v as f64 - mean[c];
                var[c] += d * d;
            }
        }
    }
    var.into_iter().map(|v| (v / count as f64).sqrt()).collect()
}
