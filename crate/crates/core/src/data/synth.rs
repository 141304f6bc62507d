//! Synthetic run-to-failure engine generator.
//!
//! Each flight follows a trapezoidal climb/cruise/descent operating profile
//! over four condition channels; thirteen sensor channels are smooth
//! functions of those conditions on realistic per-channel scales, shifted by
//! a per-flight degradation offset that grows with the flight index through
//! a linear-then-accelerating health index. Two fault modes shift disjoint
//! sensor subsets. A small fixed measurement noise is added per step.

use super::{DataError, FlightSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Operating-condition channels (mach, throttle, altitude, inlet temperature).
pub const CONDITION_CHANNELS: usize = 4;
/// Sensor channels derived from the conditions.
pub const SENSOR_CHANNELS: usize = 13;
/// Total channels per measurement (H).
pub const CHANNELS: usize = CONDITION_CHANNELS + SENSOR_CHANNELS;

/// Which sensor subset an engine's degradation signature shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultMode {
    /// Turbine-efficiency loss: temperature/speed sensors drift upward.
    Efficiency,
    /// Flow degradation: pressure/flow sensors drift downward.
    Flow,
}

impl FaultMode {
    /// Engines alternate fault modes by generation index.
    pub fn of_engine(index: usize) -> FaultMode {
        if index.is_multiple_of(2) {
            FaultMode::Efficiency
        } else {
            FaultMode::Flow
        }
    }

    /// Channel indices shifted by this mode; the two modes are disjoint.
    pub fn affected_channels(self) -> &'static [usize] {
        match self {
            FaultMode::Efficiency => &[4, 5, 6, 7],
            FaultMode::Flow => &[8, 9, 10, 11, 12],
        }
    }
}

/// Generator knobs. The defaults describe a desk-scale fleet: 40 to 90
/// flights per engine, 120 aggregated steps per flight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub steps_per_flight: usize,
    pub flights_min: u32,
    pub flights_max: u32,
    /// Measurement noise as a fraction of each channel's scale.
    pub base_noise: f32,
    /// Scales the degradation drift of the fault-affected sensors.
    pub degradation_strength: f32,
    /// Flight-to-flight variation of the cruise segment.
    pub condition_jitter: f32,
}

impl Default for SynthProfile {
    fn default() -> Self {
        SynthProfile {
            steps_per_flight: 120,
            flights_min: 40,
            flights_max: 90,
            base_noise: 0.004,
            degradation_strength: 1.0,
            condition_jitter: 0.02,
        }
    }
}

/// Nominal full-scale value of each channel, used to size measurement noise.
const CHANNEL_SCALE: [f32; CHANNELS] = [
    0.85, 100.0, 35000.0, 520.0, // conditions
    3.2, 2300.0, 585.0, 1580.0, 1850.0, 1250.0, 14.5, 16.0, 1950.0, 165.0, 22.0, 11.0, 26.0,
];

/// Sensor response rows: (offset, mach, altitude, throttle, mach*throttle,
/// degradation drift), all as fractions of the channel scale. Drifts are
/// kept well below the operating-envelope swing so per-engine min/max stats
/// describe the flight profile, not the fault signature.
const SENSOR_RESPONSE: [[f32; 6]; SENSOR_CHANNELS] = [
    [0.25, 0.10, -0.15, 0.55, 0.25, 0.050],   // fuel flow
    [0.45, 0.20, -0.05, 0.35, 0.10, 0.035],   // fan speed
    [0.75, 0.05, -0.18, 0.12, 0.05, 0.040],   // LPC outlet temperature
    [0.70, 0.06, -0.16, 0.16, 0.06, 0.050],   // HPC outlet temperature
    [0.62, 0.05, -0.12, 0.25, 0.08, 0.060],   // HPT outlet temperature
    [0.66, 0.04, -0.14, 0.20, 0.07, 0.050],   // LPT outlet temperature
    [0.95, -0.05, -0.70, 0.02, 0.00, -0.045], // fan inlet pressure
    [0.55, 0.08, -0.45, 0.30, 0.10, -0.050],  // LPT outlet pressure
    [0.50, 0.22, -0.30, 0.28, 0.12, -0.040],  // fan flow
    [0.48, 0.20, -0.28, 0.30, 0.12, -0.045],  // LPT outlet flow
    [0.80, -0.12, 0.10, -0.30, -0.10, -0.060], // fan stall margin
    [0.78, -0.10, 0.08, -0.28, -0.08, -0.050], // LPC stall margin
    [0.82, -0.11, 0.09, -0.26, -0.09, -0.055], // HPC stall margin
];

/// Health index in [0, 1]: linear early wear, accelerating toward failure.
fn health_index(flight: u32, total: u32) -> f32 {
    let x = flight as f32 / total as f32;
    0.35 * x + 0.65 * x * x * x
}

/// Generates `n_engines` run-to-failure engines, `engine_1` onward. Fully
/// deterministic per `(n_engines, seed, profile)`; each engine draws from
/// its own derived stream, so a fleet prefix is stable under growth.
pub fn generate(
    n_engines: usize,
    seed: u64,
    profile: &SynthProfile,
) -> Result<Vec<Vec<FlightSeries>>, DataError> {
    if n_engines == 0 {
        return Err(DataError::InvalidArg("need at least one engine".into()));
    }
    if profile.steps_per_flight == 0 {
        return Err(DataError::InvalidArg("steps_per_flight must be positive".into()));
    }
    if profile.flights_min == 0 || profile.flights_min > profile.flights_max {
        return Err(DataError::InvalidArg(format!(
            "invalid flight-count range [{}, {}]",
            profile.flights_min, profile.flights_max
        )));
    }
    if profile.base_noise.is_nan()
        || profile.base_noise < 0.0
        || profile.degradation_strength.is_nan()
        || profile.degradation_strength < 0.0
    {
        return Err(DataError::InvalidArg(
            "noise and degradation levels must be nonnegative".into(),
        ));
    }

    (0..n_engines)
        .map(|index| generate_engine(index, seed, profile))
        .collect()
}

fn generate_engine(
    index: usize,
    seed: u64,
    profile: &SynthProfile,
) -> Result<Vec<FlightSeries>, DataError> {
    let mut rng = ChaCha20Rng::seed_from_u64(crate::seed::derive(seed, index as u64));
    let engine_id = format!("engine_{}", index + 1);
    let mode = FaultMode::of_engine(index);
    let total_flights = rng.random_range(profile.flights_min..=profile.flights_max);

    // Per-engine response individuality: each sensor's condition
    // coefficients and offset get a small fixed perturbation. Kept small so
    // pooled min/max stats stay close to any single engine's own range.
    let mut response = SENSOR_RESPONSE;
    for row in response.iter_mut() {
        let offset_shift: f32 = rng.random_range(-0.005..0.005);
        row[0] += offset_shift;
        for coeff in row.iter_mut().take(5).skip(1) {
            *coeff *= 1.0 + rng.random_range(-0.02..0.02f32);
        }
    }

    let steps = profile.steps_per_flight;
    let climb_end = (steps as f32 * 0.25) as usize;
    let descent_start = (steps as f32 * 0.75) as usize;

    let mut flights = Vec::with_capacity(total_flights as usize);
    for flight_index in 1..=total_flights {
        let cruise_mach = 0.76 + profile.condition_jitter * rng.random_range(-1.0..1.0f32);
        let cruise_alt = 0.88 + profile.condition_jitter * rng.random_range(-1.0..1.0f32);
        let cruise_thr = 0.60 + 0.5 * profile.condition_jitter * rng.random_range(-1.0..1.0f32);
        let drift = profile.degradation_strength * health_index(flight_index, total_flights);

        let mut values = Vec::with_capacity(steps * CHANNELS);
        for t in 0..steps {
            let (mach, alt, thr) = if t < climb_end {
                let frac = t as f32 / climb_end.max(1) as f32;
                (
                    0.25 + (cruise_mach - 0.25) * frac,
                    0.03 + (cruise_alt - 0.03) * frac,
                    0.88,
                )
            } else if t < descent_start {
                let wobble = (t as f32 * 0.23).sin();
                (
                    cruise_mach + 0.008 * wobble,
                    cruise_alt,
                    cruise_thr + 0.015 * wobble,
                )
            } else {
                let frac = (t - descent_start) as f32 / (steps - descent_start).max(1) as f32;
                (
                    cruise_mach + (0.25 - cruise_mach) * frac,
                    cruise_alt + (0.03 - cruise_alt) * frac,
                    0.30,
                )
            };

            let mut row = [0.0f32; CHANNELS];
            row[0] = mach;
            row[1] = thr * 100.0;
            row[2] = alt * 35000.0;
            row[3] = 520.0 - 180.0 * alt + 6.0 * mach;
            for (s, resp) in response.iter().enumerate() {
                let channel = CONDITION_CHANNELS + s;
                let mut level =
                    resp[0] + resp[1] * mach + resp[2] * alt + resp[3] * thr + resp[4] * mach * thr;
                if mode.affected_channels().contains(&channel) {
                    level += SENSOR_RESPONSE[s][5] * drift;
                }
                row[s + CONDITION_CHANNELS] = level * CHANNEL_SCALE[channel];
            }
            for (channel, value) in row.iter_mut().enumerate() {
                let noise: f64 = StandardNormal.sample(&mut rng);
                *value += profile.base_noise * CHANNEL_SCALE[channel] * noise as f32;
            }
            values.extend_from_slice(&row);
        }

        flights.push(FlightSeries::new(
            engine_id.clone(),
            flight_index,
            total_flights - flight_index,
            CHANNELS,
            values,
        )?);
    }
    Ok(flights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let profile = SynthProfile::default();
        let a = generate(3, 99, &profile).unwrap();
        let b = generate(3, 99, &profile).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn engine_prefix_is_stable_under_fleet_growth() {
        let profile = SynthProfile::default();
        let small = generate(2, 5, &profile).unwrap();
        let large = generate(4, 5, &profile).unwrap();
        assert_eq!(small[0], large[0]);
        assert_eq!(small[1], large[1]);
    }

    #[test]
    fn final_flight_has_zero_rul_and_counts_line_up() {
        let profile = SynthProfile::default();
        for engine in generate(4, 7, &profile).unwrap() {
            let total = engine.len() as u32;
            assert!((40..=90).contains(&total));
            for (i, flight) in engine.iter().enumerate() {
                assert_eq!(flight.flight_index(), i as u32 + 1);
                assert_eq!(flight.rul_label(), total - flight.flight_index());
                assert_eq!(flight.steps(), profile.steps_per_flight);
                assert_eq!(flight.channels(), CHANNELS);
            }
            assert_eq!(engine.last().unwrap().rul_label(), 0);
        }
    }

    #[test]
    fn degradation_drifts_affected_channels_more_than_others() {
        let profile = SynthProfile::default();
        for (index, engine) in generate(2, 11, &profile).unwrap().into_iter().enumerate() {
            let mode = FaultMode::of_engine(index);
            let first = &engine[0];
            let last = engine.last().unwrap();
            let drift_of = |channel: usize| -> f64 {
                let sum: f64 = (0..first.steps())
                    .map(|t| {
                        (first.value(t, channel) as f64 - last.value(t, channel) as f64).abs()
                            / CHANNEL_SCALE[channel] as f64
                    })
                    .sum();
                sum / first.steps() as f64
            };
            let affected: Vec<f64> = mode.affected_channels().iter().map(|&c| drift_of(c)).collect();
            let unaffected: Vec<f64> = (0..CHANNELS)
                .filter(|c| !mode.affected_channels().contains(c))
                .map(drift_of)
                .collect();
            let affected_mean = affected.iter().sum::<f64>() / affected.len() as f64;
            let unaffected_mean = unaffected.iter().sum::<f64>() / unaffected.len() as f64;
            assert!(affected_mean > 0.0);
            assert!(
                affected_mean > unaffected_mean,
                "mode {mode:?}: affected {affected_mean} vs unaffected {unaffected_mean}"
            );
        }
    }

    #[test]
    fn fault_modes_are_disjoint() {
        let a = FaultMode::Efficiency.affected_channels();
        let b = FaultMode::Flow.affected_channels();
        assert!(a.iter().all(|c| !b.contains(c)));
    }
}
