//! Shared fixtures for the criterion benchmarks.

use fedrul_core::data::{self, SynthProfile};
use fedrul_core::nn::{self, Batch, NetworkSpec, ParameterVector};

/// The full-width RUL network with a deterministic parameter draw.
pub fn rul_network() -> (NetworkSpec, ParameterVector) {
    let spec = NetworkSpec::rul_cnn(50, 17, 1);
    let params = nn::init_parameters(&spec).expect("valid spec");
    (spec, params)
}

/// A deterministic batch of `n` windows shaped for [`rul_network`].
pub fn window_batch(n: usize) -> Batch {
    let mut batch = Batch::new(50, 17);
    for i in 0..n {
        let values: Vec<f32> = (0..50 * 17)
            .map(|j| (((i * 131 + j * 17) % 2000) as f32 / 1000.0 - 1.0) * 0.9)
            .collect();
        batch.push(&values, (i % 80) as f32).expect("shape matches");
    }
    batch
}

/// A small synthetic engine for the data-pipeline benchmarks.
pub fn sample_engine() -> Vec<data::FlightSeries> {
    let profile = SynthProfile {
        steps_per_flight: 240,
        flights_min: 20,
        flights_max: 20,
        ..SynthProfile::default()
    };
    data::generate(1, 5, &profile).expect("valid profile").remove(0)
}
