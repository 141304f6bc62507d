//! Shared fixtures for the integration tests: a small network and small
//! synthetic client datasets that keep full protocol runs fast.

use fedrul_core::data::{
    self, build_client_dataset, ClientDataset, StatsSource, SynthProfile,
};
use fedrul_core::nn::{Activation, LayerSpec, NetworkSpec};
use fedrul_core::ClientId;

pub const TINY_WINDOW: usize = 16;
pub const TINY_STRIDE: usize = 8;

pub fn tiny_profile() -> SynthProfile {
    SynthProfile {
        steps_per_flight: 40,
        flights_min: 5,
        flights_max: 8,
        ..Default::default()
    }
}

pub fn tiny_spec(seed: u64) -> NetworkSpec {
    NetworkSpec::new(
        vec![
            LayerSpec::Conv1d {
                kernels: 2,
                kernel_len: 3,
                activation: Activation::ReLU,
                dropout: 0.0,
            },
            LayerSpec::Dense {
                units: 8,
                activation: Activation::ReLU,
                dropout: 0.5,
            },
            LayerSpec::Output,
        ],
        TINY_WINDOW,
        data::CONDITION_CHANNELS + data::SENSOR_CHANNELS,
        seed,
    )
    .unwrap()
}

pub fn tiny_datasets(n_clients: usize, data_seed: u64) -> Vec<ClientDataset> {
    let engines = data::generate(n_clients, data_seed, &tiny_profile()).unwrap();
    engines
        .into_iter()
        .enumerate()
        .map(|(i, flights)| {
            build_client_dataset(
                ClientId(i as u16 + 1),
                flights,
                0.25,
                data_seed ^ (i as u64 + 1),
                StatsSource::OwnFlights,
                TINY_WINDOW,
                TINY_STRIDE,
            )
            .unwrap()
        })
        .collect()
}
