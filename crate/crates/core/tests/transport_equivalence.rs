//! The in-process and TCP backends must be observationally equivalent:
//! identical epoch reports, report for report.

mod common;

use common::{tiny_datasets, tiny_spec};
use fedrul_core::agg::AggregationMethod;
use fedrul_core::fl::{run_training, ExecutionMode, RunConfig};
use std::time::Duration;

#[test]
fn full_policy_epoch_reports_match_across_backends() {
    let base = RunConfig {
        train_seed: 41,
        assignment_seed: 42,
        recv_timeout: Duration::from_secs(120),
        ..RunConfig::new(tiny_spec(5), AggregationMethod::FullSoftmax, 2)
    };

    let inproc = run_training(&base, tiny_datasets(3, 7)).unwrap();
    let tcp = run_training(
        &RunConfig {
            mode: ExecutionMode::Tcp {
                listen: "127.0.0.1:0".parse().unwrap(),
                connect: None,
            },
            ..base
        },
        tiny_datasets(3, 7),
    )
    .unwrap();

    assert_eq!(inproc.history, tcp.history);
    assert_eq!(inproc.best.params, tcp.best.params);
    assert_eq!(inproc.final_params, tcp.final_params);
}
