//! Experiment driver for the federated RUL benchmark: scenario assembly
//! over synthetic fleets, the federated run plus the centralized (UC) and
//! isolated (NI) baselines, noise sweeps, and CSV reporting.

pub mod experiment;
pub mod report;

pub use experiment::{
    build_scenario, evaluate_on_tests, noise_sweep, run_fl_experiment, run_ni_baseline,
    run_uc_baseline, EngineMetrics, ExperimentConfig, ResultRow, Scenario, SeedPack,
    SelectionRow, SweepOutput, TestMetrics, TransportChoice,
};
pub use report::{config_hash, write_epoch_log, write_results_csv, write_selections_csv};
