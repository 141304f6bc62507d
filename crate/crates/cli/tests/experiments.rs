//! Experiment-driver behavior at miniature scale.

use fedrul_cli::experiment::*;
use fedrul_cli::report;
use fedrul_core::data::SynthProfile;
use fedrul_core::nn;
use std::collections::BTreeSet;

fn tiny_config() -> ExperimentConfig {
    ExperimentConfig {
        n_clients: 2,
        test_engines: 1,
        epochs: 2,
        profile: SynthProfile {
            steps_per_flight: 70,
            flights_min: 6,
            flights_max: 9,
            ..SynthProfile::default()
        },
        ..ExperimentConfig::default()
    }
}

fn metrics_of(row: &ResultRow) -> (Vec<f64>, Vec<f64>, f64, f64, u32) {
    (
        row.per_engine_rmse.clone(),
        row.per_engine_mae.clone(),
        row.overall_rmse,
        row.overall_mae,
        row.best_epoch,
    )
}

#[test]
fn uc_with_one_client_is_exactly_fl_with_fedavg() {
    let config = ExperimentConfig {
        n_clients: 1,
        ..tiny_config()
    };
    let (fl_row, fl_history) = run_fl_experiment(&config).unwrap();
    let (uc_row, uc_history) = run_uc_baseline(&config).unwrap();
    assert_eq!(metrics_of(&fl_row), metrics_of(&uc_row));
    assert_eq!(fl_history, uc_history);
}

#[test]
fn zero_learning_rate_reports_the_untrained_model() {
    let config = ExperimentConfig {
        learning_rate: 0.0,
        epochs: 1,
        ..tiny_config()
    };
    let (row, _) = run_fl_experiment(&config).unwrap();

    let scenario = build_scenario(&config).unwrap();
    let spec = fedrul_core::NetworkSpec::rul_cnn(
        config.window_len,
        17,
        fedrul_core::seed::derive(config.seeds.training, 0),
    );
    let params = nn::init_parameters(&spec).unwrap();
    let untrained = evaluate_on_tests(
        &spec,
        &params,
        &scenario.test_flights,
        &scenario.test_stats,
        config.window_len,
        config.stride,
    )
    .unwrap();
    assert_eq!(row.overall_rmse, untrained.overall_rmse);
    assert_eq!(row.overall_mae, untrained.overall_mae);
}

#[test]
fn identical_configs_reproduce_identical_rows() {
    let config = tiny_config();
    let (a, _) = run_fl_experiment(&config).unwrap();
    let (b, _) = run_fl_experiment(&config).unwrap();
    // wall time varies; the persisted row must not
    let dir = tempfile::tempdir().unwrap();
    let pa = dir.path().join("a.csv");
    let pb = dir.path().join("b.csv");
    report::write_results_csv(&pa, &[a]).unwrap();
    report::write_results_csv(&pb, &[b]).unwrap();
    assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
}

#[test]
fn ni_emits_one_row_per_client_plus_the_mean() {
    let config = tiny_config();
    let rows = run_ni_baseline(&config).unwrap();
    assert_eq!(rows.len(), config.n_clients + 1);
    for (i, row) in rows[..config.n_clients].iter().enumerate() {
        assert_eq!(row.scenario, format!("ni:{}", i + 1));
    }
    let mean = &rows[config.n_clients];
    assert_eq!(mean.scenario, "ni:mean");
    let expect_overall =
        rows[..config.n_clients].iter().map(|r| r.overall_rmse).sum::<f64>() / config.n_clients as f64;
    assert!((mean.overall_rmse - expect_overall).abs() < 1e-12);
    for e in 0..config.test_engines {
        let expect = rows[..config.n_clients]
            .iter()
            .map(|r| r.per_engine_mae[e])
            .sum::<f64>()
            / config.n_clients as f64;
        assert!((mean.per_engine_mae[e] - expect).abs() < 1e-12);
    }
}

#[test]
fn ni_normalizes_test_engines_with_each_clients_own_stats() {
    // With a zero learning rate the best checkpoint is the untrained model,
    // so each NI row must equal an independent evaluation of the initial
    // parameters under that client's own stats.
    let config = ExperimentConfig {
        n_clients: 3,
        learning_rate: 0.0,
        epochs: 1,
        ..tiny_config()
    };
    let rows = run_ni_baseline(&config).unwrap();
    let scenario = build_scenario(&config).unwrap();
    let spec = fedrul_core::NetworkSpec::rul_cnn(
        config.window_len,
        17,
        fedrul_core::seed::derive(config.seeds.training, 0),
    );
    let params = nn::init_parameters(&spec).unwrap();
    for (row, dataset) in rows.iter().zip(&scenario.client_datasets) {
        let expected = evaluate_on_tests(
            &spec,
            &params,
            &scenario.test_flights,
            &dataset.stats,
            config.window_len,
            config.stride,
        )
        .unwrap();
        assert_eq!(row.overall_rmse, expected.overall_rmse);
        assert_eq!(row.overall_mae, expected.overall_mae);
    }
    // and the clients' stats genuinely differ, so the rule is observable
    assert_ne!(
        scenario.client_datasets[0].stats,
        scenario.client_datasets[1].stats
    );
}

#[test]
fn sweep_records_failed_cells_and_continues() {
    // With a single client, every method except fedavg fails; the sweep must
    // still emit the full grid.
    let config = ExperimentConfig {
        n_clients: 1,
        ..tiny_config()
    };
    let out = noise_sweep(&config, &[0.0]).unwrap();
    assert_eq!(out.rows.len(), 5);
    for row in &out.rows {
        if row.method == "fedavg" {
            assert!(row.failure.is_none());
        } else {
            let note = row.failure.as_ref().expect("non-fedavg cells fail at N=1");
            assert!(note.contains("at least 2 clients"), "note: {note}");
        }
    }
}

#[test]
fn pooled_stats_widen_when_client_ranges_differ() {
    let config = ExperimentConfig {
        n_clients: 4,
        ..tiny_config()
    };
    let scenario = build_scenario(&config).unwrap();
    let pooled = &scenario.pooled_stats;
    for dataset in &scenario.client_datasets {
        for c in 0..pooled.channels() {
            assert!(pooled.min()[c] <= dataset.stats.min()[c]);
            assert!(pooled.max()[c] >= dataset.stats.max()[c]);
        }
    }
    // with several engines, at least one channel range must be strictly wider
    // than some client's own
    let strictly_wider = scenario.client_datasets.iter().any(|d| {
        (0..pooled.channels())
            .any(|c| pooled.max()[c] > d.stats.max()[c] || pooled.min()[c] < d.stats.min()[c])
    });
    assert!(strictly_wider);
}

#[test]
fn noisy_majority_needs_the_override() {
    let config = ExperimentConfig {
        noise_alpha: 1.0,
        noisy_clients: BTreeSet::from([1, 2]),
        ..tiny_config()
    };
    assert!(build_scenario(&config).is_err());
    let overridden = ExperimentConfig {
        allow_noisy_majority: true,
        ..config
    };
    assert!(build_scenario(&overridden).is_ok());
}

#[test]
fn config_hash_tracks_result_relevant_fields_only() {
    let base = tiny_config();
    let same = ExperimentConfig {
        transport: TransportChoice::SingleThread,
        ..base.clone()
    };
    assert_eq!(base.hash(), same.hash());
    let different = ExperimentConfig {
        noise_alpha: 0.5,
        ..base.clone()
    };
    assert_ne!(base.hash(), different.hash());
    let reseeded = ExperimentConfig {
        seeds: SeedPack::from_master(43),
        ..base
    };
    assert_ne!(reseeded.hash(), tiny_config().hash());
}

#[test]
fn test_engine_normalization_is_fixed_across_noise_levels() {
    let clean = ExperimentConfig {
        n_clients: 3,
        ..tiny_config()
    };
    let noisy = ExperimentConfig {
        noise_alpha: 2.0,
        noisy_clients: BTreeSet::from([1]),
        ..clean.clone()
    };
    let a = build_scenario(&clean).unwrap();
    let b = build_scenario(&noisy).unwrap();
    assert_eq!(a.test_stats, b.test_stats);
    assert_eq!(a.test_flights, b.test_flights);
    // the shareable pooled stats do widen under noise
    assert_ne!(a.pooled_stats, b.pooled_stats);
}
