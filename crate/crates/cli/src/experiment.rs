//! Scenario assembly and the three experiment kinds.
//!
//! A scenario is a synthetic fleet of `n_clients + test_engines` engines:
//! the first `n_clients` become one airline each, the rest are held-out test
//! engines. Noisy clients get Gaussian sensor noise injected before
//! normalization. Test engines are normalized with the pooled stats of all
//! training engines for FL and UC, and with the owning client's stats for
//! each NI model.

use anyhow::{anyhow, bail, Context, Result};
use fedrul_core::agg::AggregationMethod;
use fedrul_core::data::{
    self, aggregate_mean, build_client_dataset, inject_noise, minmax_apply, minmax_fit,
    split_flights, window_extract, ClientDataset, FlightSeries, NormalizationStats, StatsSource,
    SynthProfile,
};
use fedrul_core::fl::{
    self, eval, AggregationOutcome, ClientConfig, EpochReport, ExecutionMode, RunConfig,
};
use fedrul_core::nn::NetworkSpec;
use fedrul_core::{seed, ClientId};
use serde::Serialize;
use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::time::{Duration, Instant};

/// Independent seeds of the four random subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeedPack {
    pub data: u64,
    pub training: u64,
    pub noise: u64,
    pub assignment: u64,
}

impl SeedPack {
    /// Derives the four streams from one master seed.
    pub fn from_master(master: u64) -> SeedPack {
        SeedPack {
            data: seed::derive(master, 0x01),
            training: seed::derive(master, 0x02),
            noise: seed::derive(master, 0x03),
            assignment: seed::derive(master, 0x04),
        }
    }
}

/// Transport/executor choice for the federated run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportChoice {
    InProc,
    SingleThread,
    Tcp {
        listen: SocketAddr,
        connect: Option<SocketAddr>,
    },
}

impl TransportChoice {
    fn execution_mode(&self) -> ExecutionMode {
        match self {
            TransportChoice::InProc => ExecutionMode::InProc,
            TransportChoice::SingleThread => ExecutionMode::SingleThread,
            TransportChoice::Tcp { listen, connect } => ExecutionMode::Tcp {
                listen: *listen,
                connect: *connect,
            },
        }
    }
}

/// Full experiment configuration. Defaults mirror the benchmark scenario:
/// six airlines, three held-out test engines, two noisy clients (2 and 5),
/// the standard window geometry and the published training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_clients: usize,
    pub test_engines: usize,
    pub profile: SynthProfile,
    pub agg_bucket: usize,
    pub window_len: usize,
    pub stride: usize,
    pub val_fraction: f64,
    pub noise_alpha: f64,
    pub noisy_clients: BTreeSet<u16>,
    pub allow_noisy_majority: bool,
    pub method: AggregationMethod,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub reset_optimizer: bool,
    pub seeds: SeedPack,
    pub transport: TransportChoice,
    pub recv_timeout: Duration,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_clients: 6,
            test_engines: 3,
            profile: SynthProfile::default(),
            agg_bucket: 1,
            window_len: 50,
            stride: 10,
            val_fraction: 0.2,
            noise_alpha: 0.0,
            noisy_clients: BTreeSet::from([2, 5]),
            allow_noisy_majority: false,
            method: AggregationMethod::FedAvg,
            epochs: 100,
            batch_size: 128,
            learning_rate: 0.001,
            reset_optimizer: false,
            seeds: SeedPack::from_master(42),
            transport: TransportChoice::InProc,
            recv_timeout: Duration::from_secs(600),
        }
    }
}

/// The result-relevant part of the configuration; its hash is embedded in
/// every emitted row. Transport and timeouts are excluded because they
/// cannot change any reported number.
#[derive(Serialize)]
struct HashedConfig<'a> {
    n_clients: usize,
    test_engines: usize,
    profile: &'a SynthProfile,
    agg_bucket: usize,
    window_len: usize,
    stride: usize,
    val_fraction: f64,
    noise_alpha: f64,
    noisy_clients: &'a BTreeSet<u16>,
    method: &'a str,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    reset_optimizer: bool,
    seeds: SeedPack,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.n_clients == 0 {
            bail!("need at least one client");
        }
        if self.test_engines == 0 {
            bail!("need at least one test engine");
        }
        if self.noise_alpha == 0.0 {
            return Ok(());
        }
        for &c in &self.noisy_clients {
            if c == 0 || c as usize > self.n_clients {
                bail!("noisy client {c} outside 1..={}", self.n_clients);
            }
        }
        let majority = self.n_clients.div_ceil(2);
        if !self.noisy_clients.is_empty() && self.noisy_clients.len() >= majority {
            if self.allow_noisy_majority {
                log::warn!(
                    "{} of {} clients are noisy; median-based scoring degrades beyond half",
                    self.noisy_clients.len(),
                    self.n_clients
                );
            } else {
                bail!(
                    "{} noisy clients of {} reach the majority threshold {majority}; \
                     pass the override flag to run anyway",
                    self.noisy_clients.len(),
                    self.n_clients
                );
            }
        }
        Ok(())
    }

    /// The hash embedded in emitted rows, over the resolved result-relevant
    /// configuration.
    pub fn hash(&self) -> String {
        let hashed = HashedConfig {
            n_clients: self.n_clients,
            test_engines: self.test_engines,
            profile: &self.profile,
            agg_bucket: self.agg_bucket,
            window_len: self.window_len,
            stride: self.stride,
            val_fraction: self.val_fraction,
            noise_alpha: self.noise_alpha,
            noisy_clients: &self.noisy_clients,
            method: self.method.name(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            reset_optimizer: self.reset_optimizer,
            seeds: self.seeds,
        };
        let json = serde_json::to_string(&hashed).expect("config serializes");
        crate::report::sha256_hex_prefix(json.as_bytes())
    }

    fn network_spec(&self) -> NetworkSpec {
        NetworkSpec::rul_cnn(
            self.window_len,
            data::CONDITION_CHANNELS + data::SENSOR_CHANNELS,
            seed::derive(self.seeds.training, 0),
        )
    }

    fn split_seed(&self, client: u16) -> u64 {
        seed::derive(self.seeds.data, 1000 + client as u64)
    }

    fn run_config(&self, method: AggregationMethod) -> RunConfig {
        RunConfig {
            spec: self.network_spec(),
            method,
            epochs: self.epochs,
            client: ClientConfig {
                batch_size: self.batch_size,
                learning_rate: self.learning_rate,
                reset_optimizer_each_round: self.reset_optimizer,
            },
            train_seed: self.seeds.training,
            assignment_seed: self.seeds.assignment,
            mode: self.transport.execution_mode(),
            recv_timeout: self.recv_timeout,
        }
    }
}

/// Assembled data of one experiment.
pub struct Scenario {
    /// FL-mode datasets: per-client fit, normalize, split, window.
    pub client_datasets: Vec<ClientDataset>,
    /// Aggregated, noise-injected raw flights per client.
    pub client_flights: Vec<Vec<FlightSeries>>,
    /// Union min/max over the clients' actual (possibly noisy) flights; the
    /// stats a data-sharing central server would fit.
    pub pooled_stats: NormalizationStats,
    /// Union min/max over the clean aggregated training engines. Test
    /// engines are always normalized with these, so the test set is one
    /// fixed dataset across every method and noise level.
    pub test_stats: NormalizationStats,
    /// Aggregated raw flights of the held-out test engines (never noisy).
    pub test_flights: Vec<Vec<FlightSeries>>,
}

fn pooled_fit(per_engine: &[Vec<FlightSeries>]) -> Result<NormalizationStats> {
    let mut pooled: Option<NormalizationStats> = None;
    for flights in per_engine {
        let stats = minmax_fit(flights)?;
        pooled = Some(match pooled {
            None => stats,
            Some(acc) => acc.merge(&stats)?,
        });
    }
    Ok(pooled.expect("at least one engine"))
}

/// Generates the fleet and builds every client dataset. Noise is applied to
/// the configured clients' aggregated raw measurements (before
/// normalization); test engines stay clean.
pub fn build_scenario(config: &ExperimentConfig) -> Result<Scenario> {
    config.validate()?;
    let engines = data::generate(
        config.n_clients + config.test_engines,
        config.seeds.data,
        &config.profile,
    )?;

    let mut clean_flights = Vec::with_capacity(config.n_clients);
    let mut client_flights = Vec::with_capacity(config.n_clients);
    for (index, flights) in engines.iter().take(config.n_clients).enumerate() {
        let client = index as u16 + 1;
        let flights: Vec<FlightSeries> = flights
            .iter()
            .map(|f| aggregate_mean(f, config.agg_bucket))
            .collect::<Result<_, _>>()?;
        let noisy = if config.noisy_clients.contains(&client) && config.noise_alpha > 0.0 {
            inject_noise(
                &flights,
                config.noise_alpha,
                seed::derive(config.seeds.noise, client as u64),
            )?
        } else {
            flights.clone()
        };
        clean_flights.push(flights);
        client_flights.push(noisy);
    }

    let mut client_datasets = Vec::with_capacity(config.n_clients);
    for (index, flights) in client_flights.iter().enumerate() {
        let client = index as u16 + 1;
        client_datasets.push(build_client_dataset(
            ClientId(client),
            flights.clone(),
            config.val_fraction,
            config.split_seed(client),
            StatsSource::OwnFlights,
            config.window_len,
            config.stride,
        )?);
    }

    let pooled_stats = pooled_fit(&client_flights)?;
    let test_stats = pooled_fit(&clean_flights)?;

    let test_flights = engines[config.n_clients..]
        .iter()
        .map(|flights| {
            flights
                .iter()
                .map(|f| aggregate_mean(f, config.agg_bucket))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Scenario {
        client_datasets,
        client_flights,
        pooled_stats,
        test_stats,
        test_flights,
    })
}

/// Per-test-engine flight-level prognostic error.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineMetrics {
    pub engine_id: String,
    pub rmse: f64,
    pub mae: f64,
}

/// Flight-level test metrics: per engine, plus the overall values over the
/// pooled flight residuals of all test engines.
#[derive(Debug, Clone, PartialEq)]
pub struct TestMetrics {
    pub per_engine: Vec<EngineMetrics>,
    pub overall_rmse: f64,
    pub overall_mae: f64,
}

/// Predicts the RUL of every flight of every test engine (median over the
/// flight's windows) after normalizing with `stats`, and reduces residuals
/// to RMSE/MAE per engine and pooled.
pub fn evaluate_on_tests(
    spec: &NetworkSpec,
    params: &fedrul_core::ParameterVector,
    test_flights: &[Vec<FlightSeries>],
    stats: &NormalizationStats,
    window_len: usize,
    stride: usize,
) -> Result<TestMetrics> {
    let mut per_engine = Vec::with_capacity(test_flights.len());
    let mut pooled_sq = 0.0f64;
    let mut pooled_abs = 0.0f64;
    let mut pooled_n = 0usize;
    for flights in test_flights {
        let first = flights
            .first()
            .ok_or_else(|| anyhow!("test engine without flights"))?;
        let mut sq = 0.0f64;
        let mut abs = 0.0f64;
        for flight in flights {
            let normalized = minmax_apply(flight, stats)?;
            let predicted =
                eval::predict_flight_rul(spec, params, &normalized, window_len, stride)?;
            let residual = predicted - flight.rul_label() as f64;
            sq += residual * residual;
            abs += residual.abs();
        }
        let n = flights.len() as f64;
        per_engine.push(EngineMetrics {
            engine_id: first.engine_id().to_string(),
            rmse: (sq / n).sqrt(),
            mae: abs / n,
        });
        pooled_sq += sq;
        pooled_abs += abs;
        pooled_n += flights.len();
    }
    Ok(TestMetrics {
        per_engine,
        overall_rmse: (pooled_sq / pooled_n as f64).sqrt(),
        overall_mae: pooled_abs / pooled_n as f64,
    })
}

/// One emitted result line. `wall_time_secs` is displayed but never
/// persisted, so reruns of the same configuration produce byte-identical
/// CSV rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub method: String,
    pub alpha: f64,
    /// `None` for a successful run, the error text for a failed sweep cell.
    pub failure: Option<String>,
    pub best_epoch: u32,
    pub per_engine_rmse: Vec<f64>,
    pub per_engine_mae: Vec<f64>,
    pub overall_rmse: f64,
    pub overall_mae: f64,
    pub wall_time_secs: f64,
    pub config_hash: String,
}

impl ResultRow {
    fn from_metrics(
        scenario: &str,
        method: &str,
        config: &ExperimentConfig,
        best_epoch: u32,
        metrics: &TestMetrics,
        wall_time_secs: f64,
    ) -> ResultRow {
        ResultRow {
            scenario: scenario.to_string(),
            method: method.to_string(),
            alpha: config.noise_alpha,
            failure: None,
            best_epoch,
            per_engine_rmse: metrics.per_engine.iter().map(|e| e.rmse).collect(),
            per_engine_mae: metrics.per_engine.iter().map(|e| e.mae).collect(),
            overall_rmse: metrics.overall_rmse,
            overall_mae: metrics.overall_mae,
            wall_time_secs,
            config_hash: config.hash(),
        }
    }
}

/// Federated run: trains with the configured aggregation method, evaluates
/// the best checkpoint on the test engines (pooled normalization), returns
/// the row and the per-epoch history.
pub fn run_fl_experiment(config: &ExperimentConfig) -> Result<(ResultRow, Vec<EpochReport>)> {
    let started = Instant::now();
    let scenario = build_scenario(config)?;
    let run_config = config.run_config(config.method);
    let outcome = fl::run_training(&run_config, scenario.client_datasets)
        .context("federated training failed")?;
    let metrics = evaluate_on_tests(
        &run_config.spec,
        &outcome.best.params,
        &scenario.test_flights,
        &scenario.test_stats,
        config.window_len,
        config.stride,
    )?;
    let row = ResultRow::from_metrics(
        "fl",
        config.method.name(),
        config,
        outcome.best.epoch,
        &metrics,
        started.elapsed().as_secs_f64(),
    );
    Ok((row, outcome.history))
}

/// Unrestricted-access centralized baseline: one model over the union of all
/// clients' data, normalized with the pooled stats, same per-client splits.
/// Implemented as a single-client federated run so that `n_clients = 1`
/// makes UC and FL(FedAvg) the identical computation.
pub fn run_uc_baseline(config: &ExperimentConfig) -> Result<(ResultRow, Vec<EpochReport>)> {
    let started = Instant::now();
    let scenario = build_scenario(config)?;

    let mut training_windows = Vec::new();
    let mut validation_windows = Vec::new();
    let mut validation_flights = Vec::new();
    for (index, flights) in scenario.client_flights.iter().enumerate() {
        let client = index as u16 + 1;
        let normalized: Vec<FlightSeries> = flights
            .iter()
            .map(|f| minmax_apply(f, &scenario.pooled_stats))
            .collect::<Result<_, _>>()?;
        let (train, val) = split_flights(normalized, config.val_fraction, config.split_seed(client))?;
        for flight in &train {
            training_windows.extend(window_extract(flight, config.window_len, config.stride)?);
        }
        for flight in &val {
            validation_windows.extend(window_extract(flight, config.window_len, config.stride)?);
        }
        validation_flights.extend(val);
    }
    let n_train = training_windows.len();
    let dataset = ClientDataset {
        client_id: ClientId(1),
        training_windows,
        validation_windows,
        validation_flights,
        stats: scenario.pooled_stats.clone(),
        n_train,
    };

    let run_config = config.run_config(AggregationMethod::FedAvg);
    let outcome =
        fl::run_training(&run_config, vec![dataset]).context("centralized training failed")?;
    let metrics = evaluate_on_tests(
        &run_config.spec,
        &outcome.best.params,
        &scenario.test_flights,
        &scenario.test_stats,
        config.window_len,
        config.stride,
    )?;
    let row = ResultRow::from_metrics(
        "uc",
        "uc",
        config,
        outcome.best.epoch,
        &metrics,
        started.elapsed().as_secs_f64(),
    );
    Ok((row, outcome.history))
}

/// Non-collaborative isolated baseline: each client trains alone on its own
/// data; its test evaluation normalizes the test engines with that client's
/// own stats. Returns one row per client plus the mean row.
pub fn run_ni_baseline(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let scenario = build_scenario(config)?;
    let mut rows = Vec::with_capacity(config.n_clients + 1);
    for dataset in scenario.client_datasets {
        let started = Instant::now();
        let client = dataset.client_id;
        let stats = dataset.stats.clone();
        let run_config = config.run_config(AggregationMethod::FedAvg);
        let outcome = fl::run_training(&run_config, vec![dataset])
            .with_context(|| format!("isolated training of client {client} failed"))?;
        let metrics = evaluate_on_tests(
            &run_config.spec,
            &outcome.best.params,
            &scenario.test_flights,
            &stats,
            config.window_len,
            config.stride,
        )?;
        rows.push(ResultRow::from_metrics(
            &format!("ni:{client}"),
            "ni",
            config,
            outcome.best.epoch,
            &metrics,
            started.elapsed().as_secs_f64(),
        ));
    }

    let n = rows.len() as f64;
    let engines = rows[0].per_engine_rmse.len();
    let mean = ResultRow {
        scenario: "ni:mean".to_string(),
        method: "ni".to_string(),
        alpha: config.noise_alpha,
        failure: None,
        best_epoch: 0,
        per_engine_rmse: (0..engines)
            .map(|e| rows.iter().map(|r| r.per_engine_rmse[e]).sum::<f64>() / n)
            .collect(),
        per_engine_mae: (0..engines)
            .map(|e| rows.iter().map(|r| r.per_engine_mae[e]).sum::<f64>() / n)
            .collect(),
        overall_rmse: rows.iter().map(|r| r.overall_rmse).sum::<f64>() / n,
        overall_mae: rows.iter().map(|r| r.overall_mae).sum::<f64>() / n,
        wall_time_secs: rows.iter().map(|r| r.wall_time_secs).sum(),
        config_hash: config.hash(),
    };
    rows.push(mean);
    Ok(rows)
}

/// Per-client selection counts of a best-model run.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub method: String,
    pub alpha: f64,
    pub client_id: u16,
    pub times_selected: usize,
    pub epochs: usize,
    pub config_hash: String,
}

/// Counts how often each client's model was selected as the global model.
pub fn selection_counts(
    config: &ExperimentConfig,
    history: &[EpochReport],
) -> Vec<SelectionRow> {
    let mut counts = vec![0usize; config.n_clients];
    for report in history {
        if let AggregationOutcome::Selected { client_id } = &report.aggregation {
            counts[(client_id.as_u16() - 1) as usize] += 1;
        }
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(index, times_selected)| SelectionRow {
            method: config.method.name().to_string(),
            alpha: config.noise_alpha,
            client_id: index as u16 + 1,
            times_selected,
            epochs: history.len(),
            config_hash: config.hash(),
        })
        .collect()
}

/// Output of a noise sweep: one row per (alpha, method) cell plus selection
/// counts for the best-model methods.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub selections: Vec<SelectionRow>,
}

pub const DEFAULT_SWEEP_ALPHAS: [f64; 6] = [0.0, 0.1, 0.5, 0.7, 1.0, 2.0];

/// Runs every (alpha, method) cell. A failed cell is recorded with its error
/// and the sweep continues.
pub fn noise_sweep(base: &ExperimentConfig, alphas: &[f64]) -> Result<SweepOutput> {
    if alphas.is_empty() {
        bail!("sweep needs at least one alpha");
    }
    let mut rows = Vec::new();
    let mut selections = Vec::new();
    for &alpha in alphas {
        for method in AggregationMethod::ALL {
            let mut config = base.clone();
            config.noise_alpha = alpha;
            config.method = method;
            log::info!("sweep cell: method={method} alpha={alpha}");
            match run_fl_experiment(&config) {
                Ok((mut row, history)) => {
                    row.scenario = "sweep".to_string();
                    rows.push(row);
                    if method.selects_best() {
                        selections.extend(selection_counts(&config, &history));
                    }
                }
                Err(e) => {
                    log::error!("sweep cell failed: method={method} alpha={alpha}: {e:#}");
                    rows.push(ResultRow {
                        scenario: "sweep".to_string(),
                        method: method.name().to_string(),
                        alpha,
                        failure: Some(format!("{e:#}")),
                        best_epoch: 0,
                        per_engine_rmse: Vec::new(),
                        per_engine_mae: Vec::new(),
                        overall_rmse: f64::NAN,
                        overall_mae: f64::NAN,
                        wall_time_secs: 0.0,
                        config_hash: config.hash(),
                    });
                }
            }
        }
    }
    Ok(SweepOutput { rows, selections })
}
