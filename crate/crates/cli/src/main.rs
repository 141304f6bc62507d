use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fedrul_cli::experiment::{
    self, ExperimentConfig, SeedPack, TransportChoice, DEFAULT_SWEEP_ALPHAS,
};
use fedrul_cli::report;
use fedrul_core::data::{self, SynthProfile};
use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

/// Federated remaining-useful-life benchmark driver.
#[derive(Parser)]
#[command(name = "fedrul", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Number of training clients (airlines)
    #[arg(long, default_value_t = 6)]
    clients: usize,
    /// Held-out test engines, normalized with pooled training stats
    #[arg(long, default_value_t = 3)]
    test_engines: usize,
    /// Master seed; data/training/noise/assignment streams derive from it
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Window length in aggregated steps
    #[arg(long, default_value_t = 50)]
    window_len: usize,
    /// Window stride in aggregated steps
    #[arg(long, default_value_t = 10)]
    stride: usize,
    /// Fraction of each client's flights held out for validation
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    /// Mean-aggregation bucket (in raw steps; 1 = data already aggregated)
    #[arg(long, default_value_t = 1)]
    agg_bucket: usize,
    /// Gaussian noise multiplier applied to the noisy clients
    #[arg(long, default_value_t = 0.0)]
    noise_alpha: f64,
    /// Clients whose data gets the injected noise
    #[arg(long, value_delimiter = ',', default_values_t = [2u16, 5u16])]
    noise_clients: Vec<u16>,
    /// Run even when noisy clients reach the majority threshold
    #[arg(long)]
    allow_noisy_majority: bool,
    /// Aggregated steps per synthetic flight
    #[arg(long, default_value_t = 120)]
    steps_per_flight: usize,
    /// Minimum flights per synthetic engine
    #[arg(long, default_value_t = 40)]
    flights_min: u32,
    /// Maximum flights per synthetic engine
    #[arg(long, default_value_t = 90)]
    flights_max: u32,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    learning_rate: f64,
    /// Reset Adam moments at the start of every round
    #[arg(long)]
    reset_optimizer: bool,
}

#[derive(Args)]
struct TransportArgs {
    /// Worker transport: in-process channels or loopback TCP
    #[arg(long, default_value = "inproc", value_parser = ["inproc", "tcp"])]
    transport: String,
    /// Bind address of the TCP listener
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: SocketAddr,
    /// Address the client workers dial (defaults to the listen address)
    #[arg(long)]
    connect: Option<SocketAddr>,
    /// Run the clients inline on the server thread (deterministic debugging)
    #[arg(long)]
    single_thread: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Federated training run with a selectable aggregation method
    Fl {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        transport: TransportArgs,
        /// fedavg | random-best | random-softmax | full-best | full-softmax
        #[arg(long, default_value = "fedavg")]
        aggregation: String,
        /// Results CSV path
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        /// Optional per-epoch report CSV
        #[arg(long)]
        epoch_log: Option<PathBuf>,
    },
    /// Unrestricted-access centralized baseline
    Uc {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Non-collaborative isolated baseline (one model per client)
    Ni {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Sweep every aggregation method over a list of noise multipliers
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        transport: TransportArgs,
        /// Noise multipliers of the sweep
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        /// Per-client selection counts of the best-model methods
        #[arg(long, default_value = "selections.csv")]
        selections_out: PathBuf,
    },
    /// Generate a synthetic fleet as CSV files (one per engine)
    GenData {
        #[arg(long, default_value_t = 9)]
        engines: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 120)]
        steps_per_flight: usize,
        #[arg(long, default_value_t = 40)]
        flights_min: u32,
        #[arg(long, default_value_t = 90)]
        flights_max: u32,
        /// Output directory for engine_<k>.csv files
        #[arg(long, default_value = "data")]
        out_dir: PathBuf,
    },
    /// Validate flight CSV files and print a summary
    Ingest {
        /// CSV files in the flight schema
        paths: Vec<PathBuf>,
    },
}

fn experiment_config(
    data: &DataArgs,
    train: &TrainArgs,
    transport: Option<&TransportArgs>,
    aggregation: &str,
) -> Result<ExperimentConfig> {
    let method = aggregation
        .parse()
        .map_err(|e: String| anyhow::anyhow!(e))?;
    let transport = match transport {
        None => TransportChoice::InProc,
        Some(args) => {
            if args.single_thread {
                if args.transport == "tcp" {
                    bail!("--single-thread applies to the in-process executor only");
                }
                TransportChoice::SingleThread
            } else if args.transport == "tcp" {
                TransportChoice::Tcp {
                    listen: args.listen,
                    connect: args.connect,
                }
            } else {
                TransportChoice::InProc
            }
        }
    };
    Ok(ExperimentConfig {
        n_clients: data.clients,
        test_engines: data.test_engines,
        profile: SynthProfile {
            steps_per_flight: data.steps_per_flight,
            flights_min: data.flights_min,
            flights_max: data.flights_max,
            ..SynthProfile::default()
        },
        agg_bucket: data.agg_bucket,
        window_len: data.window_len,
        stride: data.stride,
        val_fraction: data.val_fraction,
        noise_alpha: data.noise_alpha,
        noisy_clients: BTreeSet::from_iter(data.noise_clients.iter().copied()),
        allow_noisy_majority: data.allow_noisy_majority,
        method,
        epochs: train.epochs,
        batch_size: train.batch_size,
        learning_rate: train.learning_rate,
        reset_optimizer: train.reset_optimizer,
        seeds: SeedPack::from_master(data.seed),
        transport,
        ..ExperimentConfig::default()
    })
}

fn print_row(row: &experiment::ResultRow) {
    println!(
        "{} method={} alpha={} best_epoch={} overall_rmse={:.4} overall_mae={:.4} wall={:.1}s",
        row.scenario,
        row.method,
        row.alpha,
        row.best_epoch,
        row.overall_rmse,
        row.overall_mae,
        row.wall_time_secs
    );
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Fl {
            data,
            train,
            transport,
            aggregation,
            out,
            epoch_log,
        } => {
            let config = experiment_config(&data, &train, Some(&transport), &aggregation)?;
            let (row, history) = experiment::run_fl_experiment(&config)?;
            for report in &history {
                println!(
                    "epoch {:>4}  val_loss {:.6}",
                    report.epoch, report.global_val_loss
                );
            }
            print_row(&row);
            report::write_results_csv(&out, &[row])?;
            if let Some(path) = epoch_log {
                report::write_epoch_log(&path, &history)?;
            }
        }
        Command::Uc { data, train, out } => {
            let config = experiment_config(&data, &train, None, "fedavg")?;
            let (row, _) = experiment::run_uc_baseline(&config)?;
            print_row(&row);
            report::write_results_csv(&out, &[row])?;
        }
        Command::Ni { data, train, out } => {
            let config = experiment_config(&data, &train, None, "fedavg")?;
            let rows = experiment::run_ni_baseline(&config)?;
            for row in &rows {
                print_row(row);
            }
            report::write_results_csv(&out, &rows)?;
        }
        Command::Sweep {
            data,
            train,
            transport,
            alphas,
            out,
            selections_out,
        } => {
            let config = experiment_config(&data, &train, Some(&transport), "fedavg")?;
            let alphas = if alphas.is_empty() {
                DEFAULT_SWEEP_ALPHAS.to_vec()
            } else {
                alphas
            };
            let output = experiment::noise_sweep(&config, &alphas)?;
            for row in &output.rows {
                print_row(row);
            }
            report::write_results_csv(&out, &output.rows)?;
            report::write_selections_csv(&selections_out, &output.selections)?;
        }
        Command::GenData {
            engines,
            seed,
            steps_per_flight,
            flights_min,
            flights_max,
            out_dir,
        } => {
            let profile = SynthProfile {
                steps_per_flight,
                flights_min,
                flights_max,
                ..SynthProfile::default()
            };
            let fleet = data::generate(engines, seed, &profile)?;
            std::fs::create_dir_all(&out_dir)
                .with_context(|| format!("cannot create {}", out_dir.display()))?;
            let mut total_flights = 0;
            for (index, flights) in fleet.iter().enumerate() {
                let path = out_dir.join(format!("engine_{}.csv", index + 1));
                data::emit_flights(&path, flights)?;
                total_flights += flights.len();
            }
            println!(
                "{}",
                serde_json::json!({
                    "engines": engines,
                    "flights": total_flights,
                    "dir": out_dir.display().to_string(),
                })
            );
        }
        Command::Ingest { paths } => {
            if paths.is_empty() {
                bail!("ingest needs at least one CSV path");
            }
            let flights = data::ingest(&paths)?;
            let engines: BTreeSet<&str> = flights.iter().map(|f| f.engine_id()).collect();
            let steps: usize = flights.iter().map(|f| f.steps()).sum();
            println!(
                "{}",
                serde_json::json!({
                    "engines": engines.len(),
                    "flights": flights.len(),
                    "steps": steps,
                    "channels": flights.first().map_or(0, |f| f.channels()),
                })
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": format!("{e:#}") }));
            ExitCode::FAILURE
        }
    }
}
