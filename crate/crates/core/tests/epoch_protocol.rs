//! Protocol-level behavior of the federated epoch: aggregation identities,
//! zero-learning rounds, message counts, method consistency with identical
//! clients, and the decentralized-validation equivalence.

mod common;

use common::{tiny_datasets, tiny_spec};
use fedrul_core::agg::AggregationMethod;
use fedrul_core::fl::{
    channel_pair, drive_worker, eval, run_epoch, run_training, ClientConfig, ClientLink,
    ClientState, ClientWorker, ExecutionMode, Message, RunConfig, ServerState, Transport,
    TransportError,
};
use fedrul_core::nn::init_parameters;
use fedrul_core::ClientId;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

const TIMEOUT: Duration = Duration::from_secs(60);

/// Counts protocol messages by kind as they cross the server-side link.
struct CountingTransport<T: Transport> {
    inner: T,
    eval_assignments_sent: Arc<AtomicUsize>,
    eval_losses_received: Arc<AtomicUsize>,
}

impl<T: Transport> Transport for CountingTransport<T> {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        if matches!(msg, Message::EvalAssignment { .. }) {
            self.eval_assignments_sent.fetch_add(1, Ordering::SeqCst);
        }
        self.inner.send(msg)
    }

    fn recv(&mut self) -> Result<Message, TransportError> {
        let msg = self.inner.recv()?;
        if matches!(msg, Message::EvalLoss { .. }) {
            self.eval_losses_received.fetch_add(1, Ordering::SeqCst);
        }
        Ok(msg)
    }
}

/// Builds a manual session (threaded channel workers) where every client
/// can share the same training seed, which `run_training` deliberately
/// never does.
struct ManualSession {
    server: ServerState,
    links: Vec<ClientLink>,
    handles: Vec<std::thread::JoinHandle<Result<(), fedrul_core::fl::RuntimeError>>>,
    assignments: Arc<AtomicUsize>,
    eval_losses: Arc<AtomicUsize>,
}

fn manual_session(
    method: AggregationMethod,
    n_clients: usize,
    shared_train_seed: u64,
    learning_rate: f64,
) -> ManualSession {
    let spec = tiny_spec(5);
    let datasets = tiny_datasets(n_clients, 31);
    // every client gets the same flights and the same seed
    let template = datasets[0].clone();

    let assignments = Arc::new(AtomicUsize::new(0));
    let eval_losses = Arc::new(AtomicUsize::new(0));
    let mut links = Vec::new();
    let mut handles = Vec::new();
    for i in 0..n_clients {
        let id = ClientId(i as u16 + 1);
        let mut dataset = template.clone();
        dataset.client_id = id;
        let n_train = dataset.n_train;
        let state = ClientState::new(
            id,
            spec.clone(),
            dataset,
            ClientConfig {
                learning_rate,
                ..ClientConfig::default()
            },
            shared_train_seed,
        )
        .unwrap();
        let worker = ClientWorker::new(state);
        let (server_end, client_end) = channel_pair(TIMEOUT);
        handles.push(std::thread::spawn(move || drive_worker(client_end, worker)));
        links.push(ClientLink {
            id,
            n_train,
            transport: Box::new(CountingTransport {
                inner: server_end,
                eval_assignments_sent: assignments.clone(),
                eval_losses_received: eval_losses.clone(),
            }),
        });
    }

    let initial = init_parameters(&spec).unwrap();
    let server = ServerState::new(spec, method, initial, 77).unwrap();
    ManualSession {
        server,
        links,
        handles,
        assignments,
        eval_losses,
    }
}

impl ManualSession {
    fn run_epochs(&mut self, epochs: usize) {
        self.server.broadcast_initial(&mut self.links).unwrap();
        for e in 1..=epochs {
            run_epoch(&mut self.server, &mut self.links).unwrap();
            if e < epochs {
                self.server.broadcast_epoch_end(&mut self.links).unwrap();
            }
        }
        self.server.broadcast_shutdown(&mut self.links).unwrap();
    }

    fn finish(self) -> ServerState {
        drop(self.links);
        for handle in self.handles {
            handle.join().unwrap().unwrap();
        }
        self.server
    }
}

#[test]
fn fedavg_of_identical_clients_equals_the_single_client_model() {
    // Two clients with the same data and the same training seed produce the
    // same local model; their FedAvg must be exactly that model, which a
    // one-client round exposes directly.
    let mut duo = manual_session(AggregationMethod::FedAvg, 2, 123, 0.001);
    duo.run_epochs(1);
    let duo_server = duo.finish();

    let mut solo = manual_session(AggregationMethod::FedAvg, 1, 123, 0.001);
    solo.run_epochs(1);
    let solo_server = solo.finish();

    assert_eq!(duo_server.global_params(), solo_server.global_params());
}

#[test]
fn zero_learning_rate_keeps_the_initial_model_and_its_loss() {
    // expected untrained loss: sum of per-client SSE of the initial model
    let spec = tiny_spec(5);
    let datasets = tiny_datasets(2, 31);
    let template = &datasets[0];

    for method in [AggregationMethod::FedAvg, AggregationMethod::FullSoftmax] {
        let mut session = manual_session(method, 2, 9, 0.0);
        let initial = session.server.global_params().clone();
        let per_client = eval::evaluate_model_on_validation(
            &spec,
            &initial,
            &template.validation_windows,
            eval::Metric::Sse,
        )
        .unwrap();

        session.run_epochs(1);
        let server = session.finish();
        assert_eq!(server.global_params(), &initial, "{method}");
        let report = &server.history()[0];
        assert!(
            (report.global_val_loss - 2.0 * per_client).abs() <= 1e-9 * report.global_val_loss
        );
    }
}

#[test]
fn full_policy_issues_n_squared_evaluations_and_random_exactly_n() {
    let n = 4;
    let mut full = manual_session(AggregationMethod::FullSoftmax, n, 3, 0.001);
    full.run_epochs(1);
    assert_eq!(full.assignments.load(Ordering::SeqCst), n * n);
    assert_eq!(full.eval_losses.load(Ordering::SeqCst), n * n);
    full.finish();

    let mut random = manual_session(AggregationMethod::RandomSoftmax, n, 3, 0.001);
    random.run_epochs(1);
    assert_eq!(random.assignments.load(Ordering::SeqCst), n);
    assert_eq!(random.eval_losses.load(Ordering::SeqCst), n);
    random.finish();

    let mut fedavg = manual_session(AggregationMethod::FedAvg, n, 3, 0.001);
    fedavg.run_epochs(1);
    assert_eq!(fedavg.assignments.load(Ordering::SeqCst), 0);
    fedavg.finish();
}

#[test]
fn identical_clients_make_all_methods_agree() {
    let mut globals = Vec::new();
    for method in AggregationMethod::ALL {
        let mut session = manual_session(method, 3, 55, 0.001);
        session.run_epochs(2);
        let server = session.finish();
        globals.push((method, server.global_params().clone()));
    }
    let reference = &globals[0].1;
    for (method, global) in &globals[1..] {
        assert_eq!(
            global, reference,
            "{method} diverged from fedavg on identical clients"
        );
    }
}

#[test]
fn decentralized_validation_sum_equals_pooled_sse() {
    let spec = tiny_spec(8);
    let params = init_parameters(&spec).unwrap();
    for seed in [1u64, 2, 3] {
        let datasets = tiny_datasets(6, seed);
        let mut decentralized = 0.0f64;
        for d in &datasets {
            decentralized += eval::evaluate_model_on_validation(
                &spec,
                &params,
                &d.validation_windows,
                eval::Metric::Sse,
            )
            .unwrap();
        }
        // centralized: straight sum of squared residuals over the pooled
        // windows, in the same client order
        let mut pooled = 0.0f64;
        for d in &datasets {
            let batch = eval::batch_from_windows(&d.validation_windows).unwrap();
            let preds = fedrul_core::nn::forward(&spec, &params, &batch, false, 0).unwrap();
            for (p, t) in preds.iter().zip(batch.targets()) {
                let r = *p as f64 - *t as f64;
                pooled += r * r;
            }
        }
        let rel = (decentralized - pooled).abs() / pooled.max(1e-12);
        assert!(rel <= 1e-6, "seed {seed}: relative gap {rel}");
    }
}

#[test]
fn reruns_reproduce_history_bit_for_bit() {
    let config = RunConfig {
        client: ClientConfig::default(),
        train_seed: 11,
        assignment_seed: 12,
        mode: ExecutionMode::InProc,
        recv_timeout: TIMEOUT,
        ..RunConfig::new(tiny_spec(5), AggregationMethod::FullBest, 3)
    };
    let a = run_training(&config, tiny_datasets(3, 77)).unwrap();
    let b = run_training(&config, tiny_datasets(3, 77)).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.best.params, b.best.params);
    assert_eq!(a.best.epoch, b.best.epoch);
    assert_eq!(a.final_params, b.final_params);
}

#[test]
fn single_thread_mode_matches_threaded_channels() {
    let base = RunConfig {
        train_seed: 21,
        assignment_seed: 22,
        recv_timeout: TIMEOUT,
        ..RunConfig::new(tiny_spec(5), AggregationMethod::RandomSoftmax, 2)
    };
    let threaded = run_training(&base, tiny_datasets(3, 13)).unwrap();
    let single = run_training(
        &RunConfig {
            mode: ExecutionMode::SingleThread,
            ..base
        },
        tiny_datasets(3, 13),
    )
    .unwrap();
    assert_eq!(threaded.history, single.history);
    assert_eq!(threaded.best.params, single.best.params);
}

#[test]
fn epoch_aborts_with_a_diagnostic_when_a_client_stalls() {
    // One link has no worker behind it: the epoch must abort naming the
    // client instead of aggregating a partial round.
    let spec = tiny_spec(5);
    let datasets = tiny_datasets(2, 31);

    let mut links = Vec::new();
    let mut handles = Vec::new();
    // client 1 works normally
    let healthy = ClientState::new(
        ClientId(1),
        spec.clone(),
        datasets[0].clone(),
        ClientConfig::default(),
        1,
    )
    .unwrap();
    let n_train = datasets[0].n_train;
    let (server_end, client_end) = channel_pair(Duration::from_millis(200));
    handles.push(std::thread::spawn(move || {
        // the worker exits with a transport error once the server gives up
        let _ = drive_worker(client_end, ClientWorker::new(healthy));
    }));
    links.push(ClientLink {
        id: ClientId(1),
        n_train,
        transport: Box::new(server_end),
    });
    // client 2 never answers
    let (dead_end, _silent) = channel_pair(Duration::from_millis(200));
    links.push(ClientLink {
        id: ClientId(2),
        n_train,
        transport: Box::new(dead_end),
    });

    let initial = init_parameters(&spec).unwrap();
    let mut server = ServerState::new(spec, AggregationMethod::FedAvg, initial, 0).unwrap();
    server.broadcast_initial(&mut links).unwrap();
    let err = run_epoch(&mut server, &mut links).unwrap_err();
    let text = err.to_string();
    assert!(text.contains("client 2"), "diagnostic was: {text}");
    assert!(server.history().is_empty());
    assert!(server.best_checkpoint().is_none());

    drop(links);
    for handle in handles {
        handle.join().unwrap();
    }
}

#[test]
fn best_checkpoint_dominates_every_history_entry() {
    let config = RunConfig {
        train_seed: 31,
        assignment_seed: 32,
        recv_timeout: TIMEOUT,
        ..RunConfig::new(tiny_spec(5), AggregationMethod::FedAvg, 4)
    };
    let outcome = run_training(&config, tiny_datasets(3, 19)).unwrap();
    for report in &outcome.history {
        assert!(outcome.best.loss <= report.global_val_loss);
    }
}
