use super::client::{ClientConfig, ClientState, ClientWorker};
use super::server::{run_epoch, Checkpoint, ClientLink, EpochReport, ServerState};
use super::transport::{channel_pair, TcpTransport, Transport, TransportError};
use super::{Message, RuntimeError};
use crate::agg::AggregationMethod;
use crate::data::ClientDataset;
use crate::nn::{init_parameters, NetworkSpec, ParameterVector};
use crate::seed;
use std::collections::VecDeque;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::thread::JoinHandle;
use std::time::Duration;

/// How client workers execute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecutionMode {
    /// Clients run inline inside the server loop; fully single-threaded and
    /// useful for deterministic debugging.
    SingleThread,
    /// One thread per client, connected over in-process channels.
    InProc,
    /// One thread per client, connected over loopback (or `connect`-dialed)
    /// TCP sockets carrying wire-format frames.
    Tcp {
        listen: SocketAddr,
        /// Address the workers dial; defaults to the bound listen address.
        connect: Option<SocketAddr>,
    },
}

/// Full configuration of a federated training run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: NetworkSpec,
    pub method: AggregationMethod,
    pub epochs: usize,
    pub client: ClientConfig,
    /// Base seed of the per-client training streams (client `i` trains from
    /// a stream derived with salt `i`).
    pub train_seed: u64,
    /// Seed of the server's random-assignment stream.
    pub assignment_seed: u64,
    pub mode: ExecutionMode,
    pub recv_timeout: Duration,
}

impl RunConfig {
    pub fn new(spec: NetworkSpec, method: AggregationMethod, epochs: usize) -> Self {
        RunConfig {
            spec,
            method,
            epochs,
            client: ClientConfig::default(),
            train_seed: 0,
            assignment_seed: 0,
            mode: ExecutionMode::InProc,
            recv_timeout: Duration::from_secs(600),
        }
    }
}

/// Result of a training run: the best checkpoint by global validation loss
/// (what deployment would use), the final-epoch parameters, and the
/// per-epoch reports.
#[derive(Debug)]
pub struct TrainingOutcome {
    pub best: Checkpoint,
    pub final_params: ParameterVector,
    pub history: Vec<EpochReport>,
}

/// Receive-dispatch loop of one client worker; runs until shutdown. Public
/// so external processes can host workers over their own transports.
pub fn drive_worker<T: Transport>(
    mut transport: T,
    mut worker: ClientWorker,
) -> Result<(), RuntimeError> {
    while !worker.is_done() {
        let msg = transport.recv().map_err(|source| RuntimeError::Transport {
            client: worker.id(),
            source,
        })?;
        for reply in worker.handle(msg)? {
            transport.send(&reply).map_err(|source| RuntimeError::Transport {
                client: worker.id(),
                source,
            })?;
        }
    }
    Ok(())
}

/// A transport that executes its client inline: sends run the worker
/// synchronously, receives pop the queued replies.
struct InlineClient {
    worker: ClientWorker,
    queue: VecDeque<Message>,
}

impl Transport for InlineClient {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        let replies = self
            .worker
            .handle(msg.clone())
            .map_err(|e| TransportError::Protocol(e.to_string()))?;
        self.queue.extend(replies);
        Ok(())
    }

    fn recv(&mut self) -> Result<Message, TransportError> {
        self.queue
            .pop_front()
            .ok_or_else(|| TransportError::Protocol("no reply pending from inline client".into()))
    }
}

struct Session {
    links: Vec<ClientLink>,
    handles: Vec<JoinHandle<Result<(), RuntimeError>>>,
}

fn build_session(
    mode: &ExecutionMode,
    workers: Vec<(ClientWorker, usize)>,
    timeout: Duration,
) -> Result<Session, RuntimeError> {
    let mut links = Vec::with_capacity(workers.len());
    let mut handles = Vec::new();

    match mode {
        ExecutionMode::SingleThread => {
            for (worker, n_train) in workers {
                let id = worker.id();
                links.push(ClientLink {
                    id,
                    n_train,
                    transport: Box::new(InlineClient {
                        worker,
                        queue: VecDeque::new(),
                    }),
                });
            }
        }
        ExecutionMode::InProc => {
            for (worker, n_train) in workers {
                let id = worker.id();
                let (server_end, client_end) = channel_pair(timeout);
                handles.push(std::thread::spawn(move || drive_worker(client_end, worker)));
                links.push(ClientLink {
                    id,
                    n_train,
                    transport: Box::new(server_end),
                });
            }
        }
        ExecutionMode::Tcp { listen, connect } => {
            let listener = TcpListener::bind(listen)?;
            let dial = connect.unwrap_or(listener.local_addr()?);
            for (worker, n_train) in workers {
                let id = worker.id();
                handles.push(std::thread::spawn(move || {
                    let stream = TcpStream::connect(dial).map_err(|source| {
                        RuntimeError::Transport {
                            client: id,
                            source: TransportError::Io(source),
                        }
                    })?;
                    let transport = TcpTransport::new(stream, timeout).map_err(|source| {
                        RuntimeError::Transport { client: id, source }
                    })?;
                    drive_worker(transport, worker)
                }));
                // accept immediately so connections map to client ids in
                // registry order
                let (stream, _) = listener.accept()?;
                let transport = TcpTransport::new(stream, timeout)
                    .map_err(|source| RuntimeError::Transport { client: id, source })?;
                links.push(ClientLink {
                    id,
                    n_train,
                    transport: Box::new(transport),
                });
            }
        }
    }

    Ok(Session { links, handles })
}

fn join_workers(handles: Vec<JoinHandle<Result<(), RuntimeError>>>) -> Result<(), RuntimeError> {
    let mut first_error = None;
    for handle in handles {
        match handle.join() {
            Ok(Ok(())) => {}
            Ok(Err(e)) => first_error = first_error.or(Some(e)),
            Err(_) => first_error = first_error.or(Some(RuntimeError::WorkerPanic)),
        }
    }
    first_error.map_or(Ok(()), Err)
}

/// Runs the full federated training: `epochs` rounds of the seven-step
/// protocol over the given client datasets, returning the best checkpoint
/// (lowest global validation loss), the final parameters and the history.
///
/// Datasets are registered in ascending client-id order; client `i` trains
/// from a stream derived from `train_seed` and salt `i`. Reruns with an
/// identical config reproduce the history bit for bit.
pub fn run_training(
    config: &RunConfig,
    datasets: Vec<ClientDataset>,
) -> Result<TrainingOutcome, RuntimeError> {
    if datasets.is_empty() {
        return Err(RuntimeError::InvalidConfig("no client datasets".into()));
    }
    if config.epochs == 0 {
        return Err(RuntimeError::InvalidConfig("epochs must be at least 1".into()));
    }
    if config.method != AggregationMethod::FedAvg && datasets.len() < 2 {
        return Err(RuntimeError::TooFewClients {
            method: config.method,
            needed: 2,
            found: datasets.len(),
        });
    }
    let mut datasets = datasets;
    datasets.sort_by_key(|d| d.client_id);
    if datasets.windows(2).any(|w| w[0].client_id == w[1].client_id) {
        return Err(RuntimeError::InvalidConfig("duplicate client id".into()));
    }

    let mut workers = Vec::with_capacity(datasets.len());
    for dataset in datasets {
        let id = dataset.client_id;
        let n_train = dataset.n_train;
        let state = ClientState::new(
            id,
            config.spec.clone(),
            dataset,
            config.client.clone(),
            seed::derive(config.train_seed, id.as_u16() as u64),
        )?;
        workers.push((ClientWorker::new(state), n_train));
    }

    let initial = init_parameters(&config.spec)?;
    let mut server = ServerState::new(
        config.spec.clone(),
        config.method,
        initial,
        config.assignment_seed,
    )?;

    let session = build_session(&config.mode, workers, config.recv_timeout)?;
    let Session { mut links, handles } = session;

    let run = (|| -> Result<(), RuntimeError> {
        server.broadcast_initial(&mut links)?;
        for epoch in 1..=config.epochs {
            let report = run_epoch(&mut server, &mut links)?;
            log::debug!(
                "epoch {}: global validation loss {:.6}",
                report.epoch,
                report.global_val_loss
            );
            if epoch < config.epochs {
                server.broadcast_epoch_end(&mut links)?;
            } else {
                server.broadcast_shutdown(&mut links)?;
            }
        }
        Ok(())
    })();

    match run {
        Ok(()) => {
            drop(links);
            join_workers(handles)?;
        }
        Err(e) => {
            // tear the links down so worker threads exit, then surface the
            // original failure
            drop(links);
            let _ = join_workers(handles);
            return Err(e);
        }
    }

    let best = server
        .best_checkpoint()
        .cloned()
        .expect("at least one epoch ran");
    Ok(TrainingOutcome {
        best,
        final_params: server.global_params().clone(),
        history: server.history().to_vec(),
    })
}
