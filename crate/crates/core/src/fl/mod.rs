//! Federated epoch orchestration and messaging.
//!
//! Each training round walks the same seven steps: every client trains the
//! current global model for one local epoch, uploads its local model, the
//! server scores the local models under the configured validation policy and
//! aggregates them, broadcasts the new global model, clients validate it on
//! their own validation sets and return scalar losses, and the server sums
//! those into the global validation loss and tracks the best checkpoint.
//!
//! Clients and server exchange [`Message`]s over a pluggable [`Transport`]:
//! an inline single-threaded driver, in-process channels with one thread per
//! client, or framed TCP. All three are observationally equivalent.

mod client;
pub mod eval;
mod message;
mod runtime;
mod server;
mod transport;
mod wire;

pub use client::{ClientConfig, ClientState, ClientWorker};
pub use message::Message;
pub use runtime::{drive_worker, run_training, ExecutionMode, RunConfig, TrainingOutcome};
pub use server::{run_epoch, AggregationOutcome, Checkpoint, ClientLink, EpochReport, ServerState};
pub use transport::{channel_pair, ChannelTransport, TcpTransport, Transport, TransportError};
pub use wire::{decode_message, encode_message, WireError};

use crate::agg::AggError;
use crate::data::DataError;
use crate::nn::NnError;
use crate::{AggregationMethod, ClientId};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Agg(#[from] AggError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("transport failure with client {client}: {source}")]
    Transport {
        client: ClientId,
        source: TransportError,
    },
    #[error("protocol violation at client {client}: {detail}")]
    Protocol { client: ClientId, detail: String },
    #[error("client {client} has no training windows")]
    EmptyTrainingSet { client: ClientId },
    #[error("client {client} has no validation windows")]
    EmptyValidationSet { client: ClientId },
    #[error("flight {flight} of {engine} is too short for a single window")]
    FlightTooShort { engine: String, flight: u32 },
    #[error("{method} needs at least {needed} clients, got {found}")]
    TooFewClients {
        method: AggregationMethod,
        needed: usize,
        found: usize,
    },
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("client worker panicked")]
    WorkerPanic,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
