//! Federated learning runtime and benchmark core for remaining-useful-life
//! (RUL) prognostics.
//!
//! The crate is organised around four subsystems:
//!
//! - [`nn`] — a minimal feed-forward network engine (1D convolutions, dense
//!   layers, ReLU, inverted dropout, Adam) with exact analytic gradients.
//! - [`data`] — per-client dataset construction: synthetic run-to-failure
//!   generation, CSV ingestion, bucket-mean aggregation, per-engine min-max
//!   normalization, flight-level train/validation splits, sliding-window
//!   extraction and Gaussian sensor-noise injection.
//! - [`agg`] — evaluation-score computation (full and random validation
//!   policies) and global-model aggregation (FedAvg, best-model selection,
//!   softmax weighting).
//! - [`fl`] — the epoch orchestration (train, upload, evaluate, aggregate,
//!   broadcast, validate, report), best-checkpoint tracking, and the binary
//!   wire protocol with in-process and TCP transports.
//!
//! All operations are deterministic functions of their inputs and explicit
//! seeds; nothing in the crate reads ambient randomness or wall-clock state.

pub mod agg;
pub mod data;
pub mod fl;
pub mod nn;
pub mod seed;
pub mod testkit;

mod id;

pub use agg::AggregationMethod;
pub use id::ClientId;
pub use nn::{NetworkSpec, ParameterVector};
