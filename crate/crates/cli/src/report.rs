//! CSV emission. Files are written atomically (temp file in the target
//! directory, then rename), losses print with four decimals, and rows carry
//! the resolved config hash, so identical runs produce byte-identical files.

use crate::experiment::{ResultRow, SelectionRow};
use anyhow::{Context, Result};
use fedrul_core::fl::{AggregationOutcome, EpochReport};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

/// First 16 hex characters of the SHA-256 of `bytes`.
pub fn sha256_hex_prefix(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(16);
    for byte in digest.iter().take(8) {
        write!(hex, "{byte:02x}").expect("writing to a string");
    }
    hex
}

/// Convenience wrapper used by the CLI to fingerprint arbitrary content.
pub fn config_hash(content: &str) -> String {
    sha256_hex_prefix(content.as_bytes())
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    std::fs::write(&tmp, content)
        .with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("cannot move results into {}", path.display()))?;
    Ok(())
}

fn join4(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.4}"))
        .collect::<Vec<_>>()
        .join("|")
}

/// Strips CSV-hostile characters from free-text fields.
fn sanitize(text: &str) -> String {
    text.replace([',', '\n', '\r', '"'], ";")
}

pub const RESULTS_HEADER: &str =
    "scenario,method,alpha,status,best_epoch,engine_rmse,engine_mae,overall_rmse,overall_mae,note,config_hash";

/// Writes result rows. Per-engine metric lists are `|`-joined in test-engine
/// order; failed rows keep empty metric fields and carry the error in
/// `note`. `wall_time_secs` is intentionally not persisted.
pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for row in rows {
        let (status, note) = match &row.failure {
            None => ("ok", String::new()),
            Some(message) => ("failed", sanitize(message)),
        };
        let (engine_rmse, engine_mae, overall_rmse, overall_mae) = if row.failure.is_none() {
            (
                join4(&row.per_engine_rmse),
                join4(&row.per_engine_mae),
                format!("{:.4}", row.overall_rmse),
                format!("{:.4}", row.overall_mae),
            )
        } else {
            (String::new(), String::new(), String::new(), String::new())
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            sanitize(&row.scenario),
            row.method,
            row.alpha,
            status,
            row.best_epoch,
            engine_rmse,
            engine_mae,
            overall_rmse,
            overall_mae,
            note,
            row.config_hash,
        )
        .expect("writing to a string");
    }
    write_atomic(path, &out)
}

pub const SELECTIONS_HEADER: &str =
    "method,alpha,client_id,times_selected,epochs,config_hash";

/// Writes per-client selection counts of best-model runs.
pub fn write_selections_csv(path: &Path, rows: &[SelectionRow]) -> Result<()> {
    let mut out = String::from(SELECTIONS_HEADER);
    out.push('\n');
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.method, row.alpha, row.client_id, row.times_selected, row.epochs, row.config_hash,
        )
        .expect("writing to a string");
    }
    write_atomic(path, &out)
}

fn aggregation_summary(outcome: &AggregationOutcome) -> String {
    match outcome {
        AggregationOutcome::FedAvg { .. } => "fedavg".to_string(),
        AggregationOutcome::Selected { client_id } => format!("selected:{client_id}"),
        AggregationOutcome::Softmax { weights } => weights
            .entries()
            .iter()
            .map(|(id, w)| format!("w{id}:{w:.4}"))
            .collect::<Vec<_>>()
            .join("|"),
    }
}

pub const EPOCH_LOG_HEADER: &str = "epoch,global_val_loss,aggregation";

/// Writes the per-epoch report log of one run.
pub fn write_epoch_log(path: &Path, history: &[EpochReport]) -> Result<()> {
    let mut out = String::from(EPOCH_LOG_HEADER);
    out.push('\n');
    for report in history {
        writeln!(
            out,
            "{},{:.6},{}",
            report.epoch,
            report.global_val_loss,
            aggregation_summary(&report.aggregation),
        )
        .expect("writing to a string");
    }
    write_atomic(path, &out)
}
