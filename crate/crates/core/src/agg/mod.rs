//! Evaluation-score computation and global-model aggregation.
//!
//! Two validation policies score the clients' local models (everyone scores
//! everyone with a median, or a random one-to-one assignment), and three
//! aggregation rules turn local models into the next global model: FedAvg
//! (dataset-size weighted average), best-model selection (argmin of the
//! evaluation scores) and softmax weighting (z-score-normalized inverse
//! scores through a softmax).
//!
//! All functions are pure over immutable inputs and safe to call
//! concurrently.

use crate::nn::ParameterVector;
use crate::ClientId;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AggError {
    #[error("operation needs at least {needed} clients, got {found}")]
    TooFewClients { needed: usize, found: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("parameter vectors disagree in shape")]
    ShapeMismatch,
    #[error("invalid loss matrix: {0}")]
    InvalidLossMatrix(String),
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("evaluation score of client {client} is not finite and nonnegative")]
    InvalidScore { client: ClientId },
    #[error("invalid client weights: {0}")]
    InvalidWeights(String),
    #[error("training-set size must be at least 1")]
    EmptyTrainingSet,
}

/// Aggregation method selector, combining a validation policy with an
/// aggregation policy. `FedAvg` uses no validation policy at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggregationMethod {
    FedAvg,
    RandomBest,
    RandomSoftmax,
    FullBest,
    FullSoftmax,
}

impl AggregationMethod {
    pub const ALL: [AggregationMethod; 5] = [
        AggregationMethod::FedAvg,
        AggregationMethod::RandomBest,
        AggregationMethod::RandomSoftmax,
        AggregationMethod::FullBest,
        AggregationMethod::FullSoftmax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggregationMethod::FedAvg => "fedavg",
            AggregationMethod::RandomBest => "random-best",
            AggregationMethod::RandomSoftmax => "random-softmax",
            AggregationMethod::FullBest => "full-best",
            AggregationMethod::FullSoftmax => "full-softmax",
        }
    }

    pub fn uses_full_validation(self) -> bool {
        matches!(
            self,
            AggregationMethod::FullBest | AggregationMethod::FullSoftmax
        )
    }

    pub fn uses_random_validation(self) -> bool {
        matches!(
            self,
            AggregationMethod::RandomBest | AggregationMethod::RandomSoftmax
        )
    }

    pub fn selects_best(self) -> bool {
        matches!(
            self,
            AggregationMethod::RandomBest | AggregationMethod::FullBest
        )
    }
}

impl std::str::FromStr for AggregationMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fedavg" => Ok(AggregationMethod::FedAvg),
            "random-best" => Ok(AggregationMethod::RandomBest),
            "random-softmax" => Ok(AggregationMethod::RandomSoftmax),
            "full-best" => Ok(AggregationMethod::FullBest),
            "full-softmax" => Ok(AggregationMethod::FullSoftmax),
            other => Err(format!(
                "unknown aggregation method `{other}` (expected fedavg|random-best|random-softmax|full-best|full-softmax)"
            )),
        }
    }
}

impl std::fmt::Display for AggregationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Scalar quality measure of one client's local model (RMSE units, flights).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationScore {
    pub client_id: ClientId,
    pub score: f64,
}

impl EvaluationScore {
    fn check(&self) -> Result<(), AggError> {
        if !self.score.is_finite() || self.score < 0.0 {
            return Err(AggError::InvalidScore {
                client: self.client_id,
            });
        }
        Ok(())
    }
}

/// A one-to-one allocation of local models to evaluating clients with no
/// client evaluating its own model (a derangement).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// model owner -> assigned evaluator
    evaluator_of: BTreeMap<ClientId, ClientId>,
}

impl Assignment {
    /// Builds from `(model_owner, evaluator)` pairs, enforcing the bijection
    /// and no-self-evaluation invariants.
    pub fn from_pairs(pairs: &[(ClientId, ClientId)]) -> Result<Self, AggError> {
        let mut evaluator_of = BTreeMap::new();
        let mut evaluators = std::collections::BTreeSet::new();
        for &(owner, evaluator) in pairs {
            if owner == evaluator {
                return Err(AggError::InvalidAssignment(format!(
                    "client {owner} would evaluate its own model"
                )));
            }
            if evaluator_of.insert(owner, evaluator).is_some() {
                return Err(AggError::InvalidAssignment(format!(
                    "model of client {owner} assigned twice"
                )));
            }
            if !evaluators.insert(evaluator) {
                return Err(AggError::InvalidAssignment(format!(
                    "client {evaluator} assigned more than one model"
                )));
            }
        }
        let owners: std::collections::BTreeSet<_> = evaluator_of.keys().copied().collect();
        if owners != evaluators {
            return Err(AggError::InvalidAssignment(
                "evaluator set differs from model-owner set".into(),
            ));
        }
        Ok(Assignment { evaluator_of })
    }

    /// The evaluator assigned to the model of `owner`.
    pub fn evaluator_of(&self, owner: ClientId) -> Option<ClientId> {
        self.evaluator_of.get(&owner).copied()
    }

    /// The model owner whose model was assigned to `evaluator`.
    pub fn model_for(&self, evaluator: ClientId) -> Option<ClientId> {
        self.evaluator_of
            .iter()
            .find(|&(_, &e)| e == evaluator)
            .map(|(&o, _)| o)
    }

    /// `(model_owner, evaluator)` pairs in ascending owner order.
    pub fn pairs(&self) -> impl Iterator<Item = (ClientId, ClientId)> + '_ {
        self.evaluator_of.iter().map(|(&o, &e)| (o, e))
    }

    pub fn len(&self) -> usize {
        self.evaluator_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evaluator_of.is_empty()
    }
}

/// Per-client aggregation weights: each in [0, 1], summing to 1 within 1e-9.
/// [`softmax_weights`] produces strictly interior weights; the closed bounds
/// admit the degenerate single-client combinations used in aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientWeights {
    weights: Vec<(ClientId, f64)>,
}

impl ClientWeights {
    pub fn new(weights: Vec<(ClientId, f64)>) -> Result<Self, AggError> {
        if weights.is_empty() {
            return Err(AggError::EmptyInput);
        }
        let mut sum = 0.0;
        for &(id, w) in &weights {
            if !w.is_finite() || !(0.0..=1.0).contains(&w) {
                return Err(AggError::InvalidWeights(format!(
                    "weight {w} of client {id} outside [0, 1]"
                )));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(AggError::InvalidWeights(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(ClientWeights { weights })
    }

    pub fn entries(&self) -> &[(ClientId, f64)] {
        &self.weights
    }

    pub fn weight_of(&self, id: ClientId) -> Option<f64> {
        self.weights.iter().find(|(c, _)| *c == id).map(|(_, w)| *w)
    }
}

/// Federated averaging: the global vector is the dataset-size weighted
/// average of the local vectors, accumulated in `f64` as
/// `sum_i n_i * w_i / n`.
pub fn fedavg(models: &[(ParameterVector, usize)]) -> Result<ParameterVector, AggError> {
    if models.is_empty() {
        return Err(AggError::EmptyInput);
    }
    let layout = models[0].0.layout();
    let len = models[0].0.len();
    let mut acc = vec![0.0f64; len];
    let mut total = 0u64;
    for (params, n_train) in models {
        if *n_train == 0 {
            return Err(AggError::EmptyTrainingSet);
        }
        if params.len() != len || params.layout() != layout {
            return Err(AggError::ShapeMismatch);
        }
        total += *n_train as u64;
        let w = *n_train as f64;
        for (a, &v) in acc.iter_mut().zip(params.values()) {
            *a += w * v as f64;
        }
    }
    let total = total as f64;
    let values: Vec<f32> = acc.into_iter().map(|a| (a / total) as f32).collect();
    Ok(models[0]
        .0
        .with_values(values)
        .expect("length preserved by construction"))
}

/// Full validation policy: `E_j` is the median over all evaluators `i` of
/// the loss of model `j` on validation set `i`. `losses[i][j]` must be a
/// complete N by N matrix of finite, nonnegative values ordered like
/// `client_ids`; even column lengths take the mean of the two middle values.
pub fn eval_full(
    client_ids: &[ClientId],
    losses: &[Vec<f64>],
) -> Result<Vec<EvaluationScore>, AggError> {
    let n = client_ids.len();
    if n == 0 {
        return Err(AggError::EmptyInput);
    }
    if losses.len() != n || losses.iter().any(|row| row.len() != n) {
        return Err(AggError::InvalidLossMatrix(format!(
            "expected a {n}x{n} matrix"
        )));
    }
    for (i, row) in losses.iter().enumerate() {
        for (j, &l) in row.iter().enumerate() {
            if !l.is_finite() || l < 0.0 {
                return Err(AggError::InvalidLossMatrix(format!(
                    "entry [{i}][{j}] = {l} is not finite and nonnegative"
                )));
            }
        }
    }
    let scores = (0..n)
        .map(|j| {
            let mut column: Vec<f64> = losses.iter().map(|row| row[j]).collect();
            column.sort_by(|a, b| a.partial_cmp(b).expect("finite checked above"));
            let mid = n / 2;
            let median = if n % 2 == 1 {
                column[mid]
            } else {
                (column[mid - 1] + column[mid]) / 2.0
            };
            EvaluationScore {
                client_id: client_ids[j],
                score: median,
            }
        })
        .collect();
    Ok(scores)
}

/// Random validation policy: `E_j` is the single loss the assigned evaluator
/// reported for model `j`. `losses` holds `(model_owner, loss)` pairs and
/// must cover the assignment exactly; output is in ascending owner order.
pub fn eval_random(
    assignment: &Assignment,
    losses: &[(ClientId, f64)],
) -> Result<Vec<EvaluationScore>, AggError> {
    if losses.len() != assignment.len() {
        return Err(AggError::InvalidAssignment(format!(
            "expected {} losses, got {}",
            assignment.len(),
            losses.len()
        )));
    }
    let by_owner: BTreeMap<ClientId, f64> = losses.iter().copied().collect();
    if by_owner.len() != losses.len() {
        return Err(AggError::InvalidAssignment(
            "duplicate loss for a model owner".into(),
        ));
    }
    let mut scores = Vec::with_capacity(assignment.len());
    for (owner, _) in assignment.pairs() {
        let &score = by_owner.get(&owner).ok_or_else(|| {
            AggError::InvalidAssignment(format!("missing loss for model of client {owner}"))
        })?;
        let entry = EvaluationScore {
            client_id: owner,
            score,
        };
        entry.check()?;
        scores.push(entry);
    }
    Ok(scores)
}

/// Draws a uniform random derangement of the clients: shuffled permutations
/// from a ChaCha stream over `seed` are rejected until none maps a client to
/// itself. Needs at least two clients.
pub fn draw_assignment(client_ids: &[ClientId], seed: u64) -> Result<Assignment, AggError> {
    if client_ids.len() < 2 {
        return Err(AggError::TooFewClients {
            needed: 2,
            found: client_ids.len(),
        });
    }
    let unique: std::collections::BTreeSet<_> = client_ids.iter().collect();
    if unique.len() != client_ids.len() {
        return Err(AggError::InvalidAssignment("duplicate client id".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut evaluators: Vec<ClientId> = client_ids.to_vec();
    loop {
        evaluators.shuffle(&mut rng);
        if client_ids
            .iter()
            .zip(&evaluators)
            .all(|(owner, evaluator)| owner != evaluator)
        {
            break;
        }
    }
    let pairs: Vec<(ClientId, ClientId)> = client_ids
        .iter()
        .copied()
        .zip(evaluators.iter().copied())
        .collect();
    Assignment::from_pairs(&pairs)
}

/// Softmax aggregation weights from evaluation scores:
/// inverse scores `A_i = 1 / max(E_i, 1e-12)`, z-scores over the
/// (N-1)-denominator standard deviation, softmax of the z-scores.
/// All-equal scores (sigma below 1e-12) fall back to uniform weights.
pub fn softmax_weights(scores: &[EvaluationScore]) -> Result<ClientWeights, AggError> {
    let n = scores.len();
    if n < 2 {
        return Err(AggError::TooFewClients { needed: 2, found: n });
    }
    for s in scores {
        s.check()?;
    }
    let inv: Vec<f64> = scores.iter().map(|s| 1.0 / s.score.max(1e-12)).collect();
    let mean = inv.iter().sum::<f64>() / n as f64;
    let sigma =
        (inv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1) as f64).sqrt();

    let weights = if sigma < 1e-12 {
        let uniform = 1.0 / n as f64;
        scores.iter().map(|s| (s.client_id, uniform)).collect()
    } else {
        let z: Vec<f64> = inv.iter().map(|a| (a - mean) / sigma).collect();
        let z_max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = z.iter().map(|&v| (v - z_max).exp()).collect();
        let denom: f64 = exp.iter().sum();
        scores
            .iter()
            .zip(&exp)
            .map(|(s, &e)| (s.client_id, e / denom))
            .collect()
    };
    ClientWeights::new(weights)
}

/// Coordinate-wise weighted average `w_G = sum_i alpha_i * w_i`, accumulated
/// in `f64`. Model and weight entries must cover the same clients.
pub fn aggregate_softmax(
    models: &[(ClientId, ParameterVector)],
    weights: &ClientWeights,
) -> Result<ParameterVector, AggError> {
    if models.is_empty() {
        return Err(AggError::EmptyInput);
    }
    if models.len() != weights.entries().len() {
        return Err(AggError::InvalidWeights(format!(
            "{} models but {} weights",
            models.len(),
            weights.entries().len()
        )));
    }
    let layout = models[0].1.layout();
    let len = models[0].1.len();
    let mut acc = vec![0.0f64; len];
    for (id, params) in models {
        if params.len() != len || params.layout() != layout {
            return Err(AggError::ShapeMismatch);
        }
        let alpha = weights
            .weight_of(*id)
            .ok_or_else(|| AggError::InvalidWeights(format!("no weight for client {id}")))?;
        for (a, &v) in acc.iter_mut().zip(params.values()) {
            *a += alpha * v as f64;
        }
    }
    let values: Vec<f32> = acc.into_iter().map(|a| a as f32).collect();
    Ok(models[0]
        .1
        .with_values(values)
        .expect("length preserved by construction"))
}

/// Best-model aggregation: the global model is the local model with the
/// lowest evaluation score; ties go to the lowest client id.
pub fn select_best(
    scores: &[EvaluationScore],
    models: &[(ClientId, ParameterVector)],
) -> Result<(ParameterVector, ClientId), AggError> {
    if scores.is_empty() {
        return Err(AggError::EmptyInput);
    }
    for s in scores {
        s.check()?;
    }
    let best = scores
        .iter()
        .min_by(|a, b| {
            (a.score, a.client_id)
                .partial_cmp(&(b.score, b.client_id))
                .expect("finite checked above")
        })
        .expect("nonempty");
    let params = models
        .iter()
        .find(|(id, _)| *id == best.client_id)
        .map(|(_, p)| p.clone())
        .ok_or_else(|| {
            AggError::InvalidAssignment(format!("no model for client {}", best.client_id))
        })?;
    Ok((params, best.client_id))
}
