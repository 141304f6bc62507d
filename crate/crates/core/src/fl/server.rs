use super::{Message, RuntimeError, Transport, TransportError};
use crate::agg::{self, AggregationMethod, ClientWeights, EvaluationScore};
use crate::nn::{NetworkSpec, ParameterLayout, ParameterVector};
use crate::ClientId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

/// How the global model of an epoch was formed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum AggregationOutcome {
    /// Dataset-size fractions used by FedAvg.
    FedAvg { fractions: Vec<(ClientId, f64)> },
    /// Softmax weights over the evaluation scores.
    Softmax { weights: ClientWeights },
    /// The client whose local model was selected outright.
    Selected { client_id: ClientId },
}

/// Record of one completed epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochReport {
    pub epoch: u32,
    /// Sum of the per-client validation sums, in registry order.
    pub global_val_loss: f64,
    pub per_client_val_sum: Vec<(ClientId, f64)>,
    /// Evaluation scores of the round; absent under FedAvg.
    pub eval_scores: Option<Vec<EvaluationScore>>,
    pub aggregation: AggregationOutcome,
}

/// Global parameters achieving the lowest validation loss so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: u32,
    pub loss: f64,
    pub params: ParameterVector,
}

/// Strict improvement keeps the earliest epoch on ties.
pub(crate) fn improves(best: Option<&Checkpoint>, loss: f64) -> bool {
    best.is_none_or(|b| loss < b.loss)
}

/// The server's view of a client: identity, training-set size (fixed at
/// registration) and the message link.
pub struct ClientLink {
    pub id: ClientId,
    pub n_train: usize,
    pub transport: Box<dyn Transport>,
}

/// Server state across a training run. The client registry order is fixed
/// for the whole run and anchors every deterministic iteration.
pub struct ServerState {
    spec: NetworkSpec,
    layout: ParameterLayout,
    method: AggregationMethod,
    epoch: u32,
    global: ParameterVector,
    best: Option<Checkpoint>,
    history: Vec<EpochReport>,
    assignment_rng: ChaCha20Rng,
}

impl ServerState {
    pub fn new(
        spec: NetworkSpec,
        method: AggregationMethod,
        initial: ParameterVector,
        assignment_seed: u64,
    ) -> Result<Self, RuntimeError> {
        let layout = spec.parameter_layout()?;
        if layout != *initial.layout() {
            return Err(RuntimeError::InvalidConfig(
                "initial parameters do not match the network spec".into(),
            ));
        }
        Ok(ServerState {
            spec,
            layout,
            method,
            epoch: 0,
            global: initial,
            best: None,
            history: Vec::new(),
            assignment_rng: ChaCha20Rng::seed_from_u64(assignment_seed),
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn method(&self) -> AggregationMethod {
        self.method
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn global_params(&self) -> &ParameterVector {
        &self.global
    }

    pub fn best_checkpoint(&self) -> Option<&Checkpoint> {
        self.best.as_ref()
    }

    pub fn history(&self) -> &[EpochReport] {
        &self.history
    }

    /// Sends the initial global model (epoch 0) to every client, which
    /// starts their first local training epoch.
    pub fn broadcast_initial(&self, links: &mut [ClientLink]) -> Result<(), RuntimeError> {
        let msg = Message::GlobalModel {
            epoch: 0,
            sender: ClientId::SERVER.as_u16(),
            params: self.global.values().to_vec(),
        };
        for link in links {
            send_to(link, &msg)?;
        }
        Ok(())
    }

    /// Closes epoch `epoch` on all clients: they start training the next
    /// round immediately.
    pub fn broadcast_epoch_end(&self, links: &mut [ClientLink]) -> Result<(), RuntimeError> {
        let msg = Message::EpochEnd {
            epoch: self.epoch,
            sender: ClientId::SERVER.as_u16(),
        };
        for link in links {
            send_to(link, &msg)?;
        }
        Ok(())
    }

    /// Tells all clients to terminate.
    pub fn broadcast_shutdown(&self, links: &mut [ClientLink]) -> Result<(), RuntimeError> {
        let msg = Message::Shutdown {
            epoch: self.epoch,
            sender: ClientId::SERVER.as_u16(),
        };
        for link in links {
            send_to(link, &msg)?;
        }
        Ok(())
    }
}

fn send_to(link: &mut ClientLink, msg: &Message) -> Result<(), RuntimeError> {
    link.transport.send(msg).map_err(|source| RuntimeError::Transport {
        client: link.id,
        source,
    })
}

fn recv_from(link: &mut ClientLink) -> Result<Message, RuntimeError> {
    link.transport.recv().map_err(|source| match source {
        TransportError::Timeout => RuntimeError::Transport {
            client: link.id,
            source: TransportError::Timeout,
        },
        other => RuntimeError::Transport {
            client: link.id,
            source: other,
        },
    })
}

/// Runs one federated epoch over the registered clients:
/// collect the local models, score them under the configured validation
/// policy, aggregate into the new global model, broadcast it, collect the
/// per-client validation sums, and append the epoch report (updating the
/// best checkpoint). Any client failure aborts the epoch with a diagnostic;
/// there is no partial aggregation.
pub fn run_epoch(
    server: &mut ServerState,
    links: &mut [ClientLink],
) -> Result<EpochReport, RuntimeError> {
    let epoch = server.epoch + 1;
    let ids: Vec<ClientId> = links.iter().map(|l| l.id).collect();

    // step 2: local models arrive in registry order
    let mut models: Vec<(ClientId, ParameterVector)> = Vec::with_capacity(links.len());
    for link in links.iter_mut() {
        let msg = recv_from(link)?;
        match msg {
            Message::LocalModel { epoch: e, sender, params }
                if e == epoch && sender == link.id.as_u16() =>
            {
                let params = ParameterVector::from_values(server.layout.clone(), params)
                    .map_err(|err| RuntimeError::Protocol {
                        client: link.id,
                        detail: format!("local model does not fit the network: {err}"),
                    })?;
                models.push((link.id, params));
            }
            other => {
                return Err(RuntimeError::Protocol {
                    client: link.id,
                    detail: format!(
                        "expected LocalModel for epoch {epoch}, got {} (epoch {})",
                        other.kind_name(),
                        other.epoch()
                    ),
                })
            }
        }
    }

    // step 3a: evaluation scores per the validation policy
    let eval_scores = collect_scores(server, links, &ids, &models, epoch)?;

    // step 3b (or plain FedAvg): the new global model
    let (global, aggregation) = match server.method {
        AggregationMethod::FedAvg => {
            let sized: Vec<(ParameterVector, usize)> = models
                .iter()
                .zip(links.iter())
                .map(|((_, p), link)| (p.clone(), link.n_train))
                .collect();
            let total: f64 = links.iter().map(|l| l.n_train as f64).sum();
            let fractions = links
                .iter()
                .map(|l| (l.id, l.n_train as f64 / total))
                .collect();
            (agg::fedavg(&sized)?, AggregationOutcome::FedAvg { fractions })
        }
        AggregationMethod::RandomSoftmax | AggregationMethod::FullSoftmax => {
            let scores = eval_scores.as_ref().expect("softmax methods have scores");
            let weights = agg::softmax_weights(scores)?;
            let global = agg::aggregate_softmax(&models, &weights)?;
            (global, AggregationOutcome::Softmax { weights })
        }
        AggregationMethod::RandomBest | AggregationMethod::FullBest => {
            let scores = eval_scores.as_ref().expect("best methods have scores");
            let (global, client_id) = agg::select_best(scores, &models)?;
            (global, AggregationOutcome::Selected { client_id })
        }
    };
    server.global = global;

    // step 4: broadcast the new global model
    let broadcast = Message::GlobalModel {
        epoch,
        sender: ClientId::SERVER.as_u16(),
        params: server.global.values().to_vec(),
    };
    for link in links.iter_mut() {
        send_to(link, &broadcast)?;
    }

    // steps 5-7: decentralized validation, summed in registry order
    let mut per_client_val_sum = Vec::with_capacity(links.len());
    let mut global_val_loss = 0.0f64;
    for link in links.iter_mut() {
        let msg = recv_from(link)?;
        match msg {
            Message::ValSumLoss { epoch: e, sender, loss }
                if e == epoch && sender == link.id.as_u16() && loss.is_finite() && loss >= 0.0 =>
            {
                per_client_val_sum.push((link.id, loss));
                global_val_loss += loss;
            }
            other => {
                return Err(RuntimeError::Protocol {
                    client: link.id,
                    detail: format!(
                        "expected ValSumLoss for epoch {epoch}, got {} (epoch {})",
                        other.kind_name(),
                        other.epoch()
                    ),
                })
            }
        }
    }

    let report = EpochReport {
        epoch,
        global_val_loss,
        per_client_val_sum,
        eval_scores,
        aggregation,
    };
    if improves(server.best.as_ref(), global_val_loss) {
        server.best = Some(Checkpoint {
            epoch,
            loss: global_val_loss,
            params: server.global.clone(),
        });
    }
    server.history.push(report.clone());
    server.epoch = epoch;
    Ok(report)
}

/// Step 3a. Full policy: every model goes to every client, which reports the
/// RMSE on its own validation set; scores are the per-model medians. Random
/// policy: a fresh derangement assigns each model to exactly one foreign
/// client. FedAvg skips evaluation entirely.
fn collect_scores(
    server: &mut ServerState,
    links: &mut [ClientLink],
    ids: &[ClientId],
    models: &[(ClientId, ParameterVector)],
    epoch: u32,
) -> Result<Option<Vec<EvaluationScore>>, RuntimeError> {
    let assignment_msg = |params: &ParameterVector| Message::EvalAssignment {
        epoch,
        sender: ClientId::SERVER.as_u16(),
        params: params.values().to_vec(),
    };

    if server.method.uses_full_validation() {
        // all assignments go out first so clients evaluate concurrently
        for link in links.iter_mut() {
            for (_, params) in models {
                let msg = assignment_msg(params);
                send_to(link, &msg)?;
            }
        }
        let mut losses = Vec::with_capacity(links.len());
        for link in links.iter_mut() {
            let mut row = Vec::with_capacity(models.len());
            for _ in models {
                row.push(expect_eval_loss(link, epoch)?);
            }
            losses.push(row);
        }
        return Ok(Some(agg::eval_full(ids, &losses)?));
    }

    if server.method.uses_random_validation() {
        let seed: u64 = server.assignment_rng.random();
        let assignment = agg::draw_assignment(ids, seed)?;
        for (owner, evaluator) in assignment.pairs() {
            let params = &models
                .iter()
                .find(|(id, _)| *id == owner)
                .expect("assignment covers the registry")
                .1;
            let msg = assignment_msg(params);
            let link = link_of(links, evaluator);
            send_to(link, &msg)?;
        }
        let mut losses = Vec::with_capacity(links.len());
        for (owner, evaluator) in assignment.pairs() {
            let link = link_of(links, evaluator);
            losses.push((owner, expect_eval_loss(link, epoch)?));
        }
        return Ok(Some(agg::eval_random(&assignment, &losses)?));
    }

    Ok(None)
}

fn link_of(links: &mut [ClientLink], id: ClientId) -> &mut ClientLink {
    links
        .iter_mut()
        .find(|l| l.id == id)
        .expect("registry covers every client id")
}

fn expect_eval_loss(link: &mut ClientLink, epoch: u32) -> Result<f64, RuntimeError> {
    let msg = recv_from(link)?;
    match msg {
        Message::EvalLoss { epoch: e, sender, loss }
            if e == epoch && sender == link.id.as_u16() && loss.is_finite() && loss >= 0.0 =>
        {
            Ok(loss)
        }
        other => Err(RuntimeError::Protocol {
            client: link.id,
            detail: format!(
                "expected EvalLoss for epoch {epoch}, got {} (epoch {})",
                other.kind_name(),
                other.epoch()
            ),
        }),
    }
}
