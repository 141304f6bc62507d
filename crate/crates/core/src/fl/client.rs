use super::eval::{self, Metric};
use super::{Message, RuntimeError};
use crate::data::ClientDataset;
use crate::nn::{self, AdamState, NetworkSpec, ParameterLayout, ParameterVector};
use crate::ClientId;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Local-training knobs of a client.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Reset the Adam moments at the start of every round instead of
    /// carrying them across rounds.
    pub reset_optimizer_each_round: bool,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            batch_size: 128,
            learning_rate: 0.001,
            reset_optimizer_each_round: false,
        }
    }
}

/// One client's training state: its dataset, the last received global
/// model, the optimizer, and the seeded stream driving batch shuffles and
/// dropout draws.
pub struct ClientState {
    id: ClientId,
    spec: NetworkSpec,
    layout: ParameterLayout,
    dataset: ClientDataset,
    config: ClientConfig,
    current: Option<ParameterVector>,
    optimizer: AdamState,
    rng: ChaCha20Rng,
}

impl ClientState {
    pub fn new(
        id: ClientId,
        spec: NetworkSpec,
        dataset: ClientDataset,
        config: ClientConfig,
        train_seed: u64,
    ) -> Result<Self, RuntimeError> {
        if dataset.training_windows.is_empty() {
            return Err(RuntimeError::EmptyTrainingSet { client: id });
        }
        if dataset.validation_windows.is_empty() {
            return Err(RuntimeError::EmptyValidationSet { client: id });
        }
        if config.batch_size == 0 {
            return Err(RuntimeError::InvalidConfig("batch_size must be positive".into()));
        }
        let layout = spec.parameter_layout()?;
        let optimizer = AdamState::with_learning_rate(layout.total_len(), config.learning_rate);
        Ok(ClientState {
            id,
            spec,
            layout,
            dataset,
            config,
            current: None,
            optimizer,
            rng: ChaCha20Rng::seed_from_u64(train_seed),
        })
    }

    pub fn id(&self) -> ClientId {
        self.id
    }

    pub fn n_train(&self) -> usize {
        self.dataset.n_train
    }

    fn set_current(&mut self, values: Vec<f32>) -> Result<(), RuntimeError> {
        let params =
            ParameterVector::from_values(self.layout.clone(), values).map_err(|e| {
                RuntimeError::Protocol {
                    client: self.id,
                    detail: format!("received model does not fit the network: {e}"),
                }
            })?;
        self.current = Some(params);
        Ok(())
    }

    /// One local epoch from the current global model: a fresh shuffle of the
    /// training windows, mini-batches of `batch_size` (final partial batch
    /// included), one Adam step per batch.
    fn train_one_epoch(&mut self) -> Result<ParameterVector, RuntimeError> {
        let mut params = self
            .current
            .clone()
            .expect("training starts after a global model was received");
        if self.config.reset_optimizer_each_round {
            self.optimizer = AdamState::with_learning_rate(
                self.layout.total_len(),
                self.config.learning_rate,
            );
        }
        let mut order: Vec<usize> = (0..self.dataset.training_windows.len()).collect();
        order.shuffle(&mut self.rng);
        for chunk in order.chunks(self.config.batch_size) {
            let mut batch =
                nn::Batch::new(self.spec.input_window(), self.spec.input_channels());
            for &index in chunk {
                let w = &self.dataset.training_windows[index];
                batch.push(&w.values, w.rul_label as f32)?;
            }
            let dropout_seed: u64 = self.rng.random();
            let (_, gradient) = nn::backward(&self.spec, &params, &batch, true, dropout_seed)?;
            let (updated, optimizer) = nn::adam_step(&self.optimizer, &params, &gradient)?;
            params = updated;
            self.optimizer = optimizer;
        }
        Ok(params)
    }

    fn validation_loss(&self, params: &ParameterVector, metric: Metric) -> Result<f64, RuntimeError> {
        eval::evaluate_model_on_validation(
            &self.spec,
            params,
            &self.dataset.validation_windows,
            metric,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Waiting for the initial global model.
    AwaitGlobal,
    /// Local model sent; serving evaluation assignments until the new
    /// global model arrives.
    AwaitEval { epoch: u32 },
    /// Validation loss sent; waiting for the round to close.
    AwaitEnd { epoch: u32 },
    Done,
}

/// The client side of the protocol as a message-driven state machine. Each
/// round: receive the global model (or the initial broadcast), train one
/// local epoch, send the local model; answer any evaluation assignments with
/// RMSE on the own validation set; on the new global model, reply with the
/// SSE validation sum; on epoch end, start the next round.
pub struct ClientWorker {
    state: ClientState,
    phase: Phase,
}

impl ClientWorker {
    pub fn new(state: ClientState) -> Self {
        ClientWorker {
            state,
            phase: Phase::AwaitGlobal,
        }
    }

    pub fn id(&self) -> ClientId {
        self.state.id()
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    fn protocol_error(&self, msg: &Message) -> RuntimeError {
        RuntimeError::Protocol {
            client: self.state.id,
            detail: format!(
                "unexpected {} (epoch {}) in phase {:?}",
                msg.kind_name(),
                msg.epoch(),
                self.phase
            ),
        }
    }

    fn train_and_upload(&mut self, epoch: u32) -> Result<Vec<Message>, RuntimeError> {
        let local = self.state.train_one_epoch()?;
        self.phase = Phase::AwaitEval { epoch };
        Ok(vec![Message::LocalModel {
            epoch,
            sender: self.state.id.as_u16(),
            params: local.values().to_vec(),
        }])
    }

    /// Feeds one message through the state machine, returning the replies to
    /// send back to the server.
    pub fn handle(&mut self, msg: Message) -> Result<Vec<Message>, RuntimeError> {
        if let Message::Shutdown { .. } = msg {
            self.phase = Phase::Done;
            return Ok(Vec::new());
        }
        match (self.phase, &msg) {
            (Phase::AwaitGlobal, Message::GlobalModel { epoch, params, .. }) => {
                self.state.set_current(params.clone())?;
                self.train_and_upload(epoch + 1)
            }
            (Phase::AwaitEval { epoch }, Message::EvalAssignment { epoch: e, params, .. })
                if *e == epoch =>
            {
                let foreign = ParameterVector::from_values(
                    self.state.layout.clone(),
                    params.clone(),
                )
                .map_err(|err| RuntimeError::Protocol {
                    client: self.state.id,
                    detail: format!("assigned model does not fit the network: {err}"),
                })?;
                let loss = self.state.validation_loss(&foreign, Metric::Rmse)?;
                Ok(vec![Message::EvalLoss {
                    epoch,
                    sender: self.state.id.as_u16(),
                    loss,
                }])
            }
            (Phase::AwaitEval { epoch }, Message::GlobalModel { epoch: e, params, .. })
                if *e == epoch =>
            {
                self.state.set_current(params.clone())?;
                let current = self.state.current.as_ref().expect("just set");
                let loss = self.state.validation_loss(current, Metric::Sse)?;
                self.phase = Phase::AwaitEnd { epoch };
                Ok(vec![Message::ValSumLoss {
                    epoch,
                    sender: self.state.id.as_u16(),
                    loss,
                }])
            }
            (Phase::AwaitEnd { epoch }, Message::EpochEnd { epoch: e, .. }) if *e == epoch => {
                self.train_and_upload(epoch + 1)
            }
            _ => Err(self.protocol_error(&msg)),
        }
    }
}
