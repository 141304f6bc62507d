/// Protocol messages exchanged between the server and the clients.
///
/// Payloads carry either a flat parameter array or one scalar loss — by
/// construction no message can transport window samples, flights or any
/// other raw client data, which is the privacy boundary of the protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    /// Server -> clients: current global model (initial broadcast uses
    /// epoch 0, per-round broadcasts the epoch they conclude).
    GlobalModel {
        epoch: u32,
        sender: u16,
        params: Vec<f32>,
    },
    /// Client -> server: the locally trained model for this epoch.
    LocalModel {
        epoch: u32,
        sender: u16,
        params: Vec<f32>,
    },
    /// Server -> client: a foreign local model to score on the client's own
    /// validation set.
    EvalAssignment {
        epoch: u32,
        sender: u16,
        params: Vec<f32>,
    },
    /// Client -> server: metric loss for the most recent assignment.
    EvalLoss { epoch: u32, sender: u16, loss: f64 },
    /// Client -> server: sum-of-squared-errors of the global model on the
    /// client's validation set.
    ValSumLoss { epoch: u32, sender: u16, loss: f64 },
    /// Server -> clients: the round is complete, start the next one.
    EpochEnd { epoch: u32, sender: u16 },
    /// Server -> clients: terminate cleanly.
    Shutdown { epoch: u32, sender: u16 },
}

impl Message {
    /// Wire type tag.
    pub fn tag(&self) -> u8 {
        match self {
            Message::GlobalModel { .. } => 1,
            Message::LocalModel { .. } => 2,
            Message::EvalAssignment { .. } => 3,
            Message::EvalLoss { .. } => 4,
            Message::ValSumLoss { .. } => 5,
            Message::EpochEnd { .. } => 6,
            Message::Shutdown { .. } => 7,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Message::GlobalModel { .. } => "GlobalModel",
            Message::LocalModel { .. } => "LocalModel",
            Message::EvalAssignment { .. } => "EvalAssignment",
            Message::EvalLoss { .. } => "EvalLoss",
            Message::ValSumLoss { .. } => "ValSumLoss",
            Message::EpochEnd { .. } => "EpochEnd",
            Message::Shutdown { .. } => "Shutdown",
        }
    }

    pub fn epoch(&self) -> u32 {
        match *self {
            Message::GlobalModel { epoch, .. }
            | Message::LocalModel { epoch, .. }
            | Message::EvalAssignment { epoch, .. }
            | Message::EvalLoss { epoch, .. }
            | Message::ValSumLoss { epoch, .. }
            | Message::EpochEnd { epoch, .. }
            | Message::Shutdown { epoch, .. } => epoch,
        }
    }

    pub fn sender(&self) -> u16 {
        match *self {
            Message::GlobalModel { sender, .. }
            | Message::LocalModel { sender, .. }
            | Message::EvalAssignment { sender, .. }
            | Message::EvalLoss { sender, .. }
            | Message::ValSumLoss { sender, .. }
            | Message::EpochEnd { sender, .. }
            | Message::Shutdown { sender, .. } => sender,
        }
    }
}
