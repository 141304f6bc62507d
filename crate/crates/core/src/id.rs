use serde::{Deserialize, Serialize};
use std::fmt;

/// Identifier of a federated client. The server reserves id 0 for itself;
/// clients are numbered from 1 in registry order, and that ordering is the
/// tie-break for best-model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClientId(pub u16);

impl ClientId {
    pub const SERVER: ClientId = ClientId(0);

    pub fn as_u16(self) -> u16 {
        self.0
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
