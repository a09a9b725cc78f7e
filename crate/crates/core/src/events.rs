use serde::{Deserialize, Serialize};

/// Category of a diagnostic event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    BoundaryHit,
    NegativeDelay,
    DegenerateSecant,
    Warning,
    Residual,
    Progress,
    Rejected,
    Inserted,
    StepSize,
    LeastSquares,
}

/// Machine-readable diagnostic record: what happened, a short message and an
/// optional JSON payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub payload: serde_json::Value,
}

impl Event {
    pub fn new(kind: EventKind, message: impl Into<String>) -> Self {
        Event { kind, message: message.into(), payload: serde_json::Value::Null }
    }

    pub fn with_payload(mut self, payload: serde_json::Value) -> Self {
        self.payload = payload;
        self
    }
}
