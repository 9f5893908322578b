//! Alert rules over KRI samples and the alert lifecycle.

mod engine;
pub mod eval;
mod route;
mod rule;

pub use engine::{Alert, AlertConfig, AlertEngine, AlertEvent, AlertState, STALENESS_PREFIX};
pub use route::{route, DeliveryRecord, RetryPolicy, Sink};
pub use rule::{parse_rules, AlertRule, Comparator, Condition, KriTarget, RuleSet, Severity};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlertError {
    #[error("invalid rule `{rule_id}`: {reason}")]
    InvalidRule { rule_id: String, reason: String },
    #[error("unknown alert `{0}`")]
    UnknownAlert(String),
    #[error("alert `{alert_id}` cannot move from {from:?} to {to:?}")]
    InvalidTransition {
        alert_id: String,
        from: AlertState,
        to: AlertState,
    },
    #[error("actor must not be empty")]
    EmptyActor,
    #[error("sink unreachable: {0}")]
    SinkUnreachable(String),
    #[error("no sinks configured")]
    NoSinks,
}
