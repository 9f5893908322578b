//! Key risk indicators: definitions, index math, windowed metrics and the
//! streaming engine that turns telemetry into [`KriSample`]s.

pub mod catalog;
mod definition;
mod engine;
mod gaps;
pub mod indices;
pub mod metrics;
mod window;

pub use definition::{
    Availability, Direction, FillMethod, GapPolicy, KriCategory, KriDefinition, KriRegistry,
    KriSample, Window,
};
pub use engine::{ChainParams, KriContext, KriEngine};
pub use gaps::apply_gap_policy;
pub use indices::{
    gini, gini_of, max_share_by, nakamoto_coefficient, nakamoto_coefficient_of, nakamoto_ratio,
    theil, theil_of, GroupKey, ShareWeight, MAJORITY,
};
pub use window::{EventIndex, TimeWindow};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KriError {
    #[error("stake snapshot is empty or has no positive weight")]
    EmptySnapshot,
    #[error("node set is empty")]
    EmptyNodeSet,
    #[error("control threshold {0} is outside (0, 1)")]
    InvalidThreshold(f64),
    #[error("window contains no slots")]
    EmptyWindow,
    #[error("no validators in scope")]
    EmptyScope,
    #[error("missing external fact `{0}`")]
    MissingExternalFact(String),
    #[error("unknown KRI `{0}`")]
    UnknownKri(String),
    #[error("invalid definition for `{kri_id}`: {reason}")]
    InvalidDefinition { kri_id: String, reason: String },
}

pub(crate) mod engine_internals {
    pub(crate) use super::engine::{compute_raw, Inputs, LiveGapFiller};
}
