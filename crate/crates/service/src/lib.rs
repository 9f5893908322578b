//! The chainrisk monitoring service: a pipeline thread that turns telemetry
//! into KRIs, alerts and scores, an append-only audit log, compliance
//! reports, and the HTTP/SSE API in front of them.

pub mod api;
pub mod audit;
pub mod pipeline;
pub mod report;

use chainrisk_core::telemetry::Timestamp;
use serde::{Deserialize, Serialize};

/// An operator's response to risk, kept for audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationAction {
    pub action_id: String,
    pub ts: Timestamp,
    pub actor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alert_id: Option<String>,
    /// Free text such as "halt trading".
    pub action_type: String,
    #[serde(default)]
    pub note: String,
}
