//! Alert delivery to file and webhook sinks.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Alert, AlertError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Sink {
    /// Appends one JSON line per alert.
    File { path: PathBuf },
    /// POSTs the alert as JSON.
    Webhook {
        url: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

fn default_timeout_ms() -> u64 {
    2_000
}

impl Sink {
    pub fn describe(&self) -> String {
        match self {
            Sink::File { path } => format!("file:{}", path.display()),
            Sink::Webhook { url, .. } => format!("webhook:{url}"),
        }
    }

    fn deliver_once(&self, alert: &Alert) -> Result<(), String> {
        let body = serde_json::to_string(alert).map_err(|e| e.to_string())?;
        match self {
            Sink::File { path } => {
                let mut f = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| e.to_string())?;
                writeln!(f, "{body}").map_err(|e| e.to_string())
            }
            Sink::Webhook { url, timeout_ms } => {
                let client = reqwest::blocking::Client::builder()
                    .timeout(Duration::from_millis(*timeout_ms))
                    .build()
                    .map_err(|e| e.to_string())?;
                let resp = client
                    .post(url)
                    .header("content-type", "application/json")
                    .body(body)
                    .send()
                    .map_err(|e| e.to_string())?;
                if resp.status().is_success() {
                    Ok(())
                } else {
                    Err(format!("HTTP {}", resp.status()))
                }
            }
        }
    }
}

/// Capped exponential backoff between delivery attempts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay_ms: 100,
            max_delay_ms: 2_000,
        }
    }
}

impl RetryPolicy {
    /// Delay after failed attempt `attempt` (1-based).
    pub fn delay_after(&self, attempt: u32) -> Duration {
        let factor = 1u64 << (attempt.saturating_sub(1)).min(20);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub alert_id: String,
    pub sink: String,
    pub delivered: bool,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Delivers `alert` to every sink, retrying failures. Every sink yields
/// exactly one record, successful or not.
pub fn route(
    alert: &Alert,
    sinks: &[Sink],
    policy: &RetryPolicy,
) -> Result<Vec<DeliveryRecord>, AlertError> {
    if sinks.is_empty() {
        return Err(AlertError::NoSinks);
    }
    let attempts_allowed = policy.max_attempts.max(1);
    let mut records = Vec::with_capacity(sinks.len());
    for sink in sinks {
        let mut attempts = 0;
        let mut error = None;
        while attempts < attempts_allowed {
            attempts += 1;
            match sink.deliver_once(alert) {
                Ok(()) => {
                    error = None;
                    break;
                }
                Err(e) => {
                    tracing::warn!(sink = %sink.describe(), attempt = attempts, "alert delivery failed: {e}");
                    error = Some(AlertError::SinkUnreachable(e).to_string());
                    if attempts < attempts_allowed {
                        std::thread::sleep(policy.delay_after(attempts));
                    }
                }
            }
        }
        records.push(DeliveryRecord {
            alert_id: alert.alert_id.clone(),
            sink: sink.describe(),
            delivered: error.is_none(),
            attempts,
            error,
        });
    }
    Ok(records)
}
