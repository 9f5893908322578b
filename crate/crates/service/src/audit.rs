//! Append-only NDJSON audit log.
//!
//! Every line is one [`AuditEntry`]. On open, a final line cut short by a
//! crash is dropped and the file truncated back to the last complete entry,
//! so numbering resumes right after it.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use chainrisk_core::telemetry::Timestamp;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("audit storage failure: {0}")]
    StorageFailure(String),
    #[error("audit log line {line} is corrupt: {reason}")]
    Corrupt { line: usize, reason: String },
}

impl From<std::io::Error> for AuditError {
    fn from(e: std::io::Error) -> Self {
        AuditError::StorageFailure(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    KriSample,
    AlertFired,
    AlertAcknowledged,
    AlertResolved,
    ActionRecorded,
    RuleChanged,
    ScoreComputed,
    ScenarioInjected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    /// Event time of the pipeline when the entry was made.
    pub ts: Timestamp,
    pub kind: AuditKind,
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
    /// Wall-clock receipt time in Unix milliseconds. Not part of the
    /// deterministic content of the log.
    pub recorded_at: i64,
}

impl AuditEntry {
    /// The entry with its wall-clock field zeroed, for comparing runs.
    pub fn without_receipt(&self) -> AuditEntry {
        AuditEntry {
            recorded_at: 0,
            ..self.clone()
        }
    }
}

fn wall_clock_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as i64)
}

enum Backend {
    Memory,
    File {
        path: PathBuf,
        writer: BufWriter<File>,
    },
}

/// The log itself. Entries are also kept in memory for reporting.
pub struct AuditLog {
    backend: Backend,
    entries: Vec<AuditEntry>,
    next_seq: u64,
}

/// What [`AuditLog::open`] found on disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Recovery {
    pub entries: usize,
    /// Bytes of a torn final line that were discarded.
    pub discarded_bytes: u64,
}

impl AuditLog {
    pub fn in_memory() -> Self {
        Self {
            backend: Backend::Memory,
            entries: Vec::new(),
            next_seq: 1,
        }
    }

    /// Opens or creates the log at `path`, recovering from a torn tail.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Recovery), AuditError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let (entries, keep) = read_complete(&bytes)?;
        let discarded_bytes = (bytes.len() - keep) as u64;
        if discarded_bytes > 0 {
            tracing::warn!(path = %path.display(), discarded_bytes, "dropping torn audit tail");
            file.set_len(keep as u64)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        let next_seq = entries.last().map_or(1, |e| e.seq + 1);
        let recovery = Recovery {
            entries: entries.len(),
            discarded_bytes,
        };
        Ok((
            Self {
                backend: Backend::File {
                    path,
                    writer: BufWriter::new(file),
                },
                entries,
                next_seq,
            },
            recovery,
        ))
    }

    pub fn path(&self) -> Option<&Path> {
        match &self.backend {
            Backend::Memory => None,
            Backend::File { path, .. } => Some(path),
        }
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn entries(&self) -> &[AuditEntry] {
        &self.entries
    }

    pub fn append(
        &mut self,
        ts: Timestamp,
        kind: AuditKind,
        payload: Value,
        actor: Option<&str>,
    ) -> Result<AuditEntry, AuditError> {
        let entry = AuditEntry {
            seq: self.next_seq,
            ts,
            kind,
            payload,
            actor: actor.map(str::to_owned),
            recorded_at: wall_clock_ms(),
        };
        if let Backend::File { writer, .. } = &mut self.backend {
            let line = serde_json::to_string(&entry)
                .map_err(|e| AuditError::StorageFailure(e.to_string()))?;
            writer.write_all(line.as_bytes())?;
            writer.write_all(b"\n")?;
        }
        self.next_seq += 1;
        self.entries.push(entry.clone());
        Ok(entry)
    }

    /// Pushes buffered lines to the operating system.
    pub fn flush(&mut self) -> Result<(), AuditError> {
        if let Backend::File { writer, .. } = &mut self.backend {
            writer.flush()?;
        }
        Ok(())
    }
}

impl Drop for AuditLog {
    fn drop(&mut self) {
        if let Err(e) = self.flush() {
            tracing::error!("audit flush on close failed: {e}");
        }
    }
}

/// Parses every newline-terminated entry. Returns them with the byte length
/// of the valid prefix. A bad line that is not the last one is corruption,
/// not a torn write.
fn read_complete(bytes: &[u8]) -> Result<(Vec<AuditEntry>, usize), AuditError> {
    let mut entries: Vec<AuditEntry> = Vec::new();
    let mut offset = 0;
    let mut line_no = 0;
    while offset < bytes.len() {
        let Some(len) = bytes[offset..].iter().position(|b| *b == b'\n') else {
            break;
        };
        line_no += 1;
        let line = &bytes[offset..offset + len];
        let parsed: Result<AuditEntry, _> = serde_json::from_slice(line);
        match parsed {
            Ok(entry) => {
                if entries.last().is_some_and(|p| p.seq >= entry.seq) {
                    return Err(AuditError::Corrupt {
                        line: line_no,
                        reason: format!("seq {} does not increase", entry.seq),
                    });
                }
                entries.push(entry);
            }
            Err(e) if offset + len + 1 < bytes.len() => {
                return Err(AuditError::Corrupt {
                    line: line_no,
                    reason: e.to_string(),
                })
            }
            Err(_) => break,
        }
        offset += len + 1;
    }
    Ok((entries, offset))
}

/// Reads a log without modifying it. A torn final line is ignored.
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<AuditEntry>, AuditError> {
    let bytes = std::fs::read(path)?;
    Ok(read_complete(&bytes)?.0)
}
