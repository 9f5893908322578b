//! Time-ordered event storage split by kind, with trailing-window slicing.

use crate::telemetry::{EventKind, TelemetryEvent, Timestamp};

/// Closed interval `[from, to]` plus the duration used as a rate denominator.
/// Near the start of a log the duration is clipped to the elapsed time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeWindow {
    pub from: Timestamp,
    pub to: Timestamp,
    pub duration_ms: u64,
}

impl TimeWindow {
    pub fn new(from: Timestamp, to: Timestamp, duration_ms: u64) -> Self {
        Self {
            from,
            to,
            duration_ms,
        }
    }

    /// The `span_ms` ending at `at`, never reaching back before `origin`.
    /// `resolution_ms` is the width of one observation (one slot), so a
    /// window ending on the first slot spans exactly one slot.
    pub fn trailing(at: Timestamp, span_ms: u64, origin: Timestamp, resolution_ms: u64) -> Self {
        let from = (at - span_ms as i64 + 1).max(origin);
        let elapsed = (at - origin).max(0) as u64 + resolution_ms;
        Self {
            from,
            to: at,
            duration_ms: span_ms.min(elapsed),
        }
    }

    pub fn contains(&self, ts: Timestamp) -> bool {
        self.from <= ts && ts <= self.to
    }
}

#[derive(Clone, Debug, Default)]
pub struct EventIndex {
    by_kind: [Vec<TelemetryEvent>; 8],
    last_ts: Option<Timestamp>,
}

impl EventIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: &[TelemetryEvent]) -> Self {
        let mut index = Self::new();
        for e in events {
            index.push(e.clone());
        }
        index
    }

    /// Appends an event; returns `false` (and drops it) if it would break
    /// timestamp order.
    pub fn push(&mut self, event: TelemetryEvent) -> bool {
        if self.last_ts.is_some_and(|t| event.ts < t) {
            return false;
        }
        self.last_ts = Some(event.ts);
        self.by_kind[event.kind().index()].push(event);
        true
    }

    pub fn last_ts(&self) -> Option<Timestamp> {
        self.last_ts
    }

    pub fn all(&self, kind: EventKind) -> &[TelemetryEvent] {
        &self.by_kind[kind.index()]
    }

    /// Events of `kind` with timestamps inside `window`.
    pub fn slice(&self, kind: EventKind, window: &TimeWindow) -> &[TelemetryEvent] {
        self.between(kind, window.from, window.to)
    }

    pub fn between(&self, kind: EventKind, from: Timestamp, to: Timestamp) -> &[TelemetryEvent] {
        let events = &self.by_kind[kind.index()];
        let lo = events.partition_point(|e| e.ts < from);
        let hi = events.partition_point(|e| e.ts <= to);
        &events[lo..hi.max(lo)]
    }

    /// Everything of `kind` up to and including `to`.
    pub fn until(&self, kind: EventKind, to: Timestamp) -> &[TelemetryEvent] {
        let events = &self.by_kind[kind.index()];
        &events[..events.partition_point(|e| e.ts <= to)]
    }

    /// Drops events of `kind` older than `before`.
    pub fn prune(&mut self, kind: EventKind, before: Timestamp) {
        let events = &mut self.by_kind[kind.index()];
        let cut = events.partition_point(|e| e.ts < before);
        // Amortize: only shift the buffer once a sizeable prefix is dead.
        if cut > 0 && cut * 2 >= events.len() {
            events.drain(..cut);
        }
    }

    pub fn len(&self) -> usize {
        self.by_kind.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
