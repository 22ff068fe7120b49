//! Per-packet traces, written as JSON lines.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::packet::TraceId;
use crate::verdict::{DropReason, PathKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub component: String,
    pub stage: String,
    pub action: String,
    pub t_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disposition {
    pub path: PathKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ns: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_reason: Option<DropReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_stage: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub trace_id: TraceId,
    pub hops: Vec<Hop>,
    pub disposition: Disposition,
}

impl TraceRecord {
    pub fn touches(&self, component_prefix: &str) -> bool {
        self.hops.iter().any(|h| h.component.starts_with(component_prefix))
    }

    pub fn has_stage(&self, stage: &str) -> bool {
        self.hops.iter().any(|h| h.stage == stage)
    }

    pub fn has_action(&self, action: &str) -> bool {
        self.hops.iter().any(|h| h.action == action)
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("unknown trace id {0}")]
    UnknownTraceId(TraceId),
    #[error("trace io: {0}")]
    Io(#[from] io::Error),
    #[error("bad trace line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
}

/// Receives one record per packet.
pub trait TraceSink {
    fn record(&mut self, r: TraceRecord);
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, r: TraceRecord) {
        self.push(r);
    }
}

/// Writes JSON lines. The first write error is kept and later writes are
/// skipped, so a run is never cut short by its trace file.
pub struct JsonlSink<W: Write> {
    out: W,
    error: Option<io::Error>,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(out: W) -> Self {
        JsonlSink { out, error: None }
    }

    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> TraceSink for JsonlSink<W> {
    fn record(&mut self, r: TraceRecord) {
        if self.error.is_some() {
            return;
        }
        let res =
            serde_json::to_writer(&mut self.out, &r).map_err(io::Error::from).and_then(|_| self.out.write_all(b"\n"));
        if let Err(e) = res {
            self.error = Some(e);
        }
    }
}

pub fn read_traces(input: impl BufRead) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| TraceError::Parse { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn trace_query(traces: &[TraceRecord], trace_id: TraceId) -> Result<&TraceRecord, TraceError> {
    // Records are emitted in trace-id order, but do not rely on it.
    match traces.binary_search_by_key(&trace_id, |r| r.trace_id) {
        Ok(i) => Ok(&traces[i]),
        Err(_) => traces.iter().find(|r| r.trace_id == trace_id).ok_or(TraceError::UnknownTraceId(trace_id)),
    }
}
