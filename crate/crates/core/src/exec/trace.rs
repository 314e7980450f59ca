use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::plan::StepId;

/// One executed step. Events are appended when a step finishes, so inputs
/// always appear before the steps that consume them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: usize,
    pub step_id: StepId,
    pub kind: String,
    pub inputs: Value,
    pub outputs: Value,
    pub wall_time_us: u64,
}

/// One JSON document per event.
pub fn trace_to_jsonl(events: &[TraceEvent]) -> String {
    events
        .iter()
        .map(|e| serde_json::to_string(e).expect("trace events always serialize") + "\n")
        .collect()
}

pub fn trace_from_jsonl(text: &str) -> Result<Vec<TraceEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// The trace with every wall time set to zero, for comparing runs.
pub fn without_wall_times(events: &[TraceEvent]) -> Vec<TraceEvent> {
    events
        .iter()
        .cloned()
        .map(|mut e| {
            e.wall_time_us = 0;
            e
        })
        .collect()
}
