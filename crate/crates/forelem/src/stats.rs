//! Flat JSON form of run counters. Field order is fixed by the struct.

use std::path::Path;

use forelem_core::exec::ExecStats;
use forelem_core::mapreduce::MrTrace;
use forelem_core::scheduler::makespan;
use serde::Serialize;

use crate::error::{io, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StatsJson {
    pub inner_iterations: u64,
    pub tuples_scanned: u64,
    pub total_iterations: u64,
    pub hash_probes: u64,
    pub hash_builds: u64,
    pub redistribution_events: u64,
    pub per_worker_iterations: Vec<u64>,
    pub discarded_iterations: u64,
    /// Chunk executions across all parallel loops, failed ones included.
    pub chunks: u64,
    /// Sum of the virtual-time makespans of the parallel loops.
    pub makespan: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_tasks: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emitted_pairs: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shuffle_groups: Option<u64>,
}

impl From<&ExecStats> for StatsJson {
    fn from(s: &ExecStats) -> StatsJson {
        StatsJson {
            inner_iterations: s.inner_iterations,
            tuples_scanned: s.tuples_scanned,
            total_iterations: s.total_iterations,
            hash_probes: s.hash_probes,
            hash_builds: s.hash_builds,
            redistribution_events: s.redistribution_events,
            per_worker_iterations: s.per_worker_iterations.clone(),
            discarded_iterations: s.discarded_iterations,
            chunks: s.chunks.iter().map(|t| t.entries.len() as u64).sum(),
            makespan: s.chunks.iter().map(makespan).sum(),
            ..StatsJson::default()
        }
    }
}

impl StatsJson {
    /// Counters of a MapReduce run. Every input row is one map iteration.
    pub fn from_mapreduce(trace: &MrTrace, input_rows: u64) -> StatsJson {
        StatsJson {
            tuples_scanned: input_rows,
            total_iterations: input_rows,
            per_worker_iterations: vec![input_rows],
            map_tasks: Some(trace.map_tasks as u64),
            emitted_pairs: Some(trace.emitted.len() as u64),
            shuffle_groups: Some(trace.groups.len() as u64),
            ..StatsJson::default()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes") + "\n"
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(io(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_come_out_in_declaration_order() {
        let s = StatsJson::from(&ExecStats {
            inner_iterations: 4,
            per_worker_iterations: vec![1, 2],
            ..ExecStats::default()
        });
        let text = s.to_json();
        let inner = text.find("inner_iterations").unwrap();
        let probes = text.find("hash_probes").unwrap();
        let workers = text.find("per_worker_iterations").unwrap();
        assert!(inner < probes && probes < workers);
        assert!(!text.contains("map_tasks"));
    }
}
