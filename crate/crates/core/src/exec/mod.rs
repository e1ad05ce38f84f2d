//! Runs forelem programs sequentially or as a simulated parallel run.

mod compile;
mod redist;
mod run;
mod store;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

pub use redist::{count_redistributions, PartitionedAccess, Partitioning, RedistributionEvent, RedistributionReport};

use crate::database::Database;
use crate::error::Result;
use crate::ir::Program;
use crate::multiset::{Multiset, Value};
use crate::scheduler::{ChunkPolicy, FaultEvent, ScheduleTrace, Simulator, WorkerPool};

/// Work counters of one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecStats {
    /// Tuples examined by scanning loops nested in another loop.
    pub inner_iterations: u64,
    /// Tuples examined by all scanning loops.
    pub tuples_scanned: u64,
    /// Executions of forelem loop bodies.
    pub total_iterations: u64,
    pub hash_probes: u64,
    pub hash_builds: u64,
    pub redistribution_events: u64,
    /// `total_iterations` split by worker; work outside parallel loops counts
    /// for worker 0.
    pub per_worker_iterations: Vec<u64>,
    /// Iterations of parallel loops lost with failed chunks and executed again.
    pub discarded_iterations: u64,
    /// One schedule per executed parallel loop.
    pub chunks: Vec<ScheduleTrace>,
}

#[derive(Debug, Clone)]
pub struct ExecOutput {
    /// Output results by name.
    pub results: BTreeMap<String, Multiset>,
    /// Final values of scalar accumulators; per-worker copies are summed.
    pub accumulators: BTreeMap<String, Value>,
    pub stats: ExecStats,
}

/// Worker pool size, chunk policy and faults for a simulated parallel run.
#[derive(Debug, Clone)]
pub struct ParallelConfig {
    pub workers: usize,
    pub policy: ChunkPolicy,
    pub faults: Vec<FaultEvent>,
}

impl ParallelConfig {
    pub fn new(workers: usize, policy: ChunkPolicy) -> ParallelConfig {
        ParallelConfig {
            workers,
            policy,
            faults: Vec::new(),
        }
    }

    pub fn with_faults(mut self, faults: Vec<FaultEvent>) -> ParallelConfig {
        self.faults = faults;
        self
    }
}

pub fn run_sequential(program: &Program, db: &Database) -> Result<ExecOutput> {
    execute(program, db, None)
}

/// Runs `forall` loops chunk by chunk on simulated workers. Chunk effects are
/// kept private and committed in iteration order once a chunk completes, so
/// results match the sequential run whenever some worker survives.
pub fn run_parallel_sim(program: &Program, db: &Database, config: &ParallelConfig) -> Result<ExecOutput> {
    let sim = Simulator::new(
        WorkerPool::new(config.workers)?,
        config.policy.clone(),
        config.faults.clone(),
    )?;
    execute(program, db, Some(sim))
}

fn execute(program: &Program, db: &Database, sim: Option<Simulator>) -> Result<ExecOutput> {
    let c = compile::compile(program, db)?;
    let redistributions = count_redistributions(program, db)?.count() as u64;
    let mut st = store::Store::shaped(&c);
    let mut it = run::Interp::new(&c, db, sim);
    it.run(&mut st)?;

    let mut results = BTreeMap::new();
    for (info, state) in c.results.iter().zip(st.results) {
        if !info.output {
            continue;
        }
        let rows = state.rows.into_iter().chain(state.workers.into_values().flatten());
        results.insert(info.name.clone(), Multiset::from_rows(info.name.clone(), info.schema.clone(), rows)?);
    }
    let mut accumulators = BTreeMap::new();
    for (info, state) in c.accs.iter().zip(&st.accs) {
        if info.keyed {
            continue;
        }
        let mut v = store::zero(info.ty);
        if info.per_worker {
            for slot in state.workers.values() {
                if let Some(x) = &slot.scalar {
                    v = run::add(&v, x)?;
                }
            }
        } else if let Some(x) = &state.shared.scalar {
            v = x.clone();
        }
        accumulators.insert(info.name.clone(), v);
    }

    let total = it.counters.iterations;
    let mut per_worker = it.parallel_iterations.clone();
    per_worker[0] += total - per_worker.iter().sum::<u64>();
    let stats = ExecStats {
        inner_iterations: it.counters.inner,
        tuples_scanned: it.counters.scanned,
        total_iterations: total,
        hash_probes: it.counters.probes,
        hash_builds: it.builds,
        redistribution_events: redistributions,
        per_worker_iterations: per_worker,
        discarded_iterations: it.discarded,
        chunks: core::mem::take(&mut it.traces),
    };
    Ok(ExecOutput {
        results,
        accumulators,
        stats,
    })
}

#[cfg(test)]
mod tests;
