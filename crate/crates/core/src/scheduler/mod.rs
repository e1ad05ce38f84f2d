//! Static and dynamic loop scheduling over simulated workers with
//! fail-stop faults, in deterministic virtual time.

mod policy;
mod sim;

pub use policy::{next_chunk, ChunkPolicy, ChunkSizer};
pub use sim::{
    makespan, run_schedule, ChunkStatus, ChunkWork, FaultEvent, FaultTrigger, ScheduleTrace, Simulator,
    TraceEntry, WorkerPool, WorkerState, WorkerStatus,
};
