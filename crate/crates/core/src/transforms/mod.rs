//! Source-to-source passes over forelem programs. Every pass checks its own
//! legality and returns the program unchanged, with a report saying why,
//! when the check fails.

mod blocking;
mod dead;
mod fusion;
mod merge;
mod method;
mod parallel;
mod pipeline;
mod util;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use blocking::{block_direct, block_indirect, PartitionMode, PartitionSpec};
pub use dead::eliminate_dead_access;
pub use fusion::{fuse_all, fuse_loops, interchange, statement_reorder};
pub use merge::merge_consumer;
pub use method::{select_iteration_method, DEFAULT_HASH_THRESHOLD};
pub use parallel::{expand_and_hoist, parallelize};
pub use pipeline::{block_all, optimize, parallelize_all, run_pass, PassStep, PipelineOptions, PASS_NAMES};

/// What a pass did, or why it declined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassReport {
    pub pass: String,
    pub applied: bool,
    /// Dependences and conditions checked, or the reason for declining.
    pub evidence: Vec<String>,
    /// Statements created, moved or rewritten.
    pub rewritten: usize,
}

impl PassReport {
    pub(crate) fn applied(pass: &str, evidence: Vec<String>, rewritten: usize) -> PassReport {
        PassReport {
            pass: pass.into(),
            applied: true,
            evidence,
            rewritten,
        }
    }

    pub(crate) fn declined(pass: &str, reason: impl Into<String>) -> PassReport {
        PassReport {
            pass: pass.into(),
            applied: false,
            evidence: alloc::vec![reason.into()],
            rewritten: 0,
        }
    }
}

impl fmt::Display for PassReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} ({} rewritten)",
            self.pass,
            if self.applied { "applied" } else { "not applied" },
            self.rewritten
        )?;
        for e in &self.evidence {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
