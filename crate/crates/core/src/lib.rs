//! Query compilation over a single loop-based intermediate representation.
//!
//! Data is viewed as multisets of tuples and every data access is a
//! `forelem` loop over an index set. SQL-subset queries lower into that
//! form, source-to-source passes partition, parallelize and fuse the
//! loops, and an executor runs the result either sequentially or under a
//! deterministic virtual-time scheduling simulation with fault injection.
//! Programs of the accumulate-then-read shape can also be re-emitted as
//! MapReduce jobs.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod database;
pub mod error;
pub mod exec;
pub mod ir;
pub mod mapreduce;
pub mod multiset;
pub mod reformat;
pub mod scheduler;
pub mod sql;
pub mod transforms;

pub use database::Database;
pub use error::{Error, Result};
pub use multiset::{FieldType, Multiset, Schema, Tuple, Value};
