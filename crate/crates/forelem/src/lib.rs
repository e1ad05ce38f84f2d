//! File formats, test data and the command-line driver around `forelem-core`.
//!
//! Tables live in a data directory as `NAME.csv` (or `NAME.tsv`) next to a
//! `NAME.schema` sidecar with one `field: type` line per column. A directory
//! holding a `manifest.json` is read as a columnar store instead.

pub mod cli;
pub mod columnar_io;
pub mod corpus;
pub mod data;
pub mod gen;
pub mod stats;

mod error;

pub use error::{Error, Result};
