//! The loop intermediate representation: syntax tree, textual form,
//! validation and def-use analysis.

mod ast;
mod defuse;
mod lexer;
mod parse;
mod pretty;
mod validate;

pub use ast::*;
pub use defuse::{dead_statements, expr_reads, live_names, DefUse, Effects, WriteKind};
pub use parse::parse_program;
pub use pretty::pretty;
pub use validate::{diagnostics, validate};
