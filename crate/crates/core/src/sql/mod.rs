//! The SQL subset: `SELECT [DISTINCT] .. FROM .. [WHERE ..] [GROUP BY ..]`
//! with comma joins, equality predicates, `COUNT`/`SUM`, scalar `COUNT`/`SUM`
//! subqueries in the select list and `CREATE VIEW`. Queries lower to loop
//! programs whose single output result is named `R` unless a table already
//! uses that name.

mod ast;
mod lexer;
mod lower;
mod parse;

pub use ast::{ColRef, Cond, FromItem, ItemExpr, Operand, Select, SelectItem, SqlQuery, View};
pub use lower::{lower_to_forelem, Params};
pub use parse::parse_sql;
