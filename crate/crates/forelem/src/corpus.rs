//! The bundled example programs and the tables they read.

use forelem_core::database::Catalog;
use forelem_core::ir::{parse_program, Program};
use forelem_core::sql::{lower_to_forelem, parse_sql, Params};
use forelem_core::{FieldType, Result, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lang {
    Sql,
    Ir,
}

#[derive(Debug, Clone, Copy)]
pub struct Entry {
    pub name: &'static str,
    pub lang: Lang,
    pub text: &'static str,
    /// Query parameters, as `(name, value)`.
    pub params: &'static [(&'static str, &'static str)],
}

pub const ENTRIES: &[Entry] = &[
    Entry {
        name: "url_count",
        lang: Lang::Sql,
        text: include_str!("../corpus/url_count.sql"),
        params: &[],
    },
    Entry {
        name: "reverse_links",
        lang: Lang::Sql,
        text: include_str!("../corpus/reverse_links.sql"),
        params: &[],
    },
    Entry {
        name: "join",
        lang: Lang::Sql,
        text: include_str!("../corpus/join.sql"),
        params: &[],
    },
    Entry {
        name: "grades",
        lang: Lang::Ir,
        text: include_str!("../corpus/grades.fl"),
        params: &[],
    },
    Entry {
        name: "grades_query",
        lang: Lang::Sql,
        text: include_str!("../corpus/grades.sql"),
        params: &[("0", "1")],
    },
    Entry {
        name: "two_aggregate",
        lang: Lang::Ir,
        text: include_str!("../corpus/two_aggregate.fl"),
        params: &[],
    },
    Entry {
        name: "sum_by_key",
        lang: Lang::Sql,
        text: include_str!("../corpus/sum_by_key.sql"),
        params: &[],
    },
];

pub fn entry(name: &str) -> Option<&'static Entry> {
    ENTRIES.iter().find(|e| e.name == name)
}

/// Schemas of every table the corpus reads.
pub fn catalog() -> Catalog {
    use FieldType::{Int, Str};
    let tables: [(&str, &[(&str, FieldType)]); 6] = [
        ("access", &[("url", Str)]),
        ("links", &[("source", Str), ("target", Str)]),
        ("A", &[("b_id", Int), ("field", Int)]),
        ("B", &[("id", Int), ("field", Int)]),
        ("grades", &[("studentID", Int), ("grade", Int), ("weight", Int)]),
        ("T", &[("field1", Int), ("field2", Int)]),
    ];
    tables
        .iter()
        .map(|(name, fields)| {
            let schema = Schema::new(fields.iter().copied()).expect("distinct field names");
            (name.to_string(), schema)
        })
        .collect()
}

impl Entry {
    pub fn params(&self) -> Params {
        self.params.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    /// The program as written, or as lowered from SQL against `catalog()`.
    pub fn program(&self) -> Result<Program> {
        match self.lang {
            Lang::Ir => parse_program(self.text),
            Lang::Sql => lower_to_forelem(&parse_sql(self.text)?, &catalog(), &self.params()),
        }
    }
}
