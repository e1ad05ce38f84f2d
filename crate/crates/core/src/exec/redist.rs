//! Static accounting of data redistributions between parallel loops.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::database::Database;
use crate::error::Result;
use crate::ir::{Expr, Header, Program, Stmt, StmtPath};
use crate::multiset::{Value, ValueRangePartition};

/// How a parallel loop needs a table spread over the workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Partitioning {
    /// Contiguous blocks in storage order.
    Blocks { n: u32 },
    /// Tuples grouped by the value-range segment their `field` falls in.
    /// `source` names the multiset field the segment values come from;
    /// `segments` is known when that source is a stored table.
    ValueRange {
        field: String,
        source: String,
        n: u32,
        segments: Option<Vec<Vec<Value>>>,
    },
}

impl Partitioning {
    pub fn conflicts(&self, other: &Partitioning) -> bool {
        match (self, other) {
            (Partitioning::Blocks { n: a }, Partitioning::Blocks { n: b }) => a != b,
            (
                Partitioning::ValueRange {
                    field: fa,
                    source: sa,
                    n: na,
                    segments: ga,
                },
                Partitioning::ValueRange {
                    field: fb,
                    source: sb,
                    n: nb,
                    segments: gb,
                },
            ) => {
                fa != fb
                    || match (ga, gb) {
                        (Some(a), Some(b)) => a != b,
                        _ => (sa, na) != (sb, nb),
                    }
            }
            _ => true,
        }
    }
}

impl fmt::Display for Partitioning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Partitioning::Blocks { n } => write!(f, "blocks/{n}"),
            Partitioning::ValueRange { field, source, n, .. } => write!(f, "{field} by {source}/{n}"),
        }
    }
}

/// A table access inside a parallel loop that fixes its distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionedAccess {
    pub table: String,
    pub forall: StmtPath,
    pub loop_path: StmtPath,
    pub partitioning: Partitioning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedistributionEvent {
    pub table: String,
    /// The loop whose distribution is replaced; `None` for the initial layout.
    pub from: Option<StmtPath>,
    pub to: StmtPath,
    pub before: Partitioning,
    pub after: Partitioning,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RedistributionReport {
    pub accesses: Vec<PartitionedAccess>,
    pub events: Vec<RedistributionEvent>,
}

impl RedistributionReport {
    pub fn count(&self) -> usize {
        self.events.len()
    }

    pub fn lines(&self) -> Vec<String> {
        let path = |p: &StmtPath| {
            let parts: Vec<String> = p.iter().map(|i| format!("{i}")).collect();
            parts.join(".")
        };
        self.events
            .iter()
            .map(|e| {
                let from = e.from.as_ref().map_or_else(|| String::from("initial"), path);
                format!("{}: loop {} ({}) -> loop {} ({})", e.table, from, e.before, path(&e.to), e.after)
            })
            .collect()
    }
}

struct Walker<'a> {
    db: &'a Database,
    prog: &'a Program,
    /// Value loop variables: name -> (set, field, partition variable).
    values: Vec<(String, String, String, Option<String>)>,
    forall: Option<(String, u32, StmtPath)>,
    out: Vec<PartitionedAccess>,
}

/// Lists, in program order, every table access inside a `forall` that
/// requires a particular distribution, and flags each point where the
/// distribution needed for a table differs from the one before it.
pub fn count_redistributions(prog: &Program, db: &Database) -> Result<RedistributionReport> {
    let mut w = Walker {
        db,
        prog,
        values: Vec::new(),
        forall: None,
        out: Vec::new(),
    };
    let mut path = Vec::new();
    w.body(&prog.body, &mut path)?;

    let mut current: BTreeMap<String, (Option<StmtPath>, Partitioning)> = BTreeMap::new();
    for t in &prog.tables {
        if let Some(d) = db.distribution(&t.name) {
            current.insert(
                t.name.clone(),
                (
                    None,
                    Partitioning::ValueRange {
                        field: d.field().into(),
                        source: format!("{}.{}", t.name, d.field()),
                        n: d.n() as u32,
                        segments: Some(d.segments().to_vec()),
                    },
                ),
            );
        }
    }
    let mut events = Vec::new();
    for a in &w.out {
        if let Some((from, before)) = current.get(&a.table) {
            if before.conflicts(&a.partitioning) {
                events.push(RedistributionEvent {
                    table: a.table.clone(),
                    from: from.clone(),
                    to: a.loop_path.clone(),
                    before: before.clone(),
                    after: a.partitioning.clone(),
                });
            }
        }
        current.insert(a.table.clone(), (Some(a.loop_path.clone()), a.partitioning.clone()));
    }
    Ok(RedistributionReport {
        accesses: w.out,
        events,
    })
}

impl Walker<'_> {
    fn body(&mut self, body: &[Stmt], path: &mut StmtPath) -> Result<()> {
        for (i, s) in body.iter().enumerate() {
            path.push(i);
            if let Stmt::Loop(l) = s {
                self.header(&l.header, path)?;
                let saved = self.forall.clone();
                let pushed = match &l.header {
                    Header::Range { var, n, parallel: true } if self.forall.is_none() => {
                        self.forall = Some((var.clone(), *n, path.clone()));
                        false
                    }
                    Header::Values { var, set, field, part } => {
                        self.values.push((var.clone(), set.clone(), field.clone(), part.clone()));
                        true
                    }
                    _ => false,
                };
                self.body(&l.body, path)?;
                if pushed {
                    self.values.pop();
                }
                self.forall = saved;
            }
            path.pop();
        }
        Ok(())
    }

    fn header(&mut self, h: &Header, path: &StmtPath) -> Result<()> {
        let Header::Forelem { domain, .. } = h else {
            return Ok(());
        };
        let Some((k, n, forall)) = self.forall.clone() else {
            return Ok(());
        };
        if self.prog.table(&domain.set).is_none() {
            return Ok(());
        }
        let partitioning = if domain.block.as_deref() == Some(k.as_str()) {
            Partitioning::Blocks { n }
        } else if let Some(Expr::Var(l)) = domain.filter.as_ref().map(|f| &f.value) {
            let Some((_, set, field, part)) = self.values.iter().rev().find(|v| &v.0 == l) else {
                return Ok(());
            };
            if part.as_deref() != Some(k.as_str()) {
                return Ok(());
            }
            Partitioning::ValueRange {
                field: domain.filter.as_ref().unwrap().field.clone(),
                source: format!("{set}.{field}"),
                n,
                segments: self.segments(set, field, n)?,
            }
        } else {
            return Ok(());
        };
        self.out.push(PartitionedAccess {
            table: domain.set.clone(),
            forall,
            loop_path: path.clone(),
            partitioning,
        });
        Ok(())
    }

    fn segments(&self, set: &str, field: &str, n: u32) -> Result<Option<Vec<Vec<Value>>>> {
        if self.prog.table(set).is_none() {
            return Ok(None);
        }
        let Some(t) = self.db.get(set) else {
            return Ok(None);
        };
        if let Some(d) = self.db.distribution(set) {
            if d.field() == field && d.n() == n as usize {
                return Ok(Some(d.segments().to_vec()));
            }
        }
        Ok(Some(ValueRangePartition::of_field(t, field, n as usize)?.segments().to_vec()))
    }
}
