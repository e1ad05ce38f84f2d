//! Resolves names in a program against a database into slot and column indices.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::database::Database;
use crate::error::{Error, Result};
use crate::ir::{self, AccType, Expr, Header, IterMethod, Program, Stmt};
use crate::multiset::{FieldType, Multiset, Schema, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum SetRef {
    Table(usize),
    Result(usize),
}

#[derive(Debug)]
pub(crate) enum CExpr {
    Const(Value),
    Field { slot: usize, set: SetRef, col: usize },
    Int(usize),
    Val(usize),
    Acc { acc: usize, worker: Option<usize>, key: Option<Box<CExpr>> },
    Sum { acc: usize, key: Option<Box<CExpr>> },
    Add(Box<CExpr>, Box<CExpr>),
    Mul(Box<CExpr>, Box<CExpr>),
}

#[derive(Debug)]
pub(crate) struct CAcc {
    pub acc: usize,
    pub worker: Option<usize>,
    pub key: Option<CExpr>,
}

#[derive(Debug)]
pub(crate) enum CStmt {
    Loop(CLoop),
    Accumulate { target: CAcc, delta: CExpr },
    Assign { target: CAcc, value: CExpr },
    Union { res: usize, worker: Option<usize>, values: Vec<CExpr> },
    Merge { res: usize },
}

#[derive(Debug)]
pub(crate) enum CKind {
    Forelem {
        set: SetRef,
        filter: Option<(usize, FieldType, CExpr)>,
        distinct: Option<usize>,
        /// Block slot and partition count.
        block: Option<(usize, u32)>,
        hash: bool,
    },
    Range {
        n: u32,
        parallel: bool,
    },
    Values {
        set: SetRef,
        col: usize,
        /// Partition slot and segment count.
        part: Option<(usize, u32)>,
    },
}

#[derive(Debug)]
pub(crate) struct CLoop {
    pub kind: CKind,
    pub slot: usize,
    pub nested: bool,
    pub body: Vec<CStmt>,
    /// Why a `forall` cannot run its iterations on separate workers, if so.
    pub shared_write: Option<String>,
}

pub(crate) struct ResultInfo {
    pub name: String,
    pub schema: Schema,
    pub output: bool,
}

pub(crate) struct AccInfo {
    pub name: String,
    pub ty: AccType,
    pub keyed: bool,
    pub per_worker: bool,
}

pub(crate) struct Compiled<'a> {
    pub tables: Vec<&'a Multiset>,
    pub results: Vec<ResultInfo>,
    pub accs: Vec<AccInfo>,
    pub body: Vec<CStmt>,
    pub slots: usize,
}

#[derive(Clone)]
enum Bound {
    Row(SetRef),
    Range(u32),
    Value,
}

struct Resolver<'a, 'p> {
    prog: &'p Program,
    db: &'a Database,
    tables: Vec<&'a Multiset>,
    table_names: Vec<String>,
    scope: Vec<(String, Bound)>,
    max_depth: usize,
}

pub(crate) fn compile<'a>(prog: &Program, db: &'a Database) -> Result<Compiled<'a>> {
    ir::validate(prog)?;
    let mut r = Resolver {
        prog,
        db,
        tables: Vec::new(),
        table_names: Vec::new(),
        scope: Vec::new(),
        max_depth: 0,
    };
    let body = r.stmts(&prog.body)?;
    Ok(Compiled {
        tables: r.tables,
        results: prog
            .results
            .iter()
            .map(|d| ResultInfo {
                name: d.name.clone(),
                schema: d.schema.clone(),
                output: d.output,
            })
            .collect(),
        accs: prog
            .accs
            .iter()
            .map(|a| AccInfo {
                name: a.name.clone(),
                ty: a.ty,
                keyed: a.keyed,
                per_worker: a.per_worker,
            })
            .collect(),
        body,
        slots: r.max_depth,
    })
}

impl<'a> Resolver<'a, '_> {
    fn set(&mut self, name: &str) -> Result<SetRef> {
        if let Some(i) = self.prog.results.iter().position(|r| r.name == name) {
            return Ok(SetRef::Result(i));
        }
        if self.prog.table(name).is_none() {
            return Err(Error::Undeclared(format!("multiset '{name}' is not declared")));
        }
        if let Some(i) = self.table_names.iter().position(|t| t == name) {
            return Ok(SetRef::Table(i));
        }
        let t = self.db.table(name)?;
        self.tables.push(t);
        self.table_names.push(name.into());
        Ok(SetRef::Table(self.tables.len() - 1))
    }

    /// Column index and stored type of `field`, checked against the declaration.
    fn column(&self, set: SetRef, field: &str) -> Result<(usize, FieldType)> {
        match set {
            SetRef::Result(i) => {
                let s = &self.prog.results[i].schema;
                let col = s.require(field)?;
                Ok((col, s.fields()[col].ty))
            }
            SetRef::Table(i) => {
                let name = &self.table_names[i];
                let stored = self.tables[i].schema();
                let col = stored.index_of(field).ok_or_else(|| {
                    Error::Schema(format!("table '{name}' in the database has no field '{field}'"))
                })?;
                let ty = stored.fields()[col].ty;
                let declared = self
                    .prog
                    .table(name)
                    .and_then(|t| t.schema.field(field))
                    .map(|f| f.ty)
                    .ok_or_else(|| Error::Schema(format!("'{name}' has no declared field '{field}'")))?;
                if declared != ty {
                    return Err(Error::Type(format!(
                        "{name}.{field} is declared {declared} but stored as {ty}"
                    )));
                }
                Ok((col, ty))
            }
        }
    }

    fn lookup(&self, var: &str) -> Result<(usize, Bound)> {
        self.scope
            .iter()
            .enumerate()
            .rev()
            .find(|(_, (n, _))| n == var)
            .map(|(i, (_, b))| (i, b.clone()))
            .ok_or_else(|| Error::Undeclared(format!("'{var}' is not in scope")))
    }

    fn range_slot(&self, var: &str) -> Result<(usize, u32)> {
        match self.lookup(var)? {
            (slot, Bound::Range(n)) => Ok((slot, n)),
            _ => Err(Error::Schema(format!("'{var}' is not a range iterator"))),
        }
    }

    fn acc_index(&self, name: &str) -> Result<usize> {
        self.prog
            .accs
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::Undeclared(format!("accumulator '{name}' is not declared")))
    }

    fn expr(&mut self, e: &Expr) -> Result<CExpr> {
        Ok(match e {
            Expr::Int(n) => CExpr::Const(Value::Int(*n)),
            Expr::Str(s) => CExpr::Const(Value::Str(s.clone())),
            Expr::Field { set, var, field } => {
                let (slot, b) = self.lookup(var)?;
                let Bound::Row(sr) = b else {
                    return Err(Error::Schema(format!("'{var}' does not iterate tuples")));
                };
                if sr != self.set(set)? {
                    return Err(Error::Schema(format!("'{var}' does not iterate '{set}'")));
                }
                CExpr::Field {
                    slot,
                    set: sr,
                    col: self.column(sr, field)?.0,
                }
            }
            Expr::Var(v) => match self.lookup(v)? {
                (slot, Bound::Range(_)) => CExpr::Int(slot),
                (slot, Bound::Value) => CExpr::Val(slot),
                (_, Bound::Row(_)) => return Err(Error::Type(format!("tuple iterator '{v}' used as a value"))),
            },
            Expr::Acc(r) => CExpr::Acc {
                acc: self.acc_index(&r.name)?,
                worker: r.worker.as_deref().map(|w| self.range_slot(w).map(|x| x.0)).transpose()?,
                key: r.key.as_deref().map(|k| self.expr(k).map(Box::new)).transpose()?,
            },
            Expr::SumWorkers { name, key } => CExpr::Sum {
                acc: self.acc_index(name)?,
                key: key.as_deref().map(|k| self.expr(k).map(Box::new)).transpose()?,
            },
            Expr::Add(a, b) => CExpr::Add(Box::new(self.expr(a)?), Box::new(self.expr(b)?)),
            Expr::Mul(a, b) => CExpr::Mul(Box::new(self.expr(a)?), Box::new(self.expr(b)?)),
        })
    }

    fn acc_ref(&mut self, r: &ir::AccRef) -> Result<CAcc> {
        Ok(CAcc {
            acc: self.acc_index(&r.name)?,
            worker: r.worker.as_deref().map(|w| self.range_slot(w).map(|x| x.0)).transpose()?,
            key: r.key.as_deref().map(|k| self.expr(k)).transpose()?,
        })
    }

    fn stmts(&mut self, body: &[Stmt]) -> Result<Vec<CStmt>> {
        body.iter().map(|s| self.stmt(s)).collect()
    }

    fn stmt(&mut self, s: &Stmt) -> Result<CStmt> {
        Ok(match s {
            Stmt::Loop(l) => CStmt::Loop(self.loop_(l)?),
            Stmt::Accumulate { target, delta } => CStmt::Accumulate {
                target: self.acc_ref(target)?,
                delta: self.expr(delta)?,
            },
            Stmt::Assign { target, value } => CStmt::Assign {
                target: self.acc_ref(target)?,
                value: self.expr(value)?,
            },
            Stmt::Union { target, values } => CStmt::Union {
                res: self.result_index(&target.name)?,
                worker: target.worker.as_deref().map(|w| self.range_slot(w).map(|x| x.0)).transpose()?,
                values: values.iter().map(|v| self.expr(v)).collect::<Result<_>>()?,
            },
            Stmt::Merge { target } => CStmt::Merge {
                res: self.result_index(target)?,
            },
        })
    }

    fn result_index(&self, name: &str) -> Result<usize> {
        self.prog
            .results
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| Error::Undeclared(format!("result '{name}' is not declared")))
    }

    fn loop_(&mut self, l: &ir::Loop) -> Result<CLoop> {
        let slot = self.scope.len();
        let nested = slot > 0;
        let (kind, bound) = match &l.header {
            Header::Forelem { domain, method, .. } => {
                let set = self.set(&domain.set)?;
                let filter = match &domain.filter {
                    Some(f) => {
                        let (col, ty) = self.column(set, &f.field)?;
                        Some((col, ty, self.expr(&f.value)?))
                    }
                    None => None,
                };
                let distinct = domain
                    .distinct
                    .as_deref()
                    .map(|d| self.column(set, d).map(|c| c.0))
                    .transpose()?;
                let block = domain.block.as_deref().map(|k| self.range_slot(k)).transpose()?;
                let hash = matches!(method, Some(IterMethod::HashProbe(_))) && filter.is_some();
                (
                    CKind::Forelem {
                        set,
                        filter,
                        distinct,
                        block,
                        hash,
                    },
                    Bound::Row(set),
                )
            }
            Header::Range { n, parallel, .. } => (
                CKind::Range {
                    n: *n,
                    parallel: *parallel,
                },
                Bound::Range(*n),
            ),
            Header::Values { set, field, part, .. } => {
                let sr = self.set(set)?;
                let (col, _) = self.column(sr, field)?;
                let part = part.as_deref().map(|k| self.range_slot(k)).transpose()?;
                (CKind::Values { set: sr, col, part }, Bound::Value)
            }
        };
        let shared_write = match &l.header {
            Header::Range { parallel: true, var, .. } => shared_write(self.prog, &l.body, var),
            _ => None,
        };
        self.scope.push((l.header.var().into(), bound));
        self.max_depth = self.max_depth.max(self.scope.len());
        let body = self.stmts(&l.body);
        self.scope.pop();
        Ok(CLoop {
            kind,
            slot,
            nested,
            body: body?,
            shared_write,
        })
    }
}

/// First write in a forall body that is not private to iteration `k`.
fn shared_write(prog: &Program, body: &[Stmt], k: &str) -> Option<String> {
    let mut found = None;
    for s in body {
        s.walk(&mut |st| {
            if found.is_some() {
                return;
            }
            match st {
                Stmt::Accumulate { target, .. } | Stmt::Assign { target, .. } => {
                    let private = prog.acc(&target.name).is_some_and(|a| a.per_worker)
                        && target.worker.as_deref() == Some(k);
                    if !private {
                        found = Some(format!("writes accumulator '{}' shared between iterations of '{k}'", target.name));
                    }
                }
                Stmt::Union { target, .. } => {
                    if target.worker.as_deref().is_some_and(|w| w != k) {
                        found = Some(format!("writes copy '{}[{}]' from iterations of '{k}'", target.name, target.worker.as_deref().unwrap_or("")));
                    }
                }
                Stmt::Merge { target } => {
                    found = Some(format!("merges '{target}' inside the parallel loop"));
                }
                _ => {}
            }
        });
    }
    found
}
