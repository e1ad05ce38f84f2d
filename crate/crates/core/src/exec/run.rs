//! The interpreter over compiled programs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};

use super::compile::{CAcc, CExpr, CKind, CLoop, CStmt, Compiled, SetRef};
use super::store::{Mem, Store};
use crate::database::Database;
use crate::error::{Error, Result};
use crate::ir::AccType;
use crate::multiset::{block_bounds, FieldType, HashIndex, Tuple, Value, ValueRangePartition};
use crate::scheduler::{ChunkStatus, ChunkWork, ScheduleTrace, Simulator};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Counters {
    pub iterations: u64,
    pub scanned: u64,
    pub inner: u64,
    pub probes: u64,
}

impl Counters {
    fn add(&mut self, o: &Counters) {
        self.iterations += o.iterations;
        self.scanned += o.scanned;
        self.inner += o.inner;
        self.probes += o.probes;
    }

    fn work(&self) -> u64 {
        self.iterations + self.scanned + self.probes
    }
}

#[derive(Debug, Clone)]
enum Bind {
    Empty,
    Row(usize),
    Int(i64),
    Val(Value),
}

enum Index {
    Table(HashIndex),
    /// Result indexes are rebuilt when the result has grown.
    Result(usize, HashMap<Value, Vec<usize>>),
}

pub(crate) struct Interp<'c, 'a> {
    c: &'c Compiled<'a>,
    db: &'a Database,
    frame: Vec<Bind>,
    pub counters: Counters,
    pub builds: u64,
    indexes: HashMap<(SetRef, usize), Index>,
    segments: HashMap<(usize, usize, u32), Vec<Vec<Value>>>,
    sim: Option<Simulator>,
    in_chunk: bool,
    pub traces: Vec<ScheduleTrace>,
    /// Forelem iterations executed inside committed parallel chunks, per worker.
    pub parallel_iterations: Vec<u64>,
    pub discarded: u64,
}

impl<'c, 'a> Interp<'c, 'a> {
    pub fn new(c: &'c Compiled<'a>, db: &'a Database, sim: Option<Simulator>) -> Self {
        let p = sim.as_ref().map_or(1, |s| s.pool().p());
        Interp {
            c,
            db,
            frame: alloc::vec![Bind::Empty; c.slots],
            counters: Counters::default(),
            builds: 0,
            indexes: HashMap::new(),
            segments: HashMap::new(),
            sim,
            in_chunk: false,
            traces: Vec::new(),
            parallel_iterations: alloc::vec![0; p],
            discarded: 0,
        }
    }

    pub fn run(&mut self, store: &mut Store) -> Result<()> {
        let mut mem = Mem { base: None, cur: store };
        let body = &self.c.body;
        self.stmts(body, &mut mem)
    }

    fn stmts(&mut self, body: &'c [CStmt], mem: &mut Mem<'_>) -> Result<()> {
        for s in body {
            self.stmt(s, mem)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &'c CStmt, mem: &mut Mem<'_>) -> Result<()> {
        match s {
            CStmt::Loop(l) => self.loop_(l, mem),
            CStmt::Accumulate { target, delta } => {
                let d = self.eval(delta, mem)?;
                let (acc, w, key) = self.target(target, mem)?;
                let ty = self.c.accs[acc].ty;
                let old = mem.read(acc, ty, w, key.as_ref());
                let new = coerce(ty, add(&old, &d)?, &self.c.accs[acc].name)?;
                self.write(mem, acc, w, key, new);
                Ok(())
            }
            CStmt::Assign { target, value } => {
                let v = self.eval(value, mem)?;
                let (acc, w, key) = self.target(target, mem)?;
                let info = &self.c.accs[acc];
                let v = coerce(info.ty, v, &info.name)?;
                if info.keyed && key.is_none() {
                    mem.cur.reset(acc, w);
                } else {
                    self.write(mem, acc, w, key, v);
                }
                Ok(())
            }
            CStmt::Union { res, worker, values } => {
                let schema = &self.c.results[*res].schema;
                let mut row = Vec::with_capacity(values.len());
                for (v, f) in values.iter().zip(schema.fields()) {
                    let v = self.eval(v, mem)?;
                    row.push(match (v, f.ty) {
                        (Value::Int(n), FieldType::Float) => Value::Float(n as f64),
                        (v, ty) if v.field_type() == ty => v,
                        (v, ty) => {
                            return Err(Error::Type(format!(
                                "field '{}' of '{}' is {ty}, got {} value {v}",
                                f.name,
                                self.c.results[*res].name,
                                v.field_type()
                            )))
                        }
                    });
                }
                let r = &mut mem.cur.results[*res];
                match worker {
                    None => r.rows.push(Tuple(row)),
                    Some(slot) => {
                        let k = self.int(*slot);
                        r.workers.entry(k).or_default().push(Tuple(row));
                    }
                }
                Ok(())
            }
            CStmt::Merge { res } => {
                let r = &mut mem.cur.results[*res];
                let parts = core::mem::take(&mut r.workers);
                for (_, rows) in parts {
                    r.rows.extend(rows);
                }
                Ok(())
            }
        }
    }

    fn target(&self, t: &CAcc, mem: &Mem<'_>) -> Result<(usize, Option<i64>, Option<Value>)> {
        let w = t.worker.map(|s| self.int(s));
        let key = t.key.as_ref().map(|k| self.eval(k, mem)).transpose()?;
        Ok((t.acc, w, key))
    }

    fn write(&self, mem: &mut Mem<'_>, acc: usize, w: Option<i64>, key: Option<Value>, v: Value) {
        let slot = mem.cur.slot_mut(acc, w);
        match key {
            None => slot.scalar = Some(v),
            Some(k) => {
                slot.cells.insert(k, v);
            }
        }
    }

    fn int(&self, slot: usize) -> i64 {
        match self.frame[slot] {
            Bind::Int(k) => k,
            _ => unreachable!("range iterator slot holds a counter"),
        }
    }

    fn row<'m>(&self, set: SetRef, h: usize, mem: &'m Mem<'_>) -> &'m Tuple
    where
        'a: 'm,
    {
        match set {
            SetRef::Table(t) => self.c.tables[t].row(h),
            SetRef::Result(r) => mem.result_row(r, h),
        }
    }

    fn set_len(&self, set: SetRef, mem: &Mem<'_>) -> usize {
        match set {
            SetRef::Table(t) => self.c.tables[t].len(),
            SetRef::Result(r) => mem.result_len(r),
        }
    }

    fn eval(&self, e: &CExpr, mem: &Mem<'_>) -> Result<Value> {
        Ok(match e {
            CExpr::Const(v) => v.clone(),
            CExpr::Field { slot, set, col } => match self.frame[*slot] {
                Bind::Row(h) => self.row(*set, h, mem).get(*col).clone(),
                _ => unreachable!("tuple iterator slot holds a handle"),
            },
            CExpr::Int(slot) => Value::Int(self.int(*slot)),
            CExpr::Val(slot) => match &self.frame[*slot] {
                Bind::Val(v) => v.clone(),
                _ => unreachable!("value iterator slot holds a value"),
            },
            CExpr::Acc { acc, worker, key } => {
                let key = key.as_deref().map(|k| self.eval(k, mem)).transpose()?;
                let w = worker.map(|s| self.int(s));
                mem.read(*acc, self.c.accs[*acc].ty, w, key.as_ref())
            }
            CExpr::Sum { acc, key } => {
                let key = key.as_deref().map(|k| self.eval(k, mem)).transpose()?;
                let ty = self.c.accs[*acc].ty;
                let mut total = super::store::zero(ty);
                for k in mem.worker_ids(*acc) {
                    total = add(&total, &mem.read(*acc, ty, Some(k), key.as_ref()))?;
                }
                total
            }
            CExpr::Add(a, b) => add(&self.eval(a, mem)?, &self.eval(b, mem)?)?,
            CExpr::Mul(a, b) => mul(&self.eval(a, mem)?, &self.eval(b, mem)?)?,
        })
    }

    fn loop_(&mut self, l: &'c CLoop, mem: &mut Mem<'_>) -> Result<()> {
        match &l.kind {
            CKind::Range { n, parallel } => {
                if *parallel && self.sim.is_some() && !self.in_chunk {
                    return self.forall(l, *n, mem);
                }
                for k in 1..=*n {
                    self.frame[l.slot] = Bind::Int(k as i64);
                    self.stmts(&l.body, mem)?;
                }
                Ok(())
            }
            CKind::Values { set, col, part } => {
                let values = self.values(*set, *col, *part, mem)?;
                for v in values {
                    self.frame[l.slot] = Bind::Val(v);
                    self.stmts(&l.body, mem)?;
                }
                Ok(())
            }
            CKind::Forelem {
                set,
                filter,
                distinct,
                block,
                hash,
            } => {
                let len = self.set_len(*set, mem);
                let (lo, hi) = match block {
                    Some((slot, n)) => {
                        let k = self.int(*slot);
                        block_bounds(len, *n as usize, (k - 1) as usize)
                    }
                    None => (0, len),
                };
                let handles: Vec<usize> = if let Some((col, ty, e)) = filter {
                    let v = self.eval(e, mem)?;
                    if v.field_type() != *ty {
                        return Err(Error::Type(format!(
                            "cannot compare {ty} field with {} value {v}",
                            v.field_type()
                        )));
                    }
                    if *hash && block.is_none() {
                        self.counters.probes += 1;
                        self.probe(*set, *col, &v, mem)?
                    } else {
                        self.scanned(hi - lo, l.nested);
                        (lo..hi).filter(|&h| self.row(*set, h, mem).get(*col) == &v).collect()
                    }
                } else if let Some(col) = distinct {
                    self.scanned(hi - lo, l.nested);
                    let mut seen = HashSet::new();
                    (lo..hi)
                        .filter(|&h| seen.insert(self.row(*set, h, mem).get(*col).clone()))
                        .collect()
                } else {
                    self.scanned(hi - lo, l.nested);
                    (lo..hi).collect()
                };
                for h in handles {
                    self.frame[l.slot] = Bind::Row(h);
                    self.counters.iterations += 1;
                    self.stmts(&l.body, mem)?;
                }
                Ok(())
            }
        }
    }

    fn scanned(&mut self, n: usize, nested: bool) {
        self.counters.scanned += n as u64;
        if nested {
            self.counters.inner += n as u64;
        }
    }

    fn probe(&mut self, set: SetRef, col: usize, v: &Value, mem: &Mem<'_>) -> Result<Vec<usize>> {
        let len = self.set_len(set, mem);
        let fresh = match self.indexes.get(&(set, col)) {
            Some(Index::Table(_)) => false,
            Some(Index::Result(n, _)) => *n != len,
            None => true,
        };
        if fresh {
            self.builds += 1;
            let index = match set {
                SetRef::Table(t) => {
                    let m = self.c.tables[t];
                    Index::Table(HashIndex::build(m, &m.schema().fields()[col].name)?)
                }
                SetRef::Result(r) => {
                    let mut map: HashMap<Value, Vec<usize>> = HashMap::new();
                    for h in 0..len {
                        map.entry(mem.result_row(r, h).get(col).clone()).or_default().push(h);
                    }
                    Index::Result(len, map)
                }
            };
            self.indexes.insert((set, col), index);
        }
        Ok(match &self.indexes[&(set, col)] {
            Index::Table(ix) => ix.lookup(v).to_vec(),
            Index::Result(_, map) => map.get(v).cloned().unwrap_or_default(),
        })
    }

    /// Values bound by a value loop: all distinct values in order, or one
    /// segment of their value-range partition.
    fn values(&mut self, set: SetRef, col: usize, part: Option<(usize, u32)>, mem: &Mem<'_>) -> Result<Vec<Value>> {
        let Some((slot, n)) = part else {
            let mut all: Vec<Value> = (0..self.set_len(set, mem)).map(|h| self.row(set, h, mem).get(col).clone()).collect();
            all.sort();
            all.dedup();
            return Ok(all);
        };
        let k = (self.int(slot) - 1) as usize;
        match set {
            SetRef::Table(t) => {
                if !self.segments.contains_key(&(t, col, n)) {
                    let m = self.c.tables[t];
                    let field = &m.schema().fields()[col].name;
                    let segs = match self.db.distribution(m.name()) {
                        Some(d) if d.field() == field && d.n() == n as usize => d.segments().to_vec(),
                        _ => ValueRangePartition::of_field(m, field, n as usize)?.segments().to_vec(),
                    };
                    self.segments.insert((t, col, n), segs);
                }
                Ok(self.segments[&(t, col, n)][k].clone())
            }
            SetRef::Result(_) => {
                let all: alloc::collections::BTreeSet<Value> =
                    (0..self.set_len(set, mem)).map(|h| self.row(set, h, mem).get(col).clone()).collect();
                Ok(crate::multiset::partition_values(&all, n as usize)?.segment(k).to_vec())
            }
        }
    }

    fn forall(&mut self, l: &'c CLoop, n: u32, mem: &mut Mem<'_>) -> Result<()> {
        if let Some(why) = &l.shared_write {
            return Err(Error::Unsupported(format!("cannot run a parallel loop that {why}")));
        }
        let mut sim = self.sim.take().expect("checked by caller");
        let outcome = {
            let mut work = Chunks {
                interp: self,
                body: &l.body,
                slot: l.slot,
                base: &*mem.cur,
                done: BTreeMap::new(),
            };
            let trace = sim.run(n as u64, &mut work);
            trace.map(|t| (t, work.done))
        };
        self.sim = Some(sim);
        let (trace, mut done) = outcome?;
        let mut order: Vec<usize> = (0..trace.entries.len())
            .filter(|&i| trace.entries[i].status == ChunkStatus::Done)
            .collect();
        order.sort_by_key(|&i| trace.entries[i].start);
        for i in order {
            let (overlay, counters) = done.remove(&i).expect("every completed chunk ran");
            mem.cur.commit(overlay);
            self.counters.add(&counters);
            self.parallel_iterations[trace.entries[i].worker] += counters.iterations;
        }
        self.discarded += trace.discarded_iterations();
        self.traces.push(trace);
        Ok(())
    }
}

/// Runs chunks of one forall into private overlays.
struct Chunks<'i, 'c, 'a, 's> {
    interp: &'i mut Interp<'c, 'a>,
    body: &'c [CStmt],
    slot: usize,
    base: &'s Store,
    done: BTreeMap<usize, (Store, Counters)>,
}

impl ChunkWork for Chunks<'_, '_, '_, '_> {
    fn execute(&mut self, entry: usize, _worker: usize, start: u64, end: u64) -> Result<u64> {
        let it = &mut *self.interp;
        let mut overlay = Store::shaped(it.c);
        let outer = core::mem::take(&mut it.counters);
        it.in_chunk = true;
        let mut cost = 0;
        let mut result = Ok(());
        {
            let mut mem = Mem {
                base: Some(self.base),
                cur: &mut overlay,
            };
            for k in start..end {
                let before = it.counters.work();
                it.frame[self.slot] = Bind::Int(k as i64 + 1);
                result = it.stmts(self.body, &mut mem);
                if result.is_err() {
                    break;
                }
                cost += 1 + it.counters.work() - before;
            }
        }
        it.in_chunk = false;
        let counters = core::mem::replace(&mut it.counters, outer);
        result?;
        self.done.insert(entry, (overlay, counters));
        Ok(cost)
    }
}

fn arith_err(op: &str, a: &Value, b: &Value) -> Error {
    Error::Type(format!("cannot {op} {} and {} values", a.field_type(), b.field_type()))
}

pub(crate) fn add(a: &Value, b: &Value) -> Result<Value> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x
            .checked_add(*y)
            .map(Value::Int)
            .ok_or_else(|| Error::Eval(format!("integer overflow in {x} + {y}"))),
        (Value::Str(_), _) | (_, Value::Str(_)) => Err(arith_err("add", a, b)),
        _ => Ok(Value::Float(a.as_f64().unwrap() + b.as_f64().unwrap())),
    }
}

pub(crate) fn mul(a: &Value, b: &Value) -> Result<Value> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x
            .checked_mul(*y)
            .map(Value::Int)
            .ok_or_else(|| Error::Eval(format!("integer overflow in {x} * {y}"))),
        (Value::Str(_), _) | (_, Value::Str(_)) => Err(arith_err("multiply", a, b)),
        _ => Ok(Value::Float(a.as_f64().unwrap() * b.as_f64().unwrap())),
    }
}

fn coerce(ty: AccType, v: Value, name: &str) -> Result<Value> {
    match (ty, v) {
        (AccType::Int, v @ Value::Int(_)) | (AccType::Float, v @ Value::Float(_)) => Ok(v),
        (AccType::Float, Value::Int(n)) => Ok(Value::Float(n as f64)),
        (_, v) => Err(Error::Type(format!(
            "accumulator '{name}' holds {} values, got {}",
            ty.field_type(),
            v.field_type().to_string()
        ))),
    }
}
