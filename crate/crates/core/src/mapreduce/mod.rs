//! Re-emits programs of the accumulate-then-read shape as MapReduce jobs and
//! runs them on a small in-process map/shuffle/reduce framework.
//!
//! The shape is two adjacent loops: the first iterates a table and adds into
//! an accumulator subscripted by one of the table's fields, the second visits
//! each distinct value of that field and emits it with the accumulated cell.
//! The first loop becomes the map function, emitting `(field, delta)` pairs;
//! the reduce function counts or sums the values collected for each key.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::database::Database;
use crate::error::{Error, Result};
use crate::ir::{AccRef, Domain, Expr, Header, Loop, Program, Stmt};
use crate::multiset::{block_bounds, FieldType, Multiset, Schema, Tuple, Value};
use crate::transforms::{expand_and_hoist, merge_consumer};

/// What the map function emits as the value of each pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MapValue {
    Const(i64),
    Field(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceKind {
    CountValues,
    SumValues,
}

/// A matched accumulate-then-read pair of loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub input: String,
    pub key_field: String,
    pub delta: MapValue,
    pub accumulator: String,
    pub output: String,
    pub output_schema: Schema,
    /// Position of the key in output tuples; the aggregate takes the other.
    pub key_first: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrProgram {
    pub input: String,
    pub key_field: String,
    pub value: MapValue,
    pub reduce: ReduceKind,
    /// Name used for the running aggregate in the reduce function.
    pub aggregate: String,
    pub output: String,
    pub output_schema: Schema,
    pub key_first: bool,
}

/// Every intermediate step of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MrTrace {
    pub map_tasks: usize,
    /// `(map task, key, value)` in emission order.
    pub emitted: Vec<(usize, Value, Value)>,
    pub groups: BTreeMap<Value, Vec<Value>>,
    pub reduced: Vec<(Value, Value)>,
}

impl MrTrace {
    /// One `phase key value` record per emitted pair, grouped value and reduce output.
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (_, k, v) in &self.emitted {
            out.push(format!("map {k} {v}"));
        }
        for (k, vs) in &self.groups {
            for v in vs {
                out.push(format!("shuffle {k} {v}"));
            }
        }
        for (k, v) in &self.reduced {
            out.push(format!("reduce {k} {v}"));
        }
        out
    }
}

struct Producer {
    table: String,
    acc: String,
    key_field: String,
    delta: MapValue,
}

/// Reads `acc[T[var].f] += δ` with δ a literal or a field of the same tuple.
fn accumulation(s: &Stmt, table: &str, var: &str, worker: Option<&str>) -> Option<Producer> {
    let Stmt::Accumulate {
        target: AccRef { name, worker: w, key: Some(key) },
        delta,
    } = s
    else {
        return None;
    };
    if w.as_deref() != worker {
        return None;
    }
    let Expr::Field { set, var: v, field } = key.as_ref() else { return None };
    if set != table || v != var {
        return None;
    }
    let delta = match delta {
        Expr::Int(c) => MapValue::Const(*c),
        Expr::Field { set, var: v, field } if set == table && v == var => MapValue::Field(field.clone()),
        _ => return None,
    };
    Some(Producer {
        table: table.into(),
        acc: name.clone(),
        key_field: field.clone(),
        delta,
    })
}

/// The producing loop, sequential or in one of the partitioned forms.
fn producer(s: &Stmt) -> Option<Producer> {
    let Stmt::Loop(l) = s else { return None };
    match &l.header {
        Header::Forelem { var, domain, .. } if domain.is_plain() => match &l.body[..] {
            [a] => accumulation(a, &domain.set, var, None),
            _ => None,
        },
        Header::Range { var: k, .. } => {
            let [Stmt::Loop(inner)] = &l.body[..] else { return None };
            match &inner.header {
                Header::Forelem { var, domain, .. }
                    if domain.block.as_deref() == Some(k.as_str()) && domain.filter.is_none() && domain.distinct.is_none() =>
                {
                    match &inner.body[..] {
                        [a] => accumulation(a, &domain.set, var, Some(k)),
                        _ => None,
                    }
                }
                Header::Values {
                    var: lv,
                    set,
                    field,
                    part: Some(p),
                } if p == k => {
                    let [Stmt::Loop(Loop {
                        header: Header::Forelem { var, domain, .. },
                        body,
                    })] = &inner.body[..]
                    else {
                        return None;
                    };
                    let filtered_by_l = matches!(&domain.filter, Some(f) if f.field == *field && f.value == Expr::Var(lv.clone()));
                    if !filtered_by_l || domain.set != *set || domain.block.is_some() {
                        return None;
                    }
                    match &body[..] {
                        [a] => accumulation(a, set, var, Some(k)),
                        _ => None,
                    }
                }
                _ => None,
            }
        }
        _ => None,
    }
}

fn is_zero_init(s: &Stmt) -> bool {
    matches!(s, Stmt::Assign { value: Expr::Int(0), .. })
}

fn match_program(p: &Program) -> Option<Pattern> {
    let stmts: Vec<&Stmt> = p.body.iter().filter(|s| !is_zero_init(s)).collect();
    let [first, second] = stmts[..] else { return None };
    let prod = producer(first)?;
    let decl = p.acc(&prod.acc)?;
    if !decl.keyed {
        return None;
    }
    let Stmt::Loop(l) = second else { return None };
    let Header::Forelem { var, domain, .. } = &l.header else { return None };
    let want = Domain::distinct(prod.table.clone(), prod.key_field.clone());
    if *domain != want {
        return None;
    }
    let [Stmt::Union { target, values }] = &l.body[..] else { return None };
    let out = p.result(&target.name)?;
    if !out.output || target.worker.is_some() || values.len() != 2 || p.outputs().count() != 1 {
        return None;
    }
    let key = Expr::field(prod.table.clone(), var.clone(), prod.key_field.clone());
    let reads_cell = |e: &Expr| match e {
        Expr::Acc(AccRef { name, worker: None, key: Some(k) }) => *name == prod.acc && **k == key && !decl.per_worker,
        Expr::SumWorkers { name, key: Some(k) } => *name == prod.acc && **k == key && decl.per_worker,
        _ => false,
    };
    let key_first = if values[0] == key && reads_cell(&values[1]) {
        true
    } else if values[1] == key && reads_cell(&values[0]) {
        false
    } else {
        return None;
    };
    // Every other statement may only reset the accumulator.
    if p.body.iter().filter(|s| is_zero_init(s)).any(|s| {
        !matches!(s, Stmt::Assign { target, .. } if target.name == prod.acc)
    }) {
        return None;
    }
    Some(Pattern {
        input: prod.table,
        key_field: prod.key_field,
        delta: prod.delta,
        accumulator: prod.acc,
        output: out.name.clone(),
        output_schema: out.schema.clone(),
        key_first,
    })
}

/// Finds the accumulate-then-read shape. Programs where it is hidden behind
/// an intermediate result or a per-group counter are first normalised with
/// producer/consumer merging and counter hoisting.
pub fn detect_pattern(p: &Program) -> Option<Pattern> {
    if let Some(m) = match_program(p) {
        return Some(m);
    }
    let (merged, _) = merge_consumer(p);
    let (hoisted, _) = expand_and_hoist(&merged);
    match_program(&hoisted)
}

pub fn emit_mapreduce(pat: &Pattern) -> MrProgram {
    let (value, reduce) = match &pat.delta {
        MapValue::Const(1) => (MapValue::Const(1), ReduceKind::CountValues),
        other => (other.clone(), ReduceKind::SumValues),
    };
    MrProgram {
        input: pat.input.clone(),
        key_field: pat.key_field.clone(),
        value,
        reduce,
        aggregate: pat.accumulator.clone(),
        output: pat.output.clone(),
        output_schema: pat.output_schema.clone(),
        key_first: pat.key_first,
    }
}

/// Pseudocode in the style of the original MapReduce description.
impl fmt::Display for MrProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let table = self.input.to_lowercase();
        let mut title = String::new();
        let mut chars = self.input.chars();
        if let Some(c) = chars.next() {
            title.extend(c.to_uppercase());
            title.push_str(chars.as_str());
        }
        let row = match table.chars().next() {
            Some(c) if c.to_string() != table => c.to_string(),
            _ => String::from("row"),
        };
        let value = match &self.value {
            MapValue::Const(c) => format!("{c}"),
            MapValue::Field(v) => format!("{row}.{v}"),
        };
        writeln!(f, "map(key, value):")?;
        writeln!(f, "  # Assume value represents content of {title} table")?;
        writeln!(f, "  {table} = value")?;
        writeln!(f, "  for {row} in {table}:")?;
        writeln!(f, "    emitIntermediate({row}.{}, {value})", self.key_field)?;
        writeln!(f, "reduce(key, values):")?;
        writeln!(f, "  {} = 0", self.aggregate)?;
        writeln!(f, "  for v in values:")?;
        match self.reduce {
            ReduceKind::CountValues => writeln!(f, "    {}++", self.aggregate)?,
            ReduceKind::SumValues => writeln!(f, "    {} += v", self.aggregate)?,
        }
        writeln!(f, "  emit(key, {})", self.aggregate)
    }
}

fn add(a: &Value, b: &Value) -> Result<Value> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x
            .checked_add(*y)
            .map(Value::Int)
            .ok_or_else(|| Error::Eval(format!("integer overflow adding {x} and {y}"))),
        _ => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => Ok(Value::Float(x + y)),
            _ => Err(Error::Type(format!("cannot add {a} and {b}"))),
        },
    }
}

/// Splits the input into `splits` near-equal row ranges, maps each, groups
/// the pairs by key and reduces each group in key order.
pub fn run_mapreduce(mr: &MrProgram, db: &Database, splits: usize) -> Result<(Multiset, MrTrace)> {
    if splits == 0 {
        return Err(Error::Argument("splits must be at least 1".into()));
    }
    let t = db.table(&mr.input)?;
    let key_at = t.schema().require(&mr.key_field)?;
    let value_at = match &mr.value {
        MapValue::Field(v) => Some(t.schema().require(v)?),
        MapValue::Const(_) => None,
    };
    if mr.output_schema.len() != 2 {
        return Err(Error::schema("MapReduce output must have two columns"));
    }
    let (kcol, acol) = if mr.key_first { (0, 1) } else { (1, 0) };
    let out_ty = mr.output_schema.fields()[acol].ty;
    if mr.output_schema.fields()[kcol].ty != t.schema().fields()[key_at].ty {
        return Err(Error::schema(format!(
            "key column of '{}' does not match {}.{}",
            mr.output, mr.input, mr.key_field
        )));
    }

    let mut trace = MrTrace {
        map_tasks: splits,
        ..MrTrace::default()
    };
    for task in 0..splits {
        let (start, end) = block_bounds(t.len(), splits, task);
        for row in &t.rows()[start..end] {
            let v = match (value_at, &mr.value) {
                (Some(c), _) => row.get(c).clone(),
                (None, MapValue::Const(c)) => Value::Int(*c),
                (None, MapValue::Field(_)) => unreachable!(),
            };
            trace.emitted.push((task, row.get(key_at).clone(), v));
        }
    }
    for (_, k, v) in &trace.emitted {
        trace.groups.entry(k.clone()).or_default().push(v.clone());
    }
    let mut out = Multiset::new(mr.output.clone(), mr.output_schema.clone());
    for (k, vs) in &trace.groups {
        let mut agg = match out_ty {
            FieldType::Float => Value::Float(0.0),
            _ => Value::Int(0),
        };
        for v in vs {
            agg = match mr.reduce {
                ReduceKind::CountValues => add(&agg, &Value::Int(1))?,
                ReduceKind::SumValues => add(&agg, v)?,
            };
        }
        if let (FieldType::Float, Value::Int(n)) = (out_ty, &agg) {
            agg = Value::Float(*n as f64);
        }
        trace.reduced.push((k.clone(), agg.clone()));
        let row = if mr.key_first {
            alloc::vec![k.clone(), agg]
        } else {
            alloc::vec![agg, k.clone()]
        };
        out.push(Tuple(row))?;
    }
    Ok((out, trace))
}
