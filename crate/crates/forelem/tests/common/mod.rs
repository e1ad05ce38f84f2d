//! Shared helpers for integration tests: seeded databases and independent
//! reference evaluators that never touch the loop IR or its executor.

#![allow(dead_code)]

pub mod sql_eval;

use std::collections::BTreeMap;

use forelem::corpus;
use forelem::gen::{random_database, GenOptions};
use forelem_core::{Database, Multiset, Value};

pub type Rows = Vec<Vec<Value>>;

pub const SEEDS: std::ops::Range<u64> = 0..25;

pub fn random_db(seed: u64) -> Database {
    random_database(&corpus::catalog(), seed, &GenOptions::default())
}

fn rows(db: &Database, t: &str) -> Rows {
    db.table(t).unwrap().rows().iter().map(|r| r.values().to_vec()).collect()
}

fn col(db: &Database, t: &str, f: &str) -> usize {
    db.table(t).unwrap().schema().index_of(f).unwrap()
}

fn count_by(db: &Database, t: &str, f: &str) -> Rows {
    let k = col(db, t, f);
    let mut counts: BTreeMap<Value, i64> = BTreeMap::new();
    for r in rows(db, t) {
        *counts.entry(r[k].clone()).or_default() += 1;
    }
    counts.into_iter().map(|(v, n)| vec![v, Value::Int(n)]).collect()
}

/// Expected output results of a bundled program, computed by direct loops
/// over the rows.
pub fn oracle(name: &str, db: &Database) -> BTreeMap<String, Rows> {
    let one = |rows: Rows| BTreeMap::from([("R".to_string(), rows)]);
    match name {
        "url_count" => one(count_by(db, "access", "url")),
        "reverse_links" => one(count_by(db, "links", "target")),
        "join" => {
            let (ab, af) = (col(db, "A", "b_id"), col(db, "A", "field"));
            let (bi, bf) = (col(db, "B", "id"), col(db, "B", "field"));
            let mut out = Vec::new();
            for a in rows(db, "A") {
                for b in rows(db, "B") {
                    if a[ab] == b[bi] {
                        out.push(vec![a[af].clone(), b[bf].clone()]);
                    }
                }
            }
            one(out)
        }
        "grades" | "grades_query" => {
            let (s, g, w) = (col(db, "grades", "studentID"), col(db, "grades", "grade"), col(db, "grades", "weight"));
            let mine: Vec<_> = rows(db, "grades").into_iter().filter(|r| r[s] == Value::Int(1)).collect();
            if name == "grades_query" {
                return one(mine.iter().map(|r| vec![r[g].clone(), r[w].clone()]).collect());
            }
            let total: f64 = mine
                .iter()
                .map(|r| (r[g].as_int().unwrap() * r[w].as_int().unwrap()) as f64)
                .sum();
            BTreeMap::from([("Out".to_string(), vec![vec![Value::Float(total)]])])
        }
        "two_aggregate" => BTreeMap::from([
            ("R1".to_string(), count_by(db, "T", "field1")),
            ("R2".to_string(), count_by(db, "T", "field2")),
        ]),
        "sum_by_key" => {
            let (k, v) = (col(db, "T", "field1"), col(db, "T", "field2"));
            let mut sums: BTreeMap<Value, i64> = BTreeMap::new();
            for r in rows(db, "T") {
                *sums.entry(r[k].clone()).or_default() += r[v].as_int().unwrap();
            }
            one(sums.into_iter().map(|(k, s)| vec![k, Value::Int(s)]).collect())
        }
        other => panic!("no oracle for `{other}`"),
    }
}

fn close(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Float(x), Value::Float(y)) => (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0),
        _ => a == b,
    }
}

/// Bag equality of `got` against `want`, floats within 1e-9 relative.
pub fn bag_eq(got: &Multiset, want: &Rows) -> bool {
    let mut g: Rows = got.rows().iter().map(|r| r.values().to_vec()).collect();
    let mut w = want.clone();
    g.sort();
    w.sort();
    g.len() == w.len() && g.iter().zip(&w).all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(u, v)| close(u, v)))
}

/// Checks every expected output; returns a description of the first mismatch.
pub fn check(results: &BTreeMap<String, Multiset>, want: &BTreeMap<String, Rows>) -> Result<(), String> {
    if results.len() != want.len() {
        return Err(format!("outputs {:?}, expected {:?}", results.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>()));
    }
    for (name, rows) in want {
        let got = results.get(name).ok_or_else(|| format!("missing output {name}"))?;
        if !bag_eq(got, rows) {
            return Err(format!("{name}: got {} rows, expected {}", got.len(), rows.len()));
        }
    }
    Ok(())
}

/// Same as [`check`] for two executor results.
pub fn same_results(a: &BTreeMap<String, Multiset>, b: &BTreeMap<String, Multiset>) -> bool {
    a.len() == b.len()
        && a.iter().all(|(k, m)| {
            let rows: Rows = m.rows().iter().map(|r| r.values().to_vec()).collect();
            b.get(k).is_some_and(|o| bag_eq(o, &rows))
        })
}
