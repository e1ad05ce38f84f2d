//! Brute-force SQL evaluation straight from the parsed query: cross product
//! of the FROM list, filter, then group or project. Correlated subqueries see
//! the enclosing row.

use std::collections::BTreeMap;

use forelem_core::sql::{ColRef, ItemExpr, Operand, Select, SqlQuery};
use forelem_core::{Database, FieldType, Value};

use super::Rows;

struct Source {
    columns: Vec<(String, FieldType)>,
    rows: Rows,
}

/// One bound FROM item of the current row: binding name, columns, values.
type Frame<'a> = Vec<(&'a str, &'a [(String, FieldType)], &'a [Value])>;

struct Eval<'a> {
    db: &'a Database,
    views: BTreeMap<String, Source>,
    params: &'a BTreeMap<String, String>,
}

pub fn eval_sql(q: &SqlQuery, db: &Database, params: &BTreeMap<String, String>) -> Rows {
    let mut e = Eval {
        db,
        views: BTreeMap::new(),
        params,
    };
    for v in &q.views {
        let columns = e.columns_of(&v.select);
        let rows = e.select(&v.select, &[]);
        e.views.insert(v.name.clone(), Source { columns, rows });
    }
    e.select(&q.select, &[])
}

impl<'a> Eval<'a> {
    fn source(&self, table: &str) -> Source {
        if let Some(v) = self.views.get(table) {
            return Source {
                columns: v.columns.clone(),
                rows: v.rows.clone(),
            };
        }
        let m = self.db.table(table).unwrap();
        Source {
            columns: m.schema().fields().iter().map(|f| (f.name.clone(), f.ty)).collect(),
            rows: m.rows().iter().map(|r| r.values().to_vec()).collect(),
        }
    }

    /// Column names and types a view exposes.
    fn columns_of(&self, s: &Select) -> Vec<(String, FieldType)> {
        let sources: Vec<(String, Source)> = s.from.iter().map(|f| (f.binding().to_string(), self.source(&f.table))).collect();
        let mut out = Vec::new();
        for item in &s.items {
            match &item.expr {
                ItemExpr::Column(c) => {
                    let ty = sources
                        .iter()
                        .filter(|(b, _)| c.qual.as_deref().is_none_or(|q| q == b))
                        .find_map(|(_, src)| src.columns.iter().find(|(n, _)| *n == c.name).map(|(_, t)| *t))
                        .unwrap();
                    out.push((item.alias.clone().unwrap_or(c.name.clone()), ty));
                }
                ItemExpr::Star => sources.iter().for_each(|(_, s)| out.extend(s.columns.iter().cloned())),
                _ => out.push((item.alias.clone().unwrap_or("agg".into()), FieldType::Int)),
            }
        }
        out
    }

    fn lookup(&self, c: &ColRef, frames: &[Frame<'_>]) -> (Value, FieldType) {
        for frame in frames.iter().rev() {
            for (binding, cols, vals) in frame {
                if c.qual.as_deref().is_some_and(|q| q != *binding) {
                    continue;
                }
                if let Some(i) = cols.iter().position(|(n, _)| *n == c.name) {
                    return (vals[i].clone(), cols[i].1);
                }
            }
        }
        panic!("unresolved column {c:?}")
    }

    fn operand(&self, o: &Operand, frames: &[Frame<'_>], ty_hint: Option<FieldType>) -> Value {
        match o {
            Operand::Col(c) => self.lookup(c, frames).0,
            Operand::Int(i) => Value::Int(*i),
            Operand::Str(s) => Value::Str(s.clone()),
            Operand::Param(p) => {
                let text = &self.params[p];
                match ty_hint {
                    Some(FieldType::Int) => Value::Int(text.parse().unwrap()),
                    Some(FieldType::Float) => Value::Float(text.parse().unwrap()),
                    _ => Value::Str(text.clone()),
                }
            }
        }
    }

    fn hint(&self, o: &Operand, frames: &[Frame<'_>]) -> Option<FieldType> {
        match o {
            Operand::Col(c) => Some(self.lookup(c, frames).1),
            _ => None,
        }
    }

    fn select(&self, s: &Select, outer: &[Frame<'_>]) -> Rows {
        let sources: Vec<(String, Source)> = s.from.iter().map(|f| (f.binding().to_string(), self.source(&f.table))).collect();
        // Cross product as index vectors.
        let mut combos: Vec<Vec<usize>> = vec![vec![]];
        for (_, src) in &sources {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    (0..src.rows.len()).map(move |i| {
                        let mut c = c.clone();
                        c.push(i);
                        c
                    })
                })
                .collect();
        }
        let frame_of = |combo: &[usize]| -> Frame<'_> {
            sources
                .iter()
                .zip(combo)
                .map(|((b, src), &i)| (b.as_str(), src.columns.as_slice(), src.rows[i].as_slice()))
                .collect()
        };
        let matching: Vec<Vec<usize>> = combos
            .into_iter()
            .filter(|combo| {
                let mut frames = outer.to_vec();
                frames.push(frame_of(combo));
                s.conds.iter().all(|c| {
                    let l = self.operand(&c.left, &frames, self.hint(&c.right, &frames));
                    let r = self.operand(&c.right, &frames, self.hint(&c.left, &frames));
                    l == r
                })
            })
            .collect();

        let aggregate = s
            .items
            .iter()
            .any(|i| matches!(i.expr, ItemExpr::Count(_) | ItemExpr::Sum(_)));
        let groups: Vec<Vec<Vec<usize>>> = if let Some(g) = &s.group_by {
            let mut by: BTreeMap<Value, Vec<Vec<usize>>> = BTreeMap::new();
            for combo in matching {
                let mut frames = outer.to_vec();
                frames.push(frame_of(&combo));
                by.entry(self.lookup(g, &frames).0).or_default().push(combo);
            }
            by.into_values().collect()
        } else if aggregate {
            vec![matching]
        } else {
            matching.into_iter().map(|c| vec![c]).collect()
        };

        let mut out = Vec::new();
        for group in groups {
            let first = group.first().map(|c| frame_of(c));
            let mut row = Vec::new();
            let mut frames = outer.to_vec();
            if let Some(f) = &first {
                frames.push(f.clone());
            }
            for item in &s.items {
                match &item.expr {
                    ItemExpr::Star => {
                        for (_, _, vals) in first.as_ref().unwrap() {
                            row.extend(vals.iter().cloned());
                        }
                    }
                    ItemExpr::Column(c) => row.push(self.lookup(c, &frames).0),
                    ItemExpr::Count(_) => row.push(Value::Int(group.len() as i64)),
                    ItemExpr::Sum(c) => {
                        let total = group
                            .iter()
                            .map(|combo| {
                                let mut fs = outer.to_vec();
                                fs.push(frame_of(combo));
                                self.lookup(c, &fs).0.as_int().unwrap()
                            })
                            .sum();
                        row.push(Value::Int(total));
                    }
                    ItemExpr::Subquery(sub) => {
                        let inner = self.select(sub, &frames);
                        row.push(inner[0][0].clone());
                    }
                }
            }
            out.push(row);
        }
        if s.distinct {
            out.sort();
            out.dedup();
        }
        out
    }
}
