use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{decode_field, project};
use crate::database::Database;
use crate::error::{Error, Result};
use crate::ir::{Expr, Header, IterMethod, Program, Stmt};
use crate::multiset::{FieldType, Multiset};

type Src = (String, String);

/// Fields of each declared table that the program reads.
pub fn accessed_fields(p: &Program) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> =
        p.tables.iter().map(|t| (t.name.clone(), BTreeSet::new())).collect();
    let mut add = |set: &str, field: &str| {
        if let Some(s) = out.get_mut(set) {
            s.insert(field.into());
        }
    };
    p.walk(&mut |s| {
        if let Stmt::Loop(l) = s {
            match &l.header {
                Header::Forelem { domain, method, .. } => {
                    if let Some(f) = &domain.filter {
                        add(&domain.set, &f.field);
                    }
                    if let Some(d) = &domain.distinct {
                        add(&domain.set, d);
                    }
                    if let Some(IterMethod::HashProbe(f)) = method {
                        add(&domain.set, f);
                    }
                }
                Header::Values { set, field, .. } => add(set, field),
                Header::Range { .. } => {}
            }
        }
        for e in s.own_exprs() {
            e.visit(&mut |x| {
                if let Expr::Field { set, field, .. } = x {
                    add(set, field);
                }
            });
        }
    });
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DropReport {
    /// `(table, field)` pairs removed from the stored layout.
    pub dropped: Vec<(String, String)>,
}

/// Removes from the stored tables every field the program never reads.
/// Tables the program does not declare are left alone.
pub fn drop_unused_fields(p: &Program, db: &Database) -> Result<(Database, DropReport)> {
    let used = accessed_fields(p);
    let mut out = db.clone();
    let mut report = DropReport::default();
    for (table, fields) in &used {
        let Some(m) = db.get(table) else { continue };
        let keep: Vec<&str> = m.schema().names().filter(|n| fields.contains(*n)).collect();
        for n in m.schema().names().filter(|n| !fields.contains(*n)) {
            report.dropped.push((table.clone(), n.into()));
        }
        if keep.len() != m.schema().len() {
            out.replace(project(m, &keep));
        }
    }
    Ok((out, report))
}

/// String fields used as filter, grouping or distinct keys: the candidates
/// for dictionary encoding.
pub fn auto_reformat_fields(p: &Program, db: &Database) -> Vec<(String, String)> {
    let mut keys: BTreeSet<(String, String)> = BTreeSet::new();
    p.walk(&mut |s| {
        match s {
            Stmt::Loop(l) => match &l.header {
                Header::Forelem { domain, .. } => {
                    if let Some(f) = &domain.filter {
                        keys.insert((domain.set.clone(), f.field.clone()));
                    }
                    if let Some(d) = &domain.distinct {
                        keys.insert((domain.set.clone(), d.clone()));
                    }
                }
                Header::Values { set, field, .. } => {
                    keys.insert((set.clone(), field.clone()));
                }
                Header::Range { .. } => {}
            },
            Stmt::Accumulate { target, .. } | Stmt::Assign { target, .. } => {
                if let Some(Expr::Field { set, field, .. }) = target.key.as_deref() {
                    keys.insert((set.clone(), field.clone()));
                }
            }
            _ => {}
        }
    });
    keys.into_iter()
        .filter(|(t, f)| {
            p.table(t).is_some()
                && db
                    .get(t)
                    .and_then(|m| m.schema().field(f))
                    .is_some_and(|fd| fd.ty == FieldType::Str)
        })
        .collect()
}

/// Output fields holding dictionary keys, decoded at the output boundary.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutputDecoding {
    /// `(result, field index, table, table field)`
    pub fields: Vec<(String, usize, String, String)>,
}

impl OutputDecoding {
    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn apply(&self, results: &mut BTreeMap<String, Multiset>, db: &Database) -> Result<()> {
        for (res, idx, table, field) in &self.fields {
            let Some(m) = results.get(res) else { continue };
            let dict = db
                .dictionary(table, field)
                .ok_or_else(|| Error::Schema(format!("no dictionary for {table}.{field}")))?;
            let decoded = decode_field(m, *idx, dict)?;
            results.insert(res.clone(), decoded);
        }
        Ok(())
    }
}

struct Prov<'a> {
    p: &'a Program,
    map: BTreeMap<Src, Src>,
}

impl Prov<'_> {
    fn expr(&self, e: &Expr, scope: &[(String, Src)]) -> Option<Src> {
        match e {
            Expr::Field { set, field, .. } => self.map.get(&(set.clone(), field.clone())).cloned(),
            Expr::Var(v) => {
                let (_, src) = scope.iter().rev().find(|(n, _)| n == v)?;
                self.map.get(src).cloned()
            }
            _ => None,
        }
    }

    fn propagate(&mut self, body: &[Stmt], scope: &mut Vec<(String, Src)>) -> bool {
        let mut changed = false;
        for s in body {
            match s {
                Stmt::Loop(l) => {
                    let pushed = if let Header::Values { var, set, field, .. } = &l.header {
                        scope.push((var.clone(), (set.clone(), field.clone())));
                        true
                    } else {
                        false
                    };
                    changed |= self.propagate(&l.body, scope);
                    if pushed {
                        scope.pop();
                    }
                }
                Stmt::Union { target, values } => {
                    let Some(r) = self.p.result(&target.name) else { continue };
                    for (v, f) in values.iter().zip(r.schema.fields()) {
                        if let Some(src) = self.expr(v, scope) {
                            let k = (r.name.clone(), f.name.clone());
                            if !self.map.contains_key(&k) {
                                self.map.insert(k, src);
                                changed = true;
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        changed
    }

    fn rewrite(&self, body: &mut [Stmt], scope: &mut Vec<(String, Src)>, db: &Database) -> Result<()> {
        for s in body {
            let Stmt::Loop(l) = s else { continue };
            let pushed = match &mut l.header {
                Header::Forelem { domain, .. } => {
                    if let Some(f) = &mut domain.filter {
                        let here = self.map.get(&(domain.set.clone(), f.field.clone())).cloned();
                        let there = self.expr(&f.value, scope);
                        match (&here, &f.value) {
                            (Some((t, fld)), Expr::Str(s)) => {
                                let d = db.dictionary(t, fld).expect("provenance comes from dictionaries");
                                f.value = Expr::Int(d.key(s).unwrap_or(-1));
                            }
                            _ if here != there => {
                                return Err(Error::Unsupported(format!(
                                    "filter {}.{} compares values from different encodings",
                                    domain.set, f.field
                                )))
                            }
                            _ => {}
                        }
                    }
                    false
                }
                Header::Values { var, set, field, .. } => {
                    scope.push((var.clone(), (set.clone(), field.clone())));
                    true
                }
                Header::Range { .. } => false,
            };
            self.rewrite(&mut l.body, scope, db)?;
            if pushed {
                scope.pop();
            }
        }
        Ok(())
    }
}

/// Rewrites a program written against logical (string) schemas so it runs on
/// a database whose string fields are dictionary encoded: declarations are
/// retyped, string literals compared with encoded fields become keys, and
/// the returned [`OutputDecoding`] says which output fields carry keys.
pub fn adapt_program(p: &Program, db: &Database) -> Result<(Program, OutputDecoding)> {
    let mut prov = Prov {
        p,
        map: BTreeMap::new(),
    };
    for t in &p.tables {
        for f in t.schema.fields() {
            if db.dictionary(&t.name, &f.name).is_some() {
                prov.map
                    .insert((t.name.clone(), f.name.clone()), (t.name.clone(), f.name.clone()));
            }
        }
    }
    if prov.map.is_empty() {
        return Ok((p.clone(), OutputDecoding::default()));
    }
    while prov.propagate(&p.body, &mut Vec::new()) {}

    let mut out = p.clone();
    prov.rewrite(&mut out.body, &mut Vec::new(), db)?;
    let mut decoding = OutputDecoding::default();
    for t in &mut out.tables {
        for i in 0..t.schema.len() {
            if prov.map.contains_key(&(t.name.clone(), t.schema.fields()[i].name.clone())) {
                t.schema.set_type(i, FieldType::Int);
            }
        }
    }
    for r in &mut out.results {
        for i in 0..r.schema.len() {
            let fname = r.schema.fields()[i].name.clone();
            if let Some((t, f)) = prov.map.get(&(r.name.clone(), fname)) {
                r.schema.set_type(i, FieldType::Int);
                if r.output {
                    decoding.fields.push((r.name.clone(), i, t.clone(), f.clone()));
                }
            }
        }
    }
    Ok((out, decoding))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;
    use crate::multiset::test_support::rows;
    use crate::reformat::dictionary_encode;
    use alloc::vec;

    const COUNT: &str = "table links(source: str, target: str);
result G(target: str);
output R(target: str, n: int);
acc n: int;
forelem (i in plinks.distinct(target)) G += (links[i].target);
forelem (i in pG) { n = 0; forelem (j in plinks.target[G[i].target]) n += 1; R += (G[i].target, n); }
forelem (i in plinks.target[\"zz\"]) n += 1;
";

    fn db() -> Database {
        Database::with_tables([rows(
            "links",
            &[("source", FieldType::Str), ("target", FieldType::Str)],
            vec![vec!["a".into(), "x".into()], vec!["b".into(), "x".into()]],
        )])
        .unwrap()
    }

    #[test]
    fn only_target_is_accessed() {
        let p = parse_program(COUNT).unwrap();
        let (db2, rep) = drop_unused_fields(&p, &db()).unwrap();
        assert_eq!(rep.dropped, vec![("links".into(), "source".into())]);
        assert_eq!(db2.table("links").unwrap().schema().len(), 1);
        assert_eq!(auto_reformat_fields(&p, &db()), vec![("links".into(), "target".into())]);
    }

    #[test]
    fn adapting_retypes_and_tracks_outputs() {
        let p = parse_program(COUNT).unwrap();
        let (enc, _) = dictionary_encode(&db(), "links", "target").unwrap();
        let (q, dec) = adapt_program(&p, &enc).unwrap();
        assert_eq!(q.table("links").unwrap().schema.field("target").unwrap().ty, FieldType::Int);
        assert_eq!(q.result("G").unwrap().schema.fields()[0].ty, FieldType::Int);
        assert_eq!(dec.fields, vec![("R".into(), 0, "links".into(), "target".into())]);
        let Stmt::Loop(l) = &q.body[2] else { panic!() };
        let Header::Forelem { domain, .. } = &l.header else { panic!() };
        assert_eq!(domain.filter.as_ref().unwrap().value, Expr::Int(-1));
        crate::ir::validate(&q).unwrap();
    }
}
