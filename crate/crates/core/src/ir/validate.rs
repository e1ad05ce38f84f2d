use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;
use crate::error::{Error, Result};
use crate::multiset::FieldType;

#[derive(Debug, Clone)]
enum Binding {
    Tuple(String),
    Range { parallel: bool },
    Value { set: String, field: String },
}

struct Checker<'p> {
    prog: &'p Program,
    scope: Vec<(String, Binding)>,
    errors: Vec<Error>,
}

/// Checks declarations, scoping, nesting and types. Returns the first problem found.
pub fn validate(p: &Program) -> Result<()> {
    match diagnostics(p).into_iter().next() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Every problem found in the program, in source order.
pub fn diagnostics(p: &Program) -> Vec<Error> {
    let mut c = Checker {
        prog: p,
        scope: Vec::new(),
        errors: Vec::new(),
    };
    c.decls();
    for s in &p.body {
        c.stmt(s);
    }
    c.errors
}

impl<'p> Checker<'p> {
    fn fail(&mut self, e: Error) {
        self.errors.push(e);
    }

    fn decls(&mut self) {
        let mut seen: Vec<&str> = Vec::new();
        let names = self
            .prog
            .tables
            .iter()
            .map(|t| t.name.as_str())
            .chain(self.prog.results.iter().map(|r| r.name.as_str()))
            .chain(self.prog.accs.iter().map(|a| a.name.as_str()));
        for n in names {
            if seen.contains(&n) {
                self.errors.push(Error::Schema(format!("'{n}' is declared twice")));
            }
            seen.push(n);
        }
    }

    fn lookup(&self, var: &str) -> Option<&Binding> {
        self.scope.iter().rev().find(|(n, _)| n == var).map(|(_, b)| b)
    }

    fn bind(&mut self, var: &str, b: Binding) {
        if self.lookup(var).is_some() {
            self.fail(Error::Schema(format!("loop variable '{var}' shadows an enclosing loop variable")));
        }
        if self.prog.table(var).is_some() || self.prog.result(var).is_some() || self.prog.acc(var).is_some() {
            self.fail(Error::Schema(format!("loop variable '{var}' hides a declaration")));
        }
        self.scope.push((var.into(), b));
    }

    fn in_forall(&self) -> bool {
        self.scope.iter().any(|(_, b)| matches!(b, Binding::Range { parallel: true }))
    }

    fn require_range(&mut self, var: &str, what: &str) {
        if !matches!(self.lookup(var), Some(Binding::Range { .. })) {
            self.fail(Error::Undeclared(format!(
                "{what} '{var}' is not the iterator of an enclosing range loop"
            )));
        }
    }

    fn field_type(&mut self, set: &str, field: &str) -> Option<FieldType> {
        let Some(schema) = self.prog.set_schema(set) else {
            self.fail(Error::Undeclared(format!("multiset '{set}' is not declared")));
            return None;
        };
        match schema.field(field) {
            Some(f) => Some(f.ty),
            None => {
                self.fail(Error::Schema(format!("'{set}' has no field '{field}'")));
                None
            }
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Loop(l) => self.loop_(l),
            Stmt::Accumulate { target, delta } => {
                self.acc_target(target, true);
                if let Some(t) = self.expr(delta) {
                    if t == FieldType::Str {
                        self.fail(Error::Type(format!("cannot add a string to '{}'", target.name)));
                    }
                }
            }
            Stmt::Assign { target, value } => {
                let reset = matches!(value, Expr::Int(0));
                self.acc_target(target, !reset);
                if let Some(FieldType::Str) = self.expr(value) {
                    self.fail(Error::Type(format!("cannot assign a string to '{}'", target.name)));
                }
                if target.worker.is_none() && self.in_forall() {
                    if let Some(a) = self.prog.acc(&target.name) {
                        if !a.per_worker {
                            self.fail(Error::Unsupported(format!(
                                "assignment to shared accumulator '{}' inside forall",
                                target.name
                            )));
                        }
                    }
                }
            }
            Stmt::Union { target, values } => self.union(target, values),
            Stmt::Merge { target } => match self.prog.result(target) {
                Some(r) if r.per_worker => {}
                Some(_) => self.fail(Error::Schema(format!("'{target}' has no per-worker copies to merge"))),
                None => self.fail(Error::Undeclared(format!("result '{target}' is not declared"))),
            },
        }
    }

    fn loop_(&mut self, l: &Loop) {
        let depth = self.scope.len();
        match &l.header {
            Header::Forelem { var, domain, method } => {
                if let Some(k) = &domain.block {
                    self.require_range(k, "block index");
                }
                if let Some(f) = &domain.filter {
                    let filter_ty = self.field_type(&domain.set, &f.field);
                    let vt = self.expr(&f.value);
                    if let (Some(a), Some(b)) = (filter_ty, vt) {
                        if a != b {
                            self.fail(Error::Type(format!(
                                "filter on {}.{} compares {a} with {b}",
                                domain.set, f.field
                            )));
                        }
                    }
                }
                if let Some(d) = &domain.distinct {
                    self.field_type(&domain.set, d);
                    if domain.filter.is_some() {
                        self.fail(Error::Unsupported("an index set cannot be both filtered and distinct".into()));
                    }
                }
                if domain.filter.is_none() && domain.distinct.is_none() && self.prog.set_schema(&domain.set).is_none() {
                    self.fail(Error::Undeclared(format!("multiset '{}' is not declared", domain.set)));
                }
                if let Some(IterMethod::HashProbe(f)) = method {
                    if domain.filter.as_ref().map(|x| &x.field) != Some(f) {
                        self.fail(Error::Schema(format!(
                            "hash probe on '{f}' requires a filter on that field"
                        )));
                    }
                }
                self.bind(var, Binding::Tuple(domain.set.clone()));
            }
            Header::Range { var, n: _, parallel } => {
                if *parallel && self.in_forall() {
                    self.fail(Error::Unsupported("forall nested inside forall".into()));
                }
                self.bind(var, Binding::Range { parallel: *parallel });
            }
            Header::Values { var, set, field, part } => {
                self.field_type(set, field);
                if let Some(k) = part {
                    self.require_range(k, "partition index");
                }
                self.bind(
                    var,
                    Binding::Value {
                        set: set.clone(),
                        field: field.clone(),
                    },
                );
            }
        }
        for s in &l.body {
            self.stmt(s);
        }
        self.scope.truncate(depth);
    }

    fn union(&mut self, target: &ResultRef, values: &[Expr]) {
        let Some(r) = self.prog.result(&target.name) else {
            self.fail(Error::Undeclared(format!("result '{}' is not declared", target.name)));
            return;
        };
        match (&target.worker, r.per_worker) {
            (Some(w), true) => self.require_range(w, "worker subscript"),
            (None, false) => {}
            (Some(_), false) => self.fail(Error::Schema(format!("result '{}' is not per-worker", r.name))),
            (None, true) => self.fail(Error::Schema(format!("per-worker result '{}' needs a worker subscript", r.name))),
        }
        if values.len() != r.schema.len() {
            self.fail(Error::Schema(format!(
                "'{}' has {} fields but {} values are added",
                r.name,
                r.schema.len(),
                values.len()
            )));
        }
        let schema = r.schema.clone();
        for (v, f) in values.iter().zip(schema.fields()) {
            if let Some(t) = self.expr(v) {
                let ok = t == f.ty || (t == FieldType::Int && f.ty == FieldType::Float);
                if !ok {
                    self.fail(Error::Type(format!(
                        "field {}.{} is {} but receives {t}",
                        r.name, f.name, f.ty
                    )));
                }
            }
        }
    }

    fn acc_target(&mut self, target: &AccRef, key_required: bool) {
        let Some(a) = self.prog.acc(&target.name) else {
            self.fail(Error::Undeclared(format!("accumulator '{}' is not declared", target.name)));
            return;
        };
        let a = a.clone();
        self.acc_shape(&a, target, key_required);
    }

    fn acc_shape(&mut self, a: &AccDecl, r: &AccRef, key_required: bool) {
        match (&r.worker, a.per_worker) {
            (Some(w), true) => self.require_range(w, "worker subscript"),
            (None, false) => {}
            (Some(_), false) => self.fail(Error::Schema(format!("accumulator '{}' is not per-worker", a.name))),
            (None, true) => self.fail(Error::Schema(format!(
                "per-worker accumulator '{}' needs a worker subscript",
                a.name
            ))),
        }
        match (&r.key, a.keyed) {
            (Some(k), true) => {
                self.expr(k);
            }
            (None, true) if key_required => {
                self.fail(Error::Schema(format!("keyed accumulator '{}' needs a key", a.name)))
            }
            (Some(_), false) => self.fail(Error::Schema(format!("accumulator '{}' is not keyed", a.name))),
            _ => {}
        }
    }

    fn expr(&mut self, e: &Expr) -> Option<FieldType> {
        match e {
            Expr::Int(_) => Some(FieldType::Int),
            Expr::Str(_) => Some(FieldType::Str),
            Expr::Field { set, var, field } => {
                match self.lookup(var).cloned() {
                    Some(Binding::Tuple(s)) if &s == set => {}
                    Some(Binding::Tuple(s)) => self.fail(Error::Schema(format!(
                        "'{var}' iterates over '{s}', not '{set}'"
                    ))),
                    _ => self.fail(Error::Undeclared(format!("'{var}' is not a tuple iterator in scope"))),
                }
                self.field_type(set, field)
            }
            Expr::Var(v) => match self.lookup(v).cloned() {
                Some(Binding::Range { .. }) => Some(FieldType::Int),
                Some(Binding::Value { set, field }) => self.field_type(&set, &field),
                Some(Binding::Tuple(_)) => {
                    self.fail(Error::Type(format!("tuple iterator '{v}' used as a value")));
                    None
                }
                None => {
                    self.fail(Error::Undeclared(format!("'{v}' is not defined")));
                    None
                }
            },
            Expr::Acc(r) => {
                let Some(a) = self.prog.acc(&r.name).cloned() else {
                    self.fail(Error::Undeclared(format!("accumulator '{}' is not declared", r.name)));
                    return None;
                };
                self.acc_shape(&a, r, true);
                Some(a.ty.field_type())
            }
            Expr::SumWorkers { name, key } => {
                let Some(a) = self.prog.acc(name).cloned() else {
                    self.fail(Error::Undeclared(format!("accumulator '{name}' is not declared")));
                    return None;
                };
                if !a.per_worker {
                    self.fail(Error::Schema(format!("sum over workers of shared accumulator '{name}'")));
                }
                if a.keyed != key.is_some() {
                    self.fail(Error::Schema(format!("key mismatch in sum over '{name}'")));
                }
                if let Some(k) = key {
                    self.expr(k);
                }
                Some(a.ty.field_type())
            }
            Expr::Add(x, y) | Expr::Mul(x, y) => {
                let a = self.expr(x);
                let b = self.expr(y);
                match (a, b) {
                    (Some(FieldType::Str), _) | (_, Some(FieldType::Str)) => {
                        self.fail(Error::Type("arithmetic on a string".into()));
                        None
                    }
                    (Some(FieldType::Float), _) | (_, Some(FieldType::Float)) => Some(FieldType::Float),
                    (Some(_), Some(_)) => Some(FieldType::Int),
                    _ => None,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse_program;
    use super::*;

    fn check(src: &str) -> Result<()> {
        validate(&parse_program(src).unwrap())
    }

    #[test]
    fn accepts_well_formed() {
        check(
            "table a(x: int, y: str);\noutput R(y: str, n: int);\nacc n: int keyed;\n\
             forelem (i in pa) n[a[i].y] += a[i].x;\n\
             forelem (i in pa.distinct(y)) R += (a[i].y, n[a[i].y]);",
        )
        .unwrap();
    }

    #[test]
    fn rejects_problems() {
        let bad = [
            "table a(x: int);\nforelem (i in pb) { }",
            "table a(x: int);\nforelem (i in pa.z[1]) { }",
            "table a(x: int);\nforelem (i in pa.x[\"s\"]) { }",
            "table a(x: int);\noutput R(x: int);\nforelem (i in pa) R += (a[j].x);",
            "table a(x: int);\noutput R(x: int);\nforelem (i in pa) R += (a[i].x, 1);",
            "table a(x: int);\noutput R(x: str);\nforelem (i in pa) R += (a[i].x);",
            "table a(x: int);\nforelem (i in pa) forelem (i in pa) { }",
            "acc c: int per_worker;\nforall (k = 1; k <= 2; k++) forall (m = 1; m <= 2; m++) c[k] += 1;",
            "table a(x: int);\nforelem (i in p[k]a) { }",
            "table a(x: int);\nforelem (i in pa) using hash(x) { }",
            "acc c: int;\nforall (k = 1; k <= 2; k++) c = 1;",
        ];
        for src in bad {
            assert!(check(src).is_err(), "accepted: {src}");
        }
    }
}
