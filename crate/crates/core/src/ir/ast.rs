use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::multiset::{FieldType, Schema};

/// Position of a statement: indices into nested statement lists, outermost first.
pub type StmtPath = Vec<usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub tables: Vec<TableDecl>,
    pub results: Vec<ResultDecl>,
    pub accs: Vec<AccDecl>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableDecl {
    pub name: String,
    pub schema: Schema,
}

/// A result multiset built by `R += (...)`. Outputs are what a run returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultDecl {
    pub name: String,
    pub schema: Schema,
    pub output: bool,
    pub per_worker: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccType {
    Int,
    Float,
}

impl AccType {
    pub fn field_type(self) -> FieldType {
        match self {
            AccType::Int => FieldType::Int,
            AccType::Float => FieldType::Float,
        }
    }
}

/// An accumulator: a scalar cell, or a map from key values to cells, all
/// reading as zero until written. `per_worker` accumulators additionally
/// have one private copy per partition index `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccDecl {
    pub name: String,
    pub ty: AccType,
    pub keyed: bool,
    pub per_worker: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Loop(Loop),
    /// `acc[key] += delta`
    Accumulate { target: AccRef, delta: Expr },
    /// `acc = value`; on a keyed accumulator without key only `= 0` (reset) is allowed.
    Assign { target: AccRef, value: Expr },
    /// `R += (e1, ..., en)`
    Union { target: ResultRef, values: Vec<Expr> },
    /// `R += R[*]`: union of every per-worker copy into the shared result.
    Merge { target: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    pub header: Header,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Header {
    /// `forelem (var in domain)`
    Forelem {
        var: String,
        domain: Domain,
        method: Option<IterMethod>,
    },
    /// `for (var = 1; var <= n; var++)`, or `forall` when `parallel`.
    Range { var: String, n: u32, parallel: bool },
    /// `for (var in X(set.field)[part])`: the values of one value-range segment.
    Values {
        var: String,
        set: String,
        field: String,
        part: Option<String>,
    },
}

impl Header {
    pub fn var(&self) -> &str {
        match self {
            Header::Forelem { var, .. } | Header::Range { var, .. } | Header::Values { var, .. } => var,
        }
    }

    pub fn is_forall(&self) -> bool {
        matches!(self, Header::Range { parallel: true, .. })
    }
}

/// How a forelem loop's index set is realized at run time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IterMethod {
    NestedScan,
    HashProbe(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub set: String,
    pub filter: Option<Filter>,
    pub distinct: Option<String>,
    /// Direct partition: the iterator of the enclosing `for`/`forall` selecting the block.
    pub block: Option<String>,
}

impl Domain {
    pub fn all(set: impl Into<String>) -> Domain {
        Domain {
            set: set.into(),
            filter: None,
            distinct: None,
            block: None,
        }
    }

    pub fn filtered(set: impl Into<String>, field: impl Into<String>, value: Expr) -> Domain {
        Domain {
            filter: Some(Filter {
                field: field.into(),
                value,
            }),
            ..Domain::all(set)
        }
    }

    pub fn distinct(set: impl Into<String>, field: impl Into<String>) -> Domain {
        Domain {
            distinct: Some(field.into()),
            ..Domain::all(set)
        }
    }

    pub fn is_plain(&self) -> bool {
        self.filter.is_none() && self.distinct.is_none() && self.block.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub field: String,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccRef {
    pub name: String,
    pub worker: Option<String>,
    pub key: Option<Box<Expr>>,
}

impl AccRef {
    pub fn scalar(name: impl Into<String>) -> AccRef {
        AccRef {
            name: name.into(),
            worker: None,
            key: None,
        }
    }

    pub fn keyed(name: impl Into<String>, key: Expr) -> AccRef {
        AccRef {
            name: name.into(),
            worker: None,
            key: Some(Box::new(key)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRef {
    pub name: String,
    pub worker: Option<String>,
}

impl ResultRef {
    pub fn shared(name: impl Into<String>) -> ResultRef {
        ResultRef {
            name: name.into(),
            worker: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Str(String),
    /// `set[var].field`
    Field { set: String, var: String, field: String },
    /// A value bound by a `for (var in X(..))` or `for (var = ..)` loop.
    Var(String),
    Acc(AccRef),
    /// `sum(name[*])` or `sum(name[*][key])`: reduction over per-worker copies.
    SumWorkers { name: String, key: Option<Box<Expr>> },
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn field(set: impl Into<String>, var: impl Into<String>, field: impl Into<String>) -> Expr {
        Expr::Field {
            set: set.into(),
            var: var.into(),
            field: field.into(),
        }
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Acc(r) => {
                if let Some(k) = &r.key {
                    k.visit(f);
                }
            }
            Expr::SumWorkers { key: Some(k), .. } => k.visit(f),
            Expr::Add(a, b) | Expr::Mul(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    /// Post-order in-place rewrite.
    pub fn rewrite(&mut self, f: &mut impl FnMut(&mut Expr)) {
        match self {
            Expr::Acc(r) => {
                if let Some(k) = &mut r.key {
                    k.rewrite(f);
                }
            }
            Expr::SumWorkers { key: Some(k), .. } => k.rewrite(f),
            Expr::Add(a, b) | Expr::Mul(a, b) => {
                a.rewrite(f);
                b.rewrite(f);
            }
            _ => {}
        }
        f(self);
    }

    pub fn mentions_var(&self, name: &str) -> bool {
        let mut found = false;
        self.visit(&mut |e| match e {
            Expr::Field { var, .. } | Expr::Var(var) if var == name => found = true,
            Expr::Acc(AccRef { worker: Some(w), .. }) if w == name => found = true,
            _ => {}
        });
        found
    }
}

impl Stmt {
    pub fn as_loop(&self) -> Option<&Loop> {
        match self {
            Stmt::Loop(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_loop_mut(&mut self) -> Option<&mut Loop> {
        match self {
            Stmt::Loop(l) => Some(l),
            _ => None,
        }
    }

    /// Expressions directly owned by this statement (not by nested statements).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        match self {
            Stmt::Loop(l) => {
                if let Header::Forelem { domain, .. } = &l.header {
                    if let Some(f) = &domain.filter {
                        out.push(&f.value);
                    }
                }
            }
            Stmt::Accumulate { target, delta } => {
                if let Some(k) = &target.key {
                    out.push(&**k);
                }
                out.push(delta);
            }
            Stmt::Assign { target, value } => {
                if let Some(k) = &target.key {
                    out.push(&**k);
                }
                out.push(value);
            }
            Stmt::Union { values, .. } => out.extend(values.iter()),
            Stmt::Merge { .. } => {}
        }
        out
    }

    /// Applies `f` to every expression owned by this statement and, recursively, its body.
    pub fn rewrite_exprs(&mut self, f: &mut impl FnMut(&mut Expr)) {
        match self {
            Stmt::Loop(l) => {
                if let Header::Forelem { domain, .. } = &mut l.header {
                    if let Some(flt) = &mut domain.filter {
                        flt.value.rewrite(f);
                    }
                }
                for s in &mut l.body {
                    s.rewrite_exprs(f);
                }
            }
            Stmt::Accumulate { target, delta } => {
                if let Some(k) = &mut target.key {
                    k.rewrite(f);
                }
                delta.rewrite(f);
            }
            Stmt::Assign { target, value } => {
                if let Some(k) = &mut target.key {
                    k.rewrite(f);
                }
                value.rewrite(f);
            }
            Stmt::Union { values, .. } => {
                for v in values {
                    v.rewrite(f);
                }
            }
            Stmt::Merge { .. } => {}
        }
    }

    /// Pre-order walk over this statement and all nested statements.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        if let Stmt::Loop(l) = self {
            for s in &l.body {
                s.walk(f);
            }
        }
    }

    /// Every expression in this statement and nested statements.
    pub fn visit_exprs<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        self.walk(&mut |s| {
            for e in s.own_exprs() {
                e.visit(f);
            }
        });
    }
}

impl Program {
    pub fn empty() -> Program {
        Program {
            tables: Vec::new(),
            results: Vec::new(),
            accs: Vec::new(),
            body: Vec::new(),
        }
    }

    pub fn table(&self, name: &str) -> Option<&TableDecl> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn result(&self, name: &str) -> Option<&ResultDecl> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn result_mut(&mut self, name: &str) -> Option<&mut ResultDecl> {
        self.results.iter_mut().find(|r| r.name == name)
    }

    pub fn acc(&self, name: &str) -> Option<&AccDecl> {
        self.accs.iter().find(|a| a.name == name)
    }

    pub fn acc_mut(&mut self, name: &str) -> Option<&mut AccDecl> {
        self.accs.iter_mut().find(|a| a.name == name)
    }

    /// Schema of a table or result set named `set`.
    pub fn set_schema(&self, set: &str) -> Option<&Schema> {
        self.table(set)
            .map(|t| &t.schema)
            .or_else(|| self.result(set).map(|r| &r.schema))
    }

    pub fn outputs(&self) -> impl Iterator<Item = &ResultDecl> {
        self.results.iter().filter(|r| r.output)
    }

    pub fn stmt(&self, path: &[usize]) -> Option<&Stmt> {
        let (first, rest) = path.split_first()?;
        let mut cur = self.body.get(*first)?;
        for &i in rest {
            cur = cur.as_loop()?.body.get(i)?;
        }
        Some(cur)
    }

    pub fn stmt_mut(&mut self, path: &[usize]) -> Option<&mut Stmt> {
        let (first, rest) = path.split_first()?;
        let mut cur = self.body.get_mut(*first)?;
        for &i in rest {
            cur = cur.as_loop_mut()?.body.get_mut(i)?;
        }
        Some(cur)
    }

    /// The statement list that contains the statement at `path`.
    pub fn parent_body_mut(&mut self, path: &[usize]) -> Option<&mut Vec<Stmt>> {
        let (_, parent) = path.split_last()?;
        if parent.is_empty() {
            Some(&mut self.body)
        } else {
            Some(&mut self.stmt_mut(parent)?.as_loop_mut()?.body)
        }
    }

    pub fn parent_body(&self, path: &[usize]) -> Option<&Vec<Stmt>> {
        let (_, parent) = path.split_last()?;
        if parent.is_empty() {
            Some(&self.body)
        } else {
            Some(&self.stmt(parent)?.as_loop()?.body)
        }
    }

    /// Loops enclosing the statement at `path`, outermost first.
    pub fn enclosing_loops(&self, path: &[usize]) -> Vec<&Loop> {
        let mut out = Vec::new();
        for depth in 1..path.len() {
            if let Some(l) = self.stmt(&path[..depth]).and_then(Stmt::as_loop) {
                out.push(l);
            }
        }
        out
    }

    /// Paths of every statement, pre-order.
    pub fn paths(&self) -> Vec<StmtPath> {
        fn go(body: &[Stmt], prefix: &mut StmtPath, out: &mut Vec<StmtPath>) {
            for (i, s) in body.iter().enumerate() {
                prefix.push(i);
                out.push(prefix.clone());
                if let Stmt::Loop(l) = s {
                    go(&l.body, prefix, out);
                }
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        go(&self.body, &mut Vec::new(), &mut out);
        out
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        for s in &self.body {
            s.walk(f);
        }
    }

    pub fn rewrite_exprs(&mut self, f: &mut impl FnMut(&mut Expr)) {
        for s in &mut self.body {
            s.rewrite_exprs(f);
        }
    }

    /// Identifiers already used as declarations or loop variables.
    pub fn used_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .tables
            .iter()
            .map(|t| t.name.clone())
            .chain(self.results.iter().map(|r| r.name.clone()))
            .chain(self.accs.iter().map(|a| a.name.clone()))
            .collect();
        self.walk(&mut |s| {
            if let Stmt::Loop(l) = s {
                names.push(l.header.var().into());
            }
        });
        names
    }

    /// `base`, or `base2`, `base3`, ... whichever is not yet used.
    pub fn fresh_name(&self, base: &str) -> String {
        let used = self.used_names();
        if !used.iter().any(|n| n == base) {
            return base.into();
        }
        (2..)
            .map(|i| alloc::format!("{base}{i}"))
            .find(|c| !used.iter().any(|n| n == c))
            .expect("infinite candidates")
    }
}
