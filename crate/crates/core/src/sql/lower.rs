use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::*;
use crate::database::Catalog;
use crate::error::{Error, Result};
use crate::ir::{validate, AccDecl, AccRef, AccType, Domain, Expr, Header, Loop, Program, ResultDecl, ResultRef, Stmt, TableDecl};
use crate::multiset::{FieldType, Schema};

/// Parameter values by name, as text; each is converted to the type of the
/// column it is compared with.
pub type Params = BTreeMap<String, String>;

/// Lowers a query to a loop program. Group-by-count becomes a loop over the
/// distinct group values, filling an intermediate result `G`, followed by a
/// loop over `G` counting the matching tuples of each group. Equality joins
/// nest one loop per table, the later table filtered by a field of the
/// earlier one. Simple views are substituted into the query; other views are
/// computed into an intermediate result first.
pub fn lower_to_forelem(q: &SqlQuery, catalog: &Catalog, params: &Params) -> Result<Program> {
    let mut views = BTreeMap::new();
    for v in &q.views {
        if catalog.contains_key(&v.name) {
            return Err(Error::Schema(format!("view '{}' has the same name as a table", v.name)));
        }
        if views.insert(v.name.as_str(), &v.select).is_some() {
            return Err(Error::Schema(format!("view '{}' is defined twice", v.name)));
        }
    }
    let mut reserved: BTreeSet<String> = catalog.keys().cloned().collect();
    reserved.extend(views.keys().map(|v| v.to_string()));
    let mut l = Lower {
        catalog,
        views,
        params,
        prog: Program::empty(),
        materialized: BTreeMap::new(),
        in_progress: Vec::new(),
        reserved,
    };
    let r = l.fresh("R");
    l.emit_query(&q.select, &r, true)?;
    validate(&l.prog)?;
    Ok(l.prog)
}

struct Lower<'a> {
    catalog: &'a Catalog,
    views: BTreeMap<&'a str, &'a Select>,
    params: &'a Params,
    prog: Program,
    /// View name -> intermediate result holding its rows.
    materialized: BTreeMap<String, String>,
    in_progress: Vec<String>,
    reserved: BTreeSet<String>,
}

#[derive(Debug, Clone)]
struct Col {
    name: String,
    ty: FieldType,
    expr: Expr,
}

/// A FROM item bound to a loop variable.
#[derive(Debug, Clone)]
struct Binding {
    name: String,
    cols: Vec<Col>,
}

/// What a FROM item iterates before conditions are attached.
enum Source {
    /// A table or intermediate result.
    Set { set: String, schema: Schema },
    /// A view equal to a single loop over `base`: `distinct` is its DISTINCT
    /// column, `filter` its one predicate, `cols` its columns as base fields.
    Inline {
        base: String,
        schema: Schema,
        distinct: Option<String>,
        filter: Option<(String, Operand)>,
        cols: Vec<(String, String)>,
        view: String,
    },
}

impl Source {
    fn col_names(&self) -> Vec<String> {
        match self {
            Source::Set { schema, .. } => schema.names().map(String::from).collect(),
            Source::Inline { cols, .. } => cols.iter().map(|c| c.0.clone()).collect(),
        }
    }
}

enum Side {
    Local(usize, usize),
    Outer(Expr, FieldType),
    Const(Operand),
}

struct Planned {
    loops: Vec<(String, Domain)>,
    bindings: Vec<Binding>,
}

fn wrap(loops: &[(String, Domain)], body: Vec<Stmt>) -> Vec<Stmt> {
    let mut body = body;
    for (var, domain) in loops.iter().rev() {
        body = alloc::vec![Stmt::Loop(Loop {
            header: Header::Forelem {
                var: var.clone(),
                domain: domain.clone(),
                method: None,
            },
            body,
        })];
    }
    body
}

fn dedupe(names: &mut Vec<String>, name: String) -> String {
    let mut n = name.clone();
    let mut i = 2;
    while names.contains(&n) {
        n = format!("{name}_{i}");
        i += 1;
    }
    names.push(n.clone());
    n
}

fn agg_name(e: &ItemExpr) -> &'static str {
    match e {
        ItemExpr::Sum(_) => "sum",
        _ => "count",
    }
}

impl<'a> Lower<'a> {
    fn taken(&self, n: &str) -> bool {
        self.reserved.contains(n)
            || self.prog.table(n).is_some()
            || self.prog.result(n).is_some()
            || self.prog.acc(n).is_some()
    }

    fn fresh(&self, base: &str) -> String {
        if !self.taken(base) {
            return base.into();
        }
        (2..).map(|i| format!("{base}{i}")).find(|n| !self.taken(n)).expect("unbounded")
    }

    fn var(&self, depth: usize) -> String {
        let mut v = match depth {
            0 => String::from("i"),
            1 => String::from("j"),
            d => format!("i{d}"),
        };
        while self.reserved.contains(&v) {
            v.push('_');
        }
        v
    }

    fn table(&mut self, name: &str) -> Option<Schema> {
        let schema = self.catalog.get(name)?.clone();
        if self.prog.table(name).is_none() {
            self.prog.tables.push(TableDecl {
                name: name.into(),
                schema: schema.clone(),
            });
        }
        Some(schema)
    }

    fn source(&mut self, item: &FromItem) -> Result<Source> {
        if let Some(schema) = self.table(&item.table) {
            return Ok(Source::Set {
                set: item.table.clone(),
                schema,
            });
        }
        let Some(view) = self.views.get(item.table.as_str()).copied() else {
            return Err(Error::Schema(format!("unknown table '{}'", item.table)));
        };
        if let Some(res) = self.materialized.get(&item.table) {
            let schema = self.prog.result(res).expect("materialized").schema.clone();
            return Ok(Source::Set { set: res.clone(), schema });
        }
        if let Some(src) = self.inline_view(&item.table, view)? {
            return Ok(src);
        }
        self.materialize(&item.table)
    }

    fn materialize(&mut self, view: &str) -> Result<Source> {
        if let Some(res) = self.materialized.get(view) {
            let schema = self.prog.result(res).expect("materialized").schema.clone();
            return Ok(Source::Set { set: res.clone(), schema });
        }
        if self.in_progress.iter().any(|v| v == view) {
            return Err(Error::Unsupported(format!("recursive view '{view}'")));
        }
        let sel = self.views[view];
        self.in_progress.push(view.into());
        // The view name itself is reserved; its rows go in a result of that name.
        self.reserved.remove(view);
        let res = self.fresh(view);
        let out = self.emit_query(sel, &res, false);
        self.reserved.insert(view.into());
        self.in_progress.pop();
        out?;
        self.materialized.insert(view.into(), res.clone());
        let schema = self.prog.result(&res).expect("emitted").schema.clone();
        Ok(Source::Set { set: res, schema })
    }

    /// A view that is one loop over a table, with plain columns and at most
    /// one predicate against a constant.
    fn inline_view(&mut self, name: &str, v: &Select) -> Result<Option<Source>> {
        let simple = v.from.len() == 1
            && v.group_by.is_none()
            && v.conds.len() <= 1
            && !(v.distinct && (!v.conds.is_empty() || v.items.len() != 1))
            && v.items.iter().all(|i| matches!(i.expr, ItemExpr::Star | ItemExpr::Column(_)));
        if !simple {
            return Ok(None);
        }
        let item = &v.from[0];
        let Some(schema) = self.table(&item.table) else {
            return Ok(None);
        };
        let own = |c: &ColRef| {
            c.qual.as_deref().is_none_or(|q| q == item.binding()) && schema.index_of(&c.name).is_some()
        };
        let mut cols = Vec::new();
        let mut names = Vec::new();
        for it in &v.items {
            match &it.expr {
                ItemExpr::Star => {
                    for f in schema.names() {
                        cols.push((dedupe(&mut names, f.into()), f.to_string()));
                    }
                }
                ItemExpr::Column(c) => {
                    if !own(c) {
                        return Err(Error::Schema(format!("unknown column '{}' in view '{name}'", c.name)));
                    }
                    let out = it.alias.clone().unwrap_or_else(|| c.name.clone());
                    cols.push((dedupe(&mut names, out), c.name.clone()));
                }
                _ => unreachable!(),
            }
        }
        let filter = match v.conds.first() {
            None => None,
            Some(Cond { left: Operand::Col(c), right }) | Some(Cond { left: right, right: Operand::Col(c) })
                if own(c) && !matches!(right, Operand::Col(_)) =>
            {
                Some((c.name.clone(), right.clone()))
            }
            Some(_) => return Ok(None),
        };
        let distinct = if v.distinct { Some(cols[0].1.clone()) } else { None };
        Ok(Some(Source::Inline {
            base: item.table.clone(),
            schema,
            distinct,
            filter,
            cols,
            view: name.into(),
        }))
    }

    fn constant(&self, op: &Operand, ty: FieldType, what: &str) -> Result<Expr> {
        let text;
        let (v, from_param) = match op {
            Operand::Param(p) => {
                text = self
                    .params
                    .get(p)
                    .ok_or_else(|| Error::Argument(format!("no value given for parameter '{p}'")))?;
                (Operand::Str(text.clone()), true)
            }
            other => (other.clone(), false),
        };
        match (ty, v) {
            (FieldType::Int, Operand::Int(n)) => Ok(Expr::Int(n)),
            (FieldType::Int, Operand::Str(s)) if from_param => s
                .trim()
                .parse()
                .map(Expr::Int)
                .map_err(|_| Error::Type(format!("parameter value '{s}' for {what} is not an integer"))),
            (FieldType::Str, Operand::Str(s)) => Ok(Expr::Str(s)),
            (t, _) => Err(Error::Type(format!("{what} has type {t} but is compared with {}", describe(op)))),
        }
    }

    fn value_type(&self, e: &Expr) -> Option<FieldType> {
        match e {
            Expr::Int(_) => Some(FieldType::Int),
            Expr::Str(_) => Some(FieldType::Str),
            Expr::Field { set, field, .. } => self.prog.set_schema(set)?.field(field).map(|f| f.ty),
            _ => None,
        }
    }

    /// Resolves the FROM list of `sel` into nested loops, attaching each
    /// equality to the later of the loops it mentions.
    fn plan(&mut self, sel: &Select, outer: &[Binding], depth: usize) -> Result<Planned> {
        let mut sources = Vec::new();
        for (n, item) in sel.from.iter().enumerate() {
            if sel.from[..n].iter().any(|o| o.binding() == item.binding()) {
                return Err(Error::Schema(format!("'{}' appears twice in FROM", item.binding())));
            }
            sources.push(self.source(item)?);
        }
        let names: Vec<Vec<String>> = sources.iter().map(Source::col_names).collect();
        let resolve = |c: &ColRef| -> Result<Side> {
            let hits: Vec<(usize, usize)> = sel
                .from
                .iter()
                .enumerate()
                .filter(|(_, it)| c.qual.as_deref().is_none_or(|q| q == it.binding()))
                .filter_map(|(n, _)| names[n].iter().position(|x| *x == c.name).map(|k| (n, k)))
                .collect();
            match hits[..] {
                [(n, k)] => return Ok(Side::Local(n, k)),
                [] => {}
                _ => return Err(Error::Schema(format!("column '{}' is ambiguous", c.name))),
            }
            for b in outer.iter().rev() {
                if c.qual.as_deref().is_none_or(|q| q == b.name) {
                    if let Some(col) = b.cols.iter().find(|x| x.name == c.name) {
                        return Ok(Side::Outer(col.expr.clone(), col.ty));
                    }
                }
            }
            Err(Error::Schema(match &c.qual {
                Some(q) => format!("unknown column '{q}.{}'", c.name),
                None => format!("unknown column '{}'", c.name),
            }))
        };
        let side = |o: &Operand| -> Result<Side> {
            match o {
                Operand::Col(c) => resolve(c),
                other => Ok(Side::Const(other.clone())),
            }
        };
        // item -> (its column, the other side)
        let mut filters: Vec<Option<(usize, Side)>> = sources.iter().map(|_| None).collect();
        for cond in &sel.conds {
            let (a, b) = (side(&cond.left)?, side(&cond.right)?);
            let (n, k, other) = match (a, b) {
                (Side::Local(n1, k1), Side::Local(n2, k2)) => {
                    if n1 == n2 {
                        return Err(Error::Unsupported(format!(
                            "comparing two columns of '{}'",
                            sel.from[n1].binding()
                        )));
                    }
                    if n1 > n2 {
                        (n1, k1, Side::Local(n2, k2))
                    } else {
                        (n2, k2, Side::Local(n1, k1))
                    }
                }
                (Side::Local(n, k), other) | (other, Side::Local(n, k)) => (n, k, other),
                _ => {
                    return Err(Error::Unsupported(
                        "a condition must mention a column of a table in its FROM list".into(),
                    ))
                }
            };
            if filters[n].is_some() {
                return Err(Error::Unsupported(format!(
                    "more than one equality predicate on '{}'",
                    sel.from[n].binding()
                )));
            }
            filters[n] = Some((k, other));
        }

        let mut loops = Vec::new();
        let mut bindings: Vec<Binding> = Vec::new();
        for (n, src) in sources.into_iter().enumerate() {
            let var = self.var(depth + n);
            let src = match src {
                Source::Inline { ref view, ref filter, ref distinct, .. }
                    if filters[n].is_some() && (filter.is_some() || distinct.is_some()) =>
                {
                    let view = view.clone();
                    self.materialize(&view)?
                }
                s => s,
            };
            let (mut domain, cols, set, base_fields) = match src {
                Source::Set { set, schema } => {
                    let cols: Vec<Col> = schema
                        .fields()
                        .iter()
                        .map(|f| Col {
                            name: f.name.clone(),
                            ty: f.ty,
                            expr: Expr::field(set.clone(), var.clone(), f.name.clone()),
                        })
                        .collect();
                    let fields = schema.names().map(String::from).collect::<Vec<_>>();
                    (Domain::all(set.clone()), cols, set, fields)
                }
                Source::Inline {
                    base,
                    schema,
                    distinct,
                    filter,
                    cols,
                    view,
                } => {
                    let mut domain = Domain::all(base.clone());
                    if let Some(d) = distinct {
                        domain.distinct = Some(d);
                    }
                    if let Some((f, op)) = filter {
                        let ty = schema.field(&f).expect("checked").ty;
                        let value = self.constant(&op, ty, &format!("{view}.{f}"))?;
                        domain = Domain::filtered(base.clone(), f, value);
                    }
                    let out = cols
                        .iter()
                        .map(|(name, f)| Col {
                            name: name.clone(),
                            ty: schema.field(f).expect("checked").ty,
                            expr: Expr::field(base.clone(), var.clone(), f.clone()),
                        })
                        .collect();
                    let fields = cols.into_iter().map(|c| c.1).collect();
                    (domain, out, base, fields)
                }
            };
            if let Some((k, other)) = &filters[n] {
                let what = format!("{}.{}", sel.from[n].binding(), cols[*k].name);
                let ty = cols[*k].ty;
                let value = match other {
                    Side::Const(op) => self.constant(op, ty, &what)?,
                    Side::Local(m, j) => bindings[*m].cols[*j].expr.clone(),
                    Side::Outer(e, _) => e.clone(),
                };
                let vt = match other {
                    Side::Local(m, j) => Some(bindings[*m].cols[*j].ty),
                    Side::Outer(_, t) => Some(*t),
                    Side::Const(_) => self.value_type(&value),
                };
                if vt != Some(ty) {
                    return Err(Error::Type(format!(
                        "{what} has type {ty} but is compared with a value of type {}",
                        vt.map_or("unknown", FieldType::name)
                    )));
                }
                domain = Domain::filtered(set.clone(), base_fields[*k].clone(), value);
            }
            loops.push((var, domain));
            bindings.push(Binding {
                name: sel.from[n].binding().into(),
                cols,
            });
        }
        Ok(Planned { loops, bindings })
    }

    fn column(&self, c: &ColRef, bindings: &[Binding], outer: &[Binding]) -> Result<Col> {
        let hits: Vec<&Col> = bindings
            .iter()
            .filter(|b| c.qual.as_deref().is_none_or(|q| q == b.name))
            .filter_map(|b| b.cols.iter().find(|x| x.name == c.name))
            .collect();
        match hits[..] {
            [one] => return Ok(one.clone()),
            [] => {}
            _ => return Err(Error::Schema(format!("column '{}' is ambiguous", c.name))),
        }
        for b in outer.iter().rev() {
            if c.qual.as_deref().is_none_or(|q| q == b.name) {
                if let Some(col) = b.cols.iter().find(|x| x.name == c.name) {
                    return Ok(col.clone());
                }
            }
        }
        Err(Error::Schema(format!("unknown column '{}'", c.name)))
    }

    fn new_acc(&mut self, base: &str, ty: FieldType) -> Result<(String, AccType)> {
        let ty = match ty {
            FieldType::Int => AccType::Int,
            FieldType::Float => AccType::Float,
            FieldType::Str => return Err(Error::Type("SUM over a string column".into())),
        };
        let name = self.fresh(base);
        self.prog.accs.push(AccDecl {
            name: name.clone(),
            ty,
            keyed: false,
            per_worker: false,
        });
        Ok((name, ty))
    }

    /// The per-tuple contribution of an aggregate.
    fn delta(&self, e: &ItemExpr, bindings: &[Binding], outer: &[Binding]) -> Result<(Expr, FieldType)> {
        match e {
            ItemExpr::Count(None) => Ok((Expr::Int(1), FieldType::Int)),
            ItemExpr::Count(Some(c)) => {
                self.column(c, bindings, outer)?;
                Ok((Expr::Int(1), FieldType::Int))
            }
            ItemExpr::Sum(c) => {
                let col = self.column(c, bindings, outer)?;
                Ok((col.expr, col.ty))
            }
            _ => unreachable!(),
        }
    }

    fn declare_result(&mut self, name: &str, cols: Vec<(String, FieldType)>, output: bool) -> Result<()> {
        let schema = Schema::new(cols)?;
        self.prog.results.push(ResultDecl {
            name: name.into(),
            schema,
            output,
            per_worker: false,
        });
        Ok(())
    }

    /// Appends the statements computing `sel` into result `target`.
    fn emit_query(&mut self, sel: &Select, target: &str, output: bool) -> Result<()> {
        if sel.group_by.is_some() {
            return self.emit_group(sel, target, output);
        }
        let is_agg = |i: &SelectItem| matches!(i.expr, ItemExpr::Count(_) | ItemExpr::Sum(_));
        let aggs = sel.items.iter().filter(|i| is_agg(i)).count();
        if aggs > 0 && aggs < sel.items.len() {
            return Err(Error::Unsupported("aggregates mixed with plain columns without GROUP BY".into()));
        }
        if sel.distinct && (sel.from.len() != 1 || !sel.conds.is_empty() || sel.items.len() != 1 || aggs > 0) {
            return Err(Error::Unsupported(
                "DISTINCT is supported on a single column of a single table without WHERE".into(),
            ));
        }
        let planned = self.plan(sel, &[], 0)?;
        let mut names = Vec::new();
        let mut cols = Vec::new();
        if aggs > 0 {
            let mut inner = Vec::new();
            let mut values = Vec::new();
            for it in &sel.items {
                let (delta, ty) = self.delta(&it.expr, &planned.bindings, &[])?;
                let (acc, at) = self.new_acc(agg_name(&it.expr), ty)?;
                inner.push(Stmt::Accumulate {
                    target: AccRef::scalar(acc.clone()),
                    delta,
                });
                values.push(Expr::Acc(AccRef::scalar(acc)));
                let name = it.alias.clone().unwrap_or_else(|| agg_name(&it.expr).into());
                cols.push((dedupe(&mut names, name), at.field_type()));
            }
            self.declare_result(target, cols, output)?;
            self.prog.body.extend(wrap(&planned.loops, inner));
            self.prog.body.push(Stmt::Union {
                target: ResultRef::shared(target),
                values,
            });
            return Ok(());
        }
        let mut loops = planned.loops.clone();
        let mut prelude = Vec::new();
        let mut values = Vec::new();
        for it in &sel.items {
            match &it.expr {
                ItemExpr::Star => {
                    for b in &planned.bindings {
                        for c in &b.cols {
                            values.push(c.expr.clone());
                            cols.push((dedupe(&mut names, c.name.clone()), c.ty));
                        }
                    }
                }
                ItemExpr::Column(c) => {
                    let col = self.column(c, &planned.bindings, &[])?;
                    if sel.distinct {
                        let Expr::Field { field, .. } = &col.expr else { unreachable!() };
                        let d = &mut loops[0].1;
                        if d.distinct.as_ref().is_some_and(|x| x != field) {
                            return Err(Error::Unsupported("DISTINCT over a view with a different DISTINCT column".into()));
                        }
                        d.distinct = Some(field.clone());
                    }
                    values.push(col.expr);
                    cols.push((dedupe(&mut names, it.alias.clone().unwrap_or_else(|| c.name.clone())), col.ty));
                }
                ItemExpr::Subquery(sub) => {
                    let (stmts, value, ty, default) = self.subquery(sub, &planned.bindings, loops.len())?;
                    prelude.extend(stmts);
                    values.push(value);
                    cols.push((dedupe(&mut names, it.alias.clone().unwrap_or(default)), ty));
                }
                ItemExpr::Count(_) | ItemExpr::Sum(_) => unreachable!(),
            }
        }
        self.declare_result(target, cols, output)?;
        prelude.push(Stmt::Union {
            target: ResultRef::shared(target),
            values,
        });
        self.prog.body.extend(wrap(&loops, prelude));
        Ok(())
    }

    /// A scalar `COUNT`/`SUM` subquery evaluated once per outer tuple:
    /// reset, counting loops, then the accumulator is the value.
    fn subquery(&mut self, sub: &Select, outer: &[Binding], depth: usize) -> Result<(Vec<Stmt>, Expr, FieldType, String)> {
        let [item] = &sub.items[..] else {
            return Err(Error::Unsupported("a scalar subquery must select exactly one aggregate".into()));
        };
        if !matches!(item.expr, ItemExpr::Count(_) | ItemExpr::Sum(_)) || sub.group_by.is_some() || sub.distinct {
            return Err(Error::Unsupported("a scalar subquery must be a single COUNT or SUM".into()));
        }
        let planned = self.plan(sub, outer, depth)?;
        let (delta, ty) = self.delta(&item.expr, &planned.bindings, outer)?;
        let (acc, at) = self.new_acc(agg_name(&item.expr), ty)?;
        let mut stmts = alloc::vec![Stmt::Assign {
            target: AccRef::scalar(acc.clone()),
            value: Expr::Int(0),
        }];
        stmts.extend(wrap(
            &planned.loops,
            alloc::vec![Stmt::Accumulate {
                target: AccRef::scalar(acc.clone()),
                delta,
            }],
        ));
        Ok((stmts, Expr::Acc(AccRef::scalar(acc)), at.field_type(), agg_name(&item.expr).into()))
    }

    fn emit_group(&mut self, sel: &Select, target: &str, output: bool) -> Result<()> {
        let g = sel.group_by.as_ref().expect("grouped");
        let planned = self.plan(sel, &[], 0)?;
        let gcol = self.column(g, &planned.bindings, &[])?;
        for it in &sel.items {
            match &it.expr {
                ItemExpr::Column(c) => {
                    if self.column(c, &planned.bindings, &[])?.expr != gcol.expr {
                        return Err(Error::Unsupported(format!(
                            "column '{}' is neither grouped nor aggregated",
                            c.name
                        )));
                    }
                }
                ItemExpr::Count(_) | ItemExpr::Sum(_) => {}
                ItemExpr::Star => return Err(Error::Unsupported("SELECT * with GROUP BY".into())),
                ItemExpr::Subquery(_) => return Err(Error::Unsupported("subquery with GROUP BY".into())),
            }
        }
        // The multiset whose tuples are grouped, and how to read the group
        // column and aggregate arguments from it.
        let plain = planned.loops.len() == 1 && planned.loops[0].1.is_plain();
        let (set, col_of): (String, Vec<(Expr, String)>) = if plain {
            let set = planned.loops[0].1.set.clone();
            let mut exprs = alloc::vec![gcol.expr.clone()];
            for it in &sel.items {
                if let ItemExpr::Sum(c) = &it.expr {
                    exprs.push(self.column(c, &planned.bindings, &[])?.expr);
                }
            }
            let fields = exprs
                .into_iter()
                .map(|e| {
                    let Expr::Field { ref field, .. } = e else { unreachable!() };
                    let f = field.clone();
                    (e, f)
                })
                .collect();
            (set, fields)
        } else {
            // Rows of the join/filter are collected first.
            let f = self.fresh("F");
            let mut exprs: Vec<Expr> = alloc::vec![gcol.expr.clone()];
            let mut cols = alloc::vec![(gcol.name.clone(), gcol.ty)];
            let mut names = alloc::vec![gcol.name.clone()];
            for it in &sel.items {
                if let ItemExpr::Sum(c) = &it.expr {
                    let col = self.column(c, &planned.bindings, &[])?;
                    if !exprs.contains(&col.expr) {
                        exprs.push(col.expr.clone());
                        cols.push((dedupe(&mut names, col.name.clone()), col.ty));
                    }
                }
            }
            self.declare_result(&f, cols.clone(), false)?;
            self.prog.body.extend(wrap(
                &planned.loops,
                alloc::vec![Stmt::Union {
                    target: ResultRef::shared(f.clone()),
                    values: exprs.clone(),
                }],
            ));
            let mut col_of = Vec::new();
            col_of.push((gcol.expr.clone(), cols[0].0.clone()));
            for it in &sel.items {
                if let ItemExpr::Sum(c) = &it.expr {
                    let e = self.column(c, &planned.bindings, &[])?.expr;
                    let at = exprs.iter().position(|x| *x == e).expect("collected");
                    col_of.push((e, cols[at].0.clone()));
                }
            }
            (f, col_of)
        };
        let gfield = col_of[0].1.clone();
        let field_for = |e: &Expr| col_of.iter().find(|(x, _)| x == e).map(|(_, f)| f.clone()).expect("collected");

        let gname = self.fresh("G");
        self.declare_result(&gname, alloc::vec![(gfield.clone(), gcol.ty)], false)?;
        let (i, j) = (self.var(0), self.var(1));
        self.prog.body.push(Stmt::Loop(Loop {
            header: Header::Forelem {
                var: i.clone(),
                domain: Domain::distinct(set.clone(), gfield.clone()),
                method: None,
            },
            body: alloc::vec![Stmt::Union {
                target: ResultRef::shared(gname.clone()),
                values: alloc::vec![Expr::field(set.clone(), i.clone(), gfield.clone())],
            }],
        }));
        let key = Expr::field(gname.clone(), i.clone(), gfield.clone());
        let mut body = Vec::new();
        let mut values = Vec::new();
        let mut cols = Vec::new();
        let mut names = Vec::new();
        for it in &sel.items {
            match &it.expr {
                ItemExpr::Column(c) => {
                    values.push(key.clone());
                    cols.push((dedupe(&mut names, it.alias.clone().unwrap_or_else(|| c.name.clone())), gcol.ty));
                }
                agg @ (ItemExpr::Count(_) | ItemExpr::Sum(_)) => {
                    let (delta, ty) = match agg {
                        ItemExpr::Sum(c) => {
                            let col = self.column(c, &planned.bindings, &[])?;
                            (Expr::field(set.clone(), j.clone(), field_for(&col.expr)), col.ty)
                        }
                        _ => (Expr::Int(1), FieldType::Int),
                    };
                    let (acc, at) = self.new_acc(agg_name(agg), ty)?;
                    body.push(Stmt::Assign {
                        target: AccRef::scalar(acc.clone()),
                        value: Expr::Int(0),
                    });
                    body.push(Stmt::Loop(Loop {
                        header: Header::Forelem {
                            var: j.clone(),
                            domain: Domain::filtered(set.clone(), gfield.clone(), key.clone()),
                            method: None,
                        },
                        body: alloc::vec![Stmt::Accumulate {
                            target: AccRef::scalar(acc.clone()),
                            delta,
                        }],
                    }));
                    values.push(Expr::Acc(AccRef::scalar(acc)));
                    cols.push((dedupe(&mut names, it.alias.clone().unwrap_or_else(|| agg_name(agg).into())), at.field_type()));
                }
                _ => unreachable!(),
            }
        }
        self.declare_result(target, cols, output)?;
        body.push(Stmt::Union {
            target: ResultRef::shared(target),
            values,
        });
        self.prog.body.push(Stmt::Loop(Loop {
            header: Header::Forelem {
                var: i,
                domain: Domain::all(gname),
                method: None,
            },
            body,
        }));
        Ok(())
    }
}

fn describe(op: &Operand) -> String {
    match op {
        Operand::Int(n) => format!("integer {n}"),
        Operand::Str(s) => format!("string '{s}'"),
        Operand::Param(p) => format!("parameter '{p}'"),
        Operand::Col(c) => format!("column '{}'", c.name),
    }
}
