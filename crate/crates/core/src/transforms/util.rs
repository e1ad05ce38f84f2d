use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::ir::{Expr, Header, Loop, Program, Stmt, StmtPath};

/// First line of a statement's canonical text, for reports.
pub(crate) fn describe(s: &Stmt) -> String {
    let text = s.to_string();
    let line = text.lines().next().unwrap_or("").trim();
    line.trim_end_matches('{').trim_end().to_string()
}

pub(crate) fn path_text(p: &[usize]) -> String {
    let parts: Vec<String> = p.iter().map(|i| i.to_string()).collect();
    parts.join(".")
}

pub(crate) fn loop_at<'p>(p: &'p Program, path: &[usize]) -> Option<&'p Loop> {
    p.stmt(path).and_then(Stmt::as_loop)
}

/// Renames every use of loop variable `from` to `to` within `stmts`.
pub(crate) fn rename_var(stmts: &mut [Stmt], from: &str, to: &str) {
    let fix = |v: &mut String| {
        if v == from {
            *v = to.into();
        }
    };
    for s in stmts.iter_mut() {
        rename_in_stmt(s, &fix);
    }
}

fn rename_in_stmt(s: &mut Stmt, fix: &dyn Fn(&mut String)) {
    s.rewrite_exprs(&mut |e| match e {
        Expr::Field { var, .. } | Expr::Var(var) => fix(var),
        Expr::Acc(r) => {
            if let Some(w) = &mut r.worker {
                fix(w);
            }
        }
        _ => {}
    });
    rename_shallow(s, fix);
}

/// Renames binders and subscripts that are not expressions.
fn rename_shallow(s: &mut Stmt, fix: &dyn Fn(&mut String)) {
    match s {
        Stmt::Loop(l) => {
            match &mut l.header {
                Header::Forelem { var, domain, .. } => {
                    fix(var);
                    if let Some(b) = &mut domain.block {
                        fix(b);
                    }
                }
                Header::Range { var, .. } => fix(var),
                Header::Values { var, part, .. } => {
                    fix(var);
                    if let Some(p) = part {
                        fix(p);
                    }
                }
            }
            for b in &mut l.body {
                rename_shallow(b, fix);
            }
        }
        Stmt::Accumulate { target, .. } | Stmt::Assign { target, .. } => {
            if let Some(w) = &mut target.worker {
                fix(w);
            }
        }
        Stmt::Union { target, .. } => {
            if let Some(w) = &mut target.worker {
                fix(w);
            }
        }
        Stmt::Merge { .. } => {}
    }
}

/// Whether `name` (an accumulator or result) appears anywhere in `stmts`.
pub(crate) fn mentions_name(stmts: &[Stmt], name: &str) -> bool {
    let mut found = false;
    for s in stmts {
        s.walk(&mut |st| {
            match st {
                Stmt::Loop(l) => match &l.header {
                    Header::Forelem { domain, .. } => found |= domain.set == name,
                    Header::Values { set, .. } => found |= set == name,
                    Header::Range { .. } => {}
                },
                Stmt::Accumulate { target, .. } | Stmt::Assign { target, .. } => found |= target.name == name,
                Stmt::Union { target, .. } => found |= target.name == name,
                Stmt::Merge { target } => found |= target == name,
            }
            for e in st.own_exprs() {
                e.visit(&mut |x| match x {
                    Expr::Acc(r) => found |= r.name == name,
                    Expr::SumWorkers { name: n, .. } => found |= n == name,
                    Expr::Field { set, .. } => found |= set == name,
                    _ => {}
                });
            }
        });
    }
    found
}

/// Paths of every loop body in the program (the top level is the empty path), outermost first.
pub(crate) fn bodies(p: &Program) -> Vec<StmtPath> {
    let mut out = alloc::vec![Vec::new()];
    for path in p.paths() {
        if matches!(p.stmt(&path), Some(Stmt::Loop(_))) {
            out.push(path);
        }
    }
    out
}

pub(crate) fn body_at<'p>(p: &'p Program, path: &[usize]) -> Option<&'p Vec<Stmt>> {
    if path.is_empty() {
        Some(&p.body)
    } else {
        loop_at(p, path).map(|l| &l.body)
    }
}

/// True when `e` depends only on constants and fields of iterator `var`.
pub(crate) fn only_reads_var(e: &Expr, var: &str) -> bool {
    let mut ok = true;
    e.visit(&mut |x| match x {
        Expr::Field { var: v, .. } => ok &= v == var,
        Expr::Int(_) | Expr::Str(_) | Expr::Add(..) | Expr::Mul(..) => {}
        _ => ok = false,
    });
    ok
}

/// Pre-order mutable walk.
pub(crate) fn walk_mut(stmts: &mut [Stmt], f: &mut impl FnMut(&mut Stmt)) {
    for s in stmts {
        f(s);
        if let Stmt::Loop(l) = s {
            walk_mut(&mut l.body, f);
        }
    }
}
