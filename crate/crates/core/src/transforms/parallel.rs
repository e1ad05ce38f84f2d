use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::util::{describe, loop_at, mentions_name, only_reads_var, path_text, walk_mut};
use super::PassReport;
use crate::ir::{AccRef, Domain, Effects, Expr, Filter, Header, Loop, Program, Stmt};

/// Turns the `for` loop produced by blocking into a `forall`. Accepted when
/// no iteration can observe another: accumulators written in the body are
/// per-worker copies subscripted by the loop variable, and results written
/// with shared unions are not read in the body.
pub fn parallelize(p: &Program, target: &[usize]) -> (Program, PassReport) {
    const PASS: &str = "parallelize";
    let Some(l) = loop_at(p, target) else {
        return (p.clone(), PassReport::declined(PASS, format!("no loop at {}", path_text(target))));
    };
    let Header::Range { var, parallel: false, .. } = &l.header else {
        return (
            p.clone(),
            PassReport::declined(PASS, format!("`{}` is not a sequential range loop", describe(&Stmt::Loop(l.clone())))),
        );
    };
    if p.enclosing_loops(target).iter().any(|e| e.header.is_forall()) {
        return (p.clone(), PassReport::declined(PASS, "loop is already inside a forall"));
    }
    let (evidence, problems) = cross_iteration_check(p, &l.body, var);
    if !problems.is_empty() {
        return (
            p.clone(),
            PassReport {
                pass: PASS.into(),
                applied: false,
                evidence: problems,
                rewritten: 0,
            },
        );
    }
    let mut out = p.clone();
    if let Some(Stmt::Loop(Loop {
        header: Header::Range { parallel, .. },
        ..
    })) = out.stmt_mut(target)
    {
        *parallel = true;
    }
    (out, PassReport::applied(PASS, evidence, 1))
}

/// Evidence of independence, and dependences carried between iterations of `k`.
pub(crate) fn cross_iteration_check(p: &Program, body: &[Stmt], k: &str) -> (Vec<String>, Vec<String>) {
    let mut evidence = Vec::new();
    let mut problems = Vec::new();
    let mut private: BTreeMap<String, String> = BTreeMap::new();
    let mut shared_results: BTreeMap<String, String> = BTreeMap::new();
    for s in body {
        s.walk(&mut |st| match st {
            Stmt::Accumulate { target, .. } | Stmt::Assign { target, .. } => {
                let per_worker = p.acc(&target.name).is_some_and(|a| a.per_worker);
                if per_worker && target.worker.as_deref() == Some(k) {
                    private.entry(target.name.clone()).or_insert_with(|| describe(st));
                } else {
                    problems.push(format!(
                        "`{}` writes '{}', shared by all iterations of {k}",
                        describe(st),
                        target.name
                    ));
                }
            }
            Stmt::Union { target, .. } => match target.worker.as_deref() {
                Some(w) if w == k => {
                    private.entry(target.name.clone()).or_insert_with(|| describe(st));
                }
                Some(_) => problems.push(format!("`{}` writes another iteration's copy of '{}'", describe(st), target.name)),
                None => {
                    shared_results.entry(target.name.clone()).or_insert_with(|| describe(st));
                }
            },
            Stmt::Merge { target } => problems.push(format!("`{}` merges '{target}' inside the loop", describe(st))),
            Stmt::Loop(_) => {}
        });
    }
    for s in body {
        s.walk(&mut |st| {
            let reader = describe(st);
            if let Stmt::Loop(l) = st {
                let set = match &l.header {
                    Header::Forelem { domain, .. } => Some(&domain.set),
                    Header::Values { set, .. } => Some(set),
                    Header::Range { .. } => None,
                };
                if let Some(w) = set.and_then(|s| shared_results.get(s)) {
                    problems.push(format!("`{reader}` iterates a result that `{w}` adds to from other iterations"));
                }
            }
            for e in st.own_exprs() {
                e.visit(&mut |x| match x {
                    Expr::Acc(r) => {
                        if let Some(w) = private.get(&r.name) {
                            if r.worker.as_deref() != Some(k) {
                                problems.push(format!("`{reader}` reads '{}' written by `{w}` in other iterations", r.name));
                            }
                        }
                    }
                    Expr::SumWorkers { name, .. } => {
                        if let Some(w) = private.get(name) {
                            problems.push(format!("`{reader}` sums copies of '{name}' still being written by `{w}`"));
                        }
                    }
                    Expr::Field { set, .. } => {
                        if let Some(w) = shared_results.get(set) {
                            problems.push(format!("`{reader}` reads '{set}' while `{w}` adds to it"));
                        }
                    }
                    _ => {}
                });
            }
        });
    }
    for (name, w) in &private {
        evidence.push(format!("'{name}' is written only through its copy for {k} (`{w}`)"));
    }
    for (name, w) in &shared_results {
        evidence.push(format!("'{name}' only receives order-independent unions (`{w}`) and is not read in the loop"));
    }
    (evidence, problems)
}

/// Code motion followed by iteration space expansion.
///
/// Code motion rewrites a per-iteration counter
/// `forelem (i ..) { a = 0; forelem (j in pS.g[e]) a += d; .. a .. }` into
/// one keyed accumulation `forelem (j in pS) a[S[j].g] += d` placed before the
/// loop, with reads of `a` becoming `a[e]`.
///
/// Expansion gives every accumulator written inside a blocked `for (k ..)`
/// loop a private copy per `k`: writes become `a[k]..`, zero initialisations
/// before the loop are dropped and reads after the loop become `sum(a[*]..)`.
pub fn expand_and_hoist(p: &Program) -> (Program, PassReport) {
    const PASS: &str = "expand_and_hoist";
    let mut out = p.clone();
    let mut evidence = Vec::new();
    let mut rewritten = 0;
    while let Some((next, ev)) = hoist_one(&out) {
        out = next;
        evidence.push(ev);
        rewritten += 2;
    }
    let mut t = 0;
    while t < out.body.len() {
        let Some(k) = blocked_loop_var(&out.body[t]) else {
            t += 1;
            continue;
        };
        let mut names: Vec<String> = Vec::new();
        out.body[t].walk(&mut |s| {
            if let Stmt::Accumulate { target, .. } | Stmt::Assign { target, .. } = s {
                if target.worker.is_none() && !names.contains(&target.name) {
                    names.push(target.name.clone());
                }
            }
        });
        for a in names {
            match expand_acc(&out, t, &a, &k) {
                Ok((next, removed, n)) => {
                    out = next;
                    t -= removed;
                    rewritten += n;
                    evidence.push(format!("'{a}' expanded to one copy per {k}; reads after the loop sum the copies"));
                }
                Err(why) => evidence.push(format!("'{a}' kept shared: {why}")),
            }
        }
        t += 1;
    }
    if rewritten == 0 {
        if evidence.is_empty() {
            evidence.push("no per-iteration counter to hoist and no accumulator inside a blocked loop".into());
        }
        return (
            p.clone(),
            PassReport {
                pass: PASS.into(),
                applied: false,
                evidence,
                rewritten: 0,
            },
        );
    }
    (out, PassReport::applied(PASS, evidence, rewritten))
}

/// The iterator of a sequential range loop that selects blocks or value segments.
pub(crate) fn blocked_loop_var(s: &Stmt) -> Option<String> {
    let Stmt::Loop(Loop {
        header: Header::Range { var, parallel: false, .. },
        body,
    }) = s
    else {
        return None;
    };
    let mut used = false;
    for b in body {
        b.walk(&mut |st| {
            if let Stmt::Loop(l) = st {
                match &l.header {
                    Header::Forelem { domain, .. } => used |= domain.block.as_deref() == Some(var.as_str()),
                    Header::Values { part, .. } => used |= part.as_deref() == Some(var.as_str()),
                    Header::Range { .. } => {}
                }
            }
        });
    }
    used.then(|| var.clone())
}

fn is_zero_init(s: &Stmt, a: &str) -> bool {
    matches!(s, Stmt::Assign { target, value: Expr::Int(0) } if target.name == a && target.worker.is_none() && target.key.is_none())
}

fn reads_name(stmts: &[Stmt], a: &str) -> bool {
    Effects::of_all(stmts).reads.contains(a)
}

/// Expands accumulator `a` written in the blocked loop at top-level index `t`.
/// Returns the program, the number of initialisations removed before `t`
/// and the number of statements rewritten.
fn expand_acc(p: &Program, t: usize, a: &str, k: &str) -> Result<(Program, usize, usize), String> {
    let decl = p.acc(a).ok_or_else(|| format!("'{a}' is not an accumulator"))?;
    if decl.per_worker {
        return Err("already has per-worker copies".into());
    }
    let mut inits = Vec::new();
    for (j, s) in p.body.iter().enumerate() {
        if j == t || !Effects::of(s).writes_name(a) {
            continue;
        }
        if j < t && is_zero_init(s, a) {
            inits.push(j);
        } else {
            return Err(format!("also written by `{}`", describe(s)));
        }
    }
    let Stmt::Loop(l) = &p.body[t] else { unreachable!() };
    let mut temp = false;
    for s in &l.body {
        s.walk(&mut |st| {
            if let Stmt::Assign { target, .. } = st {
                temp |= target.name == a;
            }
        });
    }
    if reads_name(&p.body[..t], a) {
        return Err("read before the loop completes".into());
    }
    let after = reads_name(&p.body[t + 1..], a);
    if temp && after {
        return Err("assigned in the loop and read after it".into());
    }
    if !temp && reads_name(&l.body, a) {
        return Err("read inside the loop while it is still being accumulated".into());
    }

    let mut out = p.clone();
    let mut n = 0;
    let worker = Some(String::from(k));
    if let Stmt::Loop(l) = &mut out.body[t] {
        walk_mut(&mut l.body, &mut |st| {
            if let Stmt::Accumulate { target, .. } | Stmt::Assign { target, .. } = st {
                if target.name == a {
                    target.worker = worker.clone();
                    n += 1;
                }
            }
        });
        for s in &mut l.body {
            s.rewrite_exprs(&mut |e| {
                if let Expr::Acc(r) = e {
                    if r.name == a {
                        r.worker = worker.clone();
                    }
                }
            });
        }
    }
    for s in &mut out.body[t + 1..] {
        let mut touched = false;
        s.rewrite_exprs(&mut |e| {
            if let Expr::Acc(AccRef { name, key, .. }) = e {
                if name == a {
                    *e = Expr::SumWorkers {
                        name: name.clone(),
                        key: key.take(),
                    };
                    touched = true;
                }
            }
        });
        n += touched as usize;
    }
    for j in inits.iter().rev() {
        out.body.remove(*j);
    }
    out.acc_mut(a).expect("declared").per_worker = true;
    Ok((out, inits.len(), n))
}

fn hoist_one(p: &Program) -> Option<(Program, String)> {
    for (t, top) in p.body.iter().enumerate() {
        let Stmt::Loop(l) = top else { continue };
        let Header::Forelem { var: i, .. } = &l.header else { continue };
        for r in 0..l.body.len().saturating_sub(1) {
            let Stmt::Assign { target, value: Expr::Int(0) } = &l.body[r] else { continue };
            let a = &target.name;
            if target.worker.is_some() || target.key.is_some() {
                continue;
            }
            let Stmt::Loop(inner) = &l.body[r + 1] else { continue };
            let Header::Forelem {
                var: j,
                domain:
                    Domain {
                        set,
                        filter: Some(Filter { field: g, value: e }),
                        distinct: None,
                        block: None,
                    },
                ..
            } = &inner.header
            else {
                continue;
            };
            let decl = p.acc(a)?;
            if decl.keyed || decl.per_worker || !only_reads_var(e, i) || inner.body.is_empty() {
                continue;
            }
            let pure = inner.body.iter().all(|s| {
                matches!(s, Stmt::Accumulate { target, delta }
                    if target.name == *a && target.worker.is_none() && target.key.is_none() && only_reads_var(delta, j))
            });
            if !pure
                || mentions_name(&l.body[..r], a)
                || Effects::of_all(&l.body[r + 2..]).writes_name(a)
                || mentions_name(&p.body[..t], a)
                || mentions_name(&p.body[t + 1..], a)
                || Effects::of(top).writes_name(set)
            {
                continue;
            }
            let key = Expr::field(set.clone(), j.clone(), g.clone());
            let mut hoisted = inner.clone();
            if let Header::Forelem { domain, method, .. } = &mut hoisted.header {
                *domain = Domain::all(set.clone());
                *method = None;
            }
            for s in &mut hoisted.body {
                if let Stmt::Accumulate { target, .. } = s {
                    target.key = Some(alloc::boxed::Box::new(key.clone()));
                }
            }
            let mut consumer = l.clone();
            consumer.body.drain(r..r + 2);
            for s in &mut consumer.body {
                s.rewrite_exprs(&mut |x| {
                    if let Expr::Acc(ar) = x {
                        if ar.name == *a && ar.key.is_none() {
                            ar.key = Some(alloc::boxed::Box::new(e.clone()));
                        }
                    }
                });
            }
            let ev = format!(
                "hoisted the count into '{a}' out of `{}`: {a}[{set}.{g}] is accumulated in one pass over p{set} and read as {a}[{e}]",
                describe(top)
            );
            let mut out = p.clone();
            out.body[t] = Stmt::Loop(consumer);
            out.body.insert(t, Stmt::Loop(hoisted));
            out.acc_mut(a).expect("declared").keyed = true;
            return Some((out, ev));
        }
    }
    None
}
