use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::util::{body_at, bodies, describe, loop_at, only_reads_var, path_text, rename_var};
use super::PassReport;
use crate::database::Database;
use crate::ir::{Domain, Effects, Expr, Filter, Header, Loop, Program, Stmt, WriteKind};
use crate::multiset::value_range;

/// Names through which running `a` and `b` in either order can differ.
fn conflict_names(a: &Effects, b: &Effects) -> Vec<String> {
    let mut out = BTreeSet::new();
    for w in a.writes.keys() {
        if b.reads.contains(w) {
            out.insert(w.clone());
        }
    }
    for w in b.writes.keys() {
        if a.reads.contains(w) {
            out.insert(w.clone());
        }
    }
    for (name, ka) in &a.writes {
        if let Some(kb) = b.writes.get(name) {
            let all: BTreeSet<_> = ka.union(kb).collect();
            if all.len() != 1 || all.contains(&WriteKind::Overwrite) {
                out.insert(name.clone());
            }
        }
    }
    out.into_iter().collect()
}

/// Moves the statement at `from` to index `to` of the same statement list.
/// Declined when it would cross a statement it depends on, or that depends on it.
pub fn statement_reorder(p: &Program, from: &[usize], to: usize) -> (Program, PassReport) {
    const PASS: &str = "statement_reorder";
    let Some(body) = p.parent_body(from) else {
        return (p.clone(), PassReport::declined(PASS, format!("no statement at {}", path_text(from))));
    };
    let i = *from.last().expect("non-empty path");
    if to >= body.len() {
        return (p.clone(), PassReport::declined(PASS, format!("position {to} is past the end of the list")));
    }
    if to == i {
        return (p.clone(), PassReport::declined(PASS, "statement is already at that position"));
    }
    let s = &body[i];
    let crossed = if to < i { &body[to..i] } else { &body[i + 1..=to] };
    let es = Effects::of(s);
    let mut evidence = Vec::new();
    for c in crossed {
        let names = conflict_names(&es, &Effects::of(c));
        if !names.is_empty() {
            return (
                p.clone(),
                PassReport::declined(
                    PASS,
                    format!(
                        "moving `{}` across `{}` breaks the dependence through {}",
                        describe(s),
                        describe(c),
                        names.join(", ")
                    ),
                ),
            );
        }
        evidence.push(format!("`{}` and `{}` share no dependence", describe(s), describe(c)));
    }
    let mut out = p.clone();
    let body = out.parent_body_mut(from).expect("checked");
    let moved = body.remove(i);
    body.insert(to, moved);
    (out, PassReport::applied(PASS, evidence, crossed.len() + 1))
}

fn same_parent(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && !a.is_empty() && a[..a.len() - 1] == b[..b.len() - 1]
}

fn values_equal(db: &Database, set: &str, f: &str, set2: &str, g: &str) -> Option<bool> {
    let a = value_range(db.get(set)?, f).ok()?;
    let b = value_range(db.get(set2)?, g).ok()?;
    Some(a == b)
}

enum Mode {
    Same,
    EquivalentValues(String),
    Redomain(String),
}

/// Fuses two adjacent loops into one whose body is `a`'s body followed by
/// `b`'s. Headers must iterate the same space:
/// - identical headers, up to the loop variable's name;
/// - value loops over two fields whose value sets are equal in `db`;
/// - forelem loops over `pT.f[l]` and `pT.g[l]` inside `for (l in X(..)[k])`,
///   when `T.f` and `T.g` have equal value sets in `db` and `b` only adds to
///   per-worker accumulators that are read as sums after the parallel loop,
///   so it does not matter in which iteration a tuple is counted.
pub fn fuse_loops(p: &Program, a: &[usize], b: &[usize], db: Option<&Database>) -> (Program, PassReport) {
    const PASS: &str = "fuse_loops";
    if !same_parent(a, b) || b[b.len() - 1] != a[a.len() - 1] + 1 {
        return (
            p.clone(),
            PassReport::declined(PASS, format!("loops {} and {} are not adjacent", path_text(a), path_text(b))),
        );
    }
    let (Some(la), Some(lb)) = (loop_at(p, a), loop_at(p, b)) else {
        return (p.clone(), PassReport::declined(PASS, "both statements must be loops"));
    };
    let (va, vb) = (String::from(la.header.var()), String::from(lb.header.var()));
    let mut lb = lb.clone();
    if va != vb {
        if lb.body.iter().any(|s| binds(s, &va)) || la.body.iter().any(|s| binds(s, &vb)) {
            return (p.clone(), PassReport::declined(PASS, "loop variables clash with nested loops"));
        }
        rename_var(&mut lb.body, &vb, &va);
    }
    let mode = match (&la.header, &lb.header) {
        (Header::Range { n, parallel, .. }, Header::Range { n: n2, parallel: p2, .. }) => {
            if n != n2 || parallel != p2 {
                return (p.clone(), PassReport::declined(PASS, "range loops have different bounds"));
            }
            Mode::Same
        }
        (
            Header::Values { set, field, part, .. },
            Header::Values {
                set: s2,
                field: f2,
                part: p2,
                ..
            },
        ) => {
            if part != p2 {
                return (p.clone(), PassReport::declined(PASS, "value loops take different segments"));
            }
            if set == s2 && field == f2 {
                Mode::Same
            } else {
                match db.and_then(|d| values_equal(d, set, field, s2, f2)) {
                    Some(true) => Mode::EquivalentValues(format!("{set}.{field} and {s2}.{f2} have equal value sets")),
                    Some(false) => {
                        return (
                            p.clone(),
                            PassReport::declined(PASS, format!("{set}.{field} and {s2}.{f2} have different value sets")),
                        )
                    }
                    None => {
                        return (
                            p.clone(),
                            PassReport::declined(PASS, format!("value sets of {set}.{field} and {s2}.{f2} are not known")),
                        )
                    }
                }
            }
        }
        (Header::Forelem { domain: da, .. }, Header::Forelem { domain: dbm, .. }) => {
            if da.set != dbm.set {
                return (
                    p.clone(),
                    PassReport::declined(PASS, format!("loops iterate different multisets '{}' and '{}'", da.set, dbm.set)),
                );
            }
            if da == dbm {
                Mode::Same
            } else {
                match redomain_check(p, a, da, dbm, &lb, &va, db) {
                    Ok(why) => Mode::Redomain(why),
                    Err(why) => return (p.clone(), PassReport::declined(PASS, why)),
                }
            }
        }
        _ => return (p.clone(), PassReport::declined(PASS, "loop headers are of different kinds")),
    };

    let sa = Stmt::Loop(la.clone());
    let sb = Stmt::Loop(Loop {
        header: la.header.clone(),
        body: lb.body.clone(),
    });
    let private = match &la.header {
        Header::Range { var, .. } => Some(var.as_str()),
        _ => None,
    };
    let blocking: Vec<String> = conflict_names(&Effects::of(&sa), &Effects::of(&sb))
        .into_iter()
        .filter(|n| !private.is_some_and(|k| private_to(p, &la.body, &lb.body, n, k)))
        .collect();
    if !blocking.is_empty() {
        return (
            p.clone(),
            PassReport::declined(PASS, format!("the loop bodies depend on each other through {}", blocking.join(", "))),
        );
    }
    let mut evidence = alloc::vec![format!("no dependence between `{}` and `{}`", describe(&sa), describe(&Stmt::Loop(lb.clone())))];
    match mode {
        Mode::Same => evidence.push("headers are identical".into()),
        Mode::EquivalentValues(w) | Mode::Redomain(w) => evidence.push(w),
    }
    let mut fused = la.clone();
    fused.body.extend(lb.body);
    let mut out = p.clone();
    let body = out.parent_body_mut(a).expect("checked");
    let i = a[a.len() - 1];
    body[i] = Stmt::Loop(fused);
    body.remove(i + 1);
    (out, PassReport::applied(PASS, evidence, 2))
}

fn binds(s: &Stmt, var: &str) -> bool {
    let mut found = false;
    s.walk(&mut |st| {
        if let Stmt::Loop(l) = st {
            found |= l.header.var() == var;
        }
    });
    found
}

/// Whether every access to `name` in both bodies goes through the copy for `k`.
fn private_to(p: &Program, a: &[Stmt], b: &[Stmt], name: &str, k: &str) -> bool {
    if !p.acc(name).is_some_and(|d| d.per_worker) {
        return false;
    }
    let mut ok = true;
    for s in a.iter().chain(b) {
        s.walk(&mut |st| {
            if let Stmt::Accumulate { target, .. } | Stmt::Assign { target, .. } = st {
                if target.name == name {
                    ok &= target.worker.as_deref() == Some(k);
                }
            }
            for e in st.own_exprs() {
                e.visit(&mut |x| match x {
                    Expr::Acc(r) if r.name == name => ok &= r.worker.as_deref() == Some(k),
                    Expr::SumWorkers { name: n, .. } if n == name => ok = false,
                    _ => {}
                });
            }
        });
    }
    ok
}

fn redomain_check(
    p: &Program,
    a: &[usize],
    da: &Domain,
    dbm: &Domain,
    lb: &Loop,
    var: &str,
    db: Option<&Database>,
) -> Result<String, String> {
    let (
        Some(Filter {
            field: fa,
            value: Expr::Var(l),
        }),
        Some(Filter {
            field: fb,
            value: Expr::Var(l2),
        }),
    ) = (&da.filter, &dbm.filter)
    else {
        return Err(format!("domains `{da}` and `{dbm}` differ"));
    };
    if l != l2 || da.distinct.is_some() || dbm.distinct.is_some() || da.block.is_some() || dbm.block.is_some() {
        return Err(format!("domains `{da}` and `{dbm}` differ"));
    }
    let encl = p.enclosing_loops(a);
    let Some(Header::Values {
        var: lv,
        set: src,
        field: sf,
        part: Some(k),
    }) = encl.last().map(|x| &x.header)
    else {
        return Err(format!("`{da}` is not directly inside a value-segment loop"));
    };
    if lv != l || !encl.iter().any(|x| matches!(&x.header, Header::Range { var, parallel: true, .. } if var == k)) {
        return Err(format!("`{da}` is not partitioned by a parallel loop"));
    }
    let db = db.ok_or_else(|| format!("value sets of {}.{fa} and {}.{fb} are not known", da.set, da.set))?;
    let t = db.get(&da.set).ok_or_else(|| format!("table '{}' is not in the database", da.set))?;
    let s = db.get(src).ok_or_else(|| format!("table '{src}' is not in the database"))?;
    let (ra, rb, rs) = (
        value_range(t, fa).map_err(|e| format!("{e}"))?,
        value_range(t, fb).map_err(|e| format!("{e}"))?,
        value_range(s, sf).map_err(|e| format!("{e}"))?,
    );
    if ra != rb {
        return Err(format!("{}.{fa} and {}.{fb} have different value sets", da.set, da.set));
    }
    if !ra.is_subset(&rs) {
        return Err(format!("segments of {src}.{sf} do not cover the values of {}.{fa}", da.set));
    }
    let mut accs = BTreeSet::new();
    for s in &lb.body {
        match s {
            Stmt::Accumulate { target, delta }
                if target.worker.as_deref() == Some(k.as_str())
                    && p.acc(&target.name).is_some_and(|d| d.per_worker)
                    && only_reads_var(delta, var)
                    && target.key.as_deref().is_none_or(|e| only_reads_var(e, var)) =>
            {
                accs.insert(target.name.clone());
            }
            other => {
                return Err(format!(
                    "`{}` is not an accumulation into a per-worker copy that depends only on the tuple",
                    describe(other)
                ))
            }
        }
    }
    let forall_path = &a[..encl
        .iter()
        .position(|x| x.header.is_forall())
        .expect("checked above")
        + 1];
    let forall = p.stmt(forall_path).expect("enclosing loop");
    for name in &accs {
        let mut bad = false;
        p.walk(&mut |st| {
            for e in st.own_exprs() {
                e.visit(&mut |x| {
                    if let Expr::Acc(r) = x {
                        bad |= r.name == *name;
                    }
                });
            }
        });
        forall.walk(&mut |st| {
            for e in st.own_exprs() {
                e.visit(&mut |x| {
                    if let Expr::SumWorkers { name: n, .. } = x {
                        bad |= n == name;
                    }
                });
            }
        });
        if bad {
            return Err(format!("'{name}' is read per worker, so moving contributions between workers is visible"));
        }
    }
    Ok(format!(
        "{t}.{fa} and {t}.{fb} have equal value sets covered by X({src}.{sf}), and {} are only read as sums over all workers",
        accs.iter().cloned().collect::<Vec<_>>().join(", "),
        t = da.set
    ))
}

/// Swaps a perfectly nested pair of forelem loops. An inner filter that
/// compares with a field of the outer tuple is turned around, so
/// `forelem (i in pA) forelem (j in pB.id[A[i].b_id])` becomes
/// `forelem (j in pB) forelem (i in pA.b_id[B[j].id])`.
pub fn interchange(p: &Program, outer: &[usize]) -> (Program, PassReport) {
    const PASS: &str = "interchange";
    let Some(lo) = loop_at(p, outer) else {
        return (p.clone(), PassReport::declined(PASS, format!("no loop at {}", path_text(outer))));
    };
    let [Stmt::Loop(li)] = &lo.body[..] else {
        return (p.clone(), PassReport::declined(PASS, "imperfect nest: the outer body is not a single loop"));
    };
    let (
        Header::Forelem { var: i, domain: dout, .. },
        Header::Forelem { var: j, domain: din, .. },
    ) = (&lo.header, &li.header)
    else {
        return (p.clone(), PassReport::declined(PASS, "both loops must be forelem loops"));
    };
    if i == j {
        return (p.clone(), PassReport::declined(PASS, format!("both loops bind '{i}'")));
    }
    let eff = Effects::of_all(&li.body);
    let order_free = eff
        .writes
        .values()
        .all(|k| !k.contains(&WriteKind::Overwrite))
        && eff.writes.keys().all(|w| !eff.reads.contains(w));
    if !order_free {
        return (
            p.clone(),
            PassReport::declined(PASS, "the loop body depends on the order of iterations"),
        );
    }
    let depends = din.filter.as_ref().is_some_and(|f| f.value.mentions_var(i));
    let (new_outer, new_inner, how) = if !depends {
        (din.clone(), dout.clone(), String::from("the inner index set does not depend on the outer tuple"))
    } else {
        let Some(Filter {
            field: f,
            value: Expr::Field { set, var, field: g },
        }) = &din.filter
        else {
            return (p.clone(), PassReport::declined(PASS, "inner filter is not a field of the outer tuple"));
        };
        if var != i || *set != dout.set || !dout.is_plain() || din.distinct.is_some() || din.block.is_some() {
            return (
                p.clone(),
                PassReport::declined(PASS, "only an equality with a field of an unfiltered outer loop can be turned around"),
            );
        }
        (
            Domain::all(din.set.clone()),
            Domain::filtered(dout.set.clone(), g.clone(), Expr::field(din.set.clone(), j.clone(), f.clone())),
            format!("{}.{g} = {}.{f} is symmetric", dout.set, din.set),
        )
    };
    let mut out = p.clone();
    *out.stmt_mut(outer).expect("checked") = Stmt::Loop(Loop {
        header: Header::Forelem {
            var: j.clone(),
            domain: new_outer,
            method: None,
        },
        body: alloc::vec![Stmt::Loop(Loop {
            header: Header::Forelem {
                var: i.clone(),
                domain: new_inner,
                method: None,
            },
            body: li.body.clone(),
        })],
    });
    (
        out,
        PassReport::applied(PASS, alloc::vec![how, "the body only accumulates or adds tuples".into()], 2),
    )
}

fn may_fuse(a: &Header, b: &Header) -> bool {
    match (a, b) {
        (Header::Range { n, parallel, .. }, Header::Range { n: n2, parallel: p2, .. }) => n == n2 && parallel == p2,
        (Header::Values { part, .. }, Header::Values { part: p2, .. }) => part == p2,
        (Header::Forelem { domain, .. }, Header::Forelem { domain: d2, .. }) => domain.set == d2.set,
        _ => false,
    }
}

/// Repeatedly brings loops that iterate the same space next to each other,
/// where dependences allow, and fuses them.
pub fn fuse_all(p: &Program, db: Option<&Database>) -> (Program, PassReport) {
    const PASS: &str = "reorder_and_fuse";
    let mut out = p.clone();
    let mut evidence = Vec::new();
    let mut fused = 0;
    'search: loop {
        for bp in bodies(&out) {
            let body = body_at(&out, &bp).expect("listed body");
            for i in 0..body.len() {
                let Stmt::Loop(li) = &body[i] else { continue };
                for j in i + 1..body.len() {
                    let Stmt::Loop(lj) = &body[j] else { continue };
                    if !may_fuse(&li.header, &lj.header) {
                        continue;
                    }
                    let at = |x: usize| {
                        let mut v = bp.clone();
                        v.push(x);
                        v
                    };
                    let mut cand = out.clone();
                    let mut moved = None;
                    if j > i + 1 {
                        let (c, r) = statement_reorder(&cand, &at(j), i + 1);
                        if !r.applied {
                            continue;
                        }
                        cand = c;
                        moved = Some(r);
                    }
                    let (c, r) = fuse_loops(&cand, &at(i), &at(i + 1), db);
                    if !r.applied {
                        continue;
                    }
                    if let Some(m) = moved {
                        evidence.push(format!("moved loop {} to {}: {}", path_text(&at(j)), path_text(&at(i + 1)), m.evidence.join("; ")));
                    }
                    evidence.push(format!("fused loops {} and {}: {}", path_text(&at(i)), path_text(&at(i + 1)), r.evidence.join("; ")));
                    out = c;
                    fused += 1;
                    continue 'search;
                }
            }
        }
        break;
    }
    if fused == 0 {
        return (p.clone(), PassReport::declined(PASS, "no pair of loops over the same space can be fused"));
    }
    (out, PassReport::applied(PASS, evidence, fused * 2))
}
