use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::util::{describe, mentions_name};
use super::PassReport;
use crate::ir::{Effects, Expr, Header, Loop, Program, Stmt};
use crate::multiset::FieldType;

/// Merges a loop that only builds an intermediate result with the single
/// loop that consumes it: the consumer iterates the producer's index set
/// directly and reads the produced values in place of the result's fields.
pub fn merge_consumer(p: &Program) -> (Program, PassReport) {
    const PASS: &str = "merge_consumer";
    let mut out = p.clone();
    let mut evidence = Vec::new();
    let mut merged = 0;
    loop {
        let mut reasons = Vec::new();
        match merge_one(&out, &mut reasons) {
            Some((next, ev)) => {
                out = next;
                evidence.push(ev);
                merged += 1;
            }
            None => {
                if merged == 0 {
                    evidence = reasons;
                }
                break;
            }
        }
    }
    if merged == 0 {
        if evidence.is_empty() {
            evidence.push("no intermediate result is built by one loop and read by another".into());
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
    (out, PassReport::applied(PASS, evidence, merged * 2))
}

fn expr_type(p: &Program, e: &Expr) -> Option<FieldType> {
    Some(match e {
        Expr::Int(_) | Expr::Var(_) => FieldType::Int,
        Expr::Str(_) => FieldType::Str,
        Expr::Field { set, field, .. } => p.set_schema(set)?.field(field)?.ty,
        Expr::Acc(r) => p.acc(&r.name)?.ty.field_type(),
        Expr::SumWorkers { name, .. } => p.acc(name)?.ty.field_type(),
        Expr::Add(a, b) | Expr::Mul(a, b) => {
            let (x, y) = (expr_type(p, a)?, expr_type(p, b)?);
            if x == FieldType::Float || y == FieldType::Float {
                FieldType::Float
            } else {
                x
            }
        }
    })
}

fn merge_one(p: &Program, reasons: &mut Vec<String>) -> Option<(Program, String)> {
    for res in p.results.iter().filter(|r| !r.output && !r.per_worker) {
        let name = &res.name;
        let users: Vec<usize> = (0..p.body.len())
            .filter(|&j| mentions_name(core::slice::from_ref(&p.body[j]), name))
            .collect();
        let [w, c] = users[..] else {
            if users.len() > 2 {
                reasons.push(format!("'{name}' is used by {} statements", users.len()));
            }
            continue;
        };
        let Stmt::Loop(Loop {
            header: Header::Forelem { var: i, domain, .. },
            body: wbody,
        }) = &p.body[w]
        else {
            continue;
        };
        let [Stmt::Union { target, values }] = &wbody[..] else {
            reasons.push(format!("`{}` does more than add to '{name}'", describe(&p.body[w])));
            continue;
        };
        if target.name != *name || target.worker.is_some() || values.iter().any(|v| mentions_name_expr(v, name)) {
            continue;
        }
        let Stmt::Loop(Loop {
            header: Header::Forelem {
                var: r,
                domain: cdom,
                ..
            },
            body: cbody,
        }) = &p.body[c]
        else {
            reasons.push(format!("'{name}' is read by `{}`, which is not a loop over it", describe(&p.body[c])));
            continue;
        };
        if cdom.set != *name || !cdom.is_plain() {
            reasons.push(format!("`{}` does not iterate all of '{name}'", describe(&p.body[c])));
            continue;
        }
        if Effects::of(&p.body[w]).conflicts(&Effects::of_all(&p.body[w + 1..c])) {
            reasons.push(format!(
                "statements between `{}` and its consumer change what it reads",
                describe(&p.body[w])
            ));
            continue;
        }
        let typed = res
            .schema
            .fields()
            .iter()
            .zip(values)
            .all(|(f, v)| expr_type(p, v) == Some(f.ty));
        if !typed {
            reasons.push(format!("values added to '{name}' change type when stored"));
            continue;
        }
        let mut body = cbody.clone();
        let mut subst: Vec<Expr> = values.clone();
        let mut dom = domain.clone();
        if i != r {
            for v in &mut subst {
                v.rewrite(&mut |e| {
                    if let Expr::Field { var, .. } = e {
                        if var == i {
                            *var = r.clone();
                        }
                    }
                });
            }
            if let Some(f) = &mut dom.filter {
                f.value.rewrite(&mut |e| {
                    if let Expr::Field { var, .. } = e {
                        if var == i {
                            *var = r.clone();
                        }
                    }
                });
            }
        }
        for s in &mut body {
            s.rewrite_exprs(&mut |e| {
                if let Expr::Field { set, var, field } = e {
                    if set == name && var == r {
                        let idx = res.schema.index_of(field).expect("validated field");
                        *e = subst[idx].clone();
                    }
                }
            });
        }
        if mentions_name(&body, name) {
            reasons.push(format!("'{name}' is read other than through the consumer's iterator"));
            continue;
        }
        let ev = format!(
            "`{}` and `{}` merged: '{name}' had one producer and one consumer",
            describe(&p.body[w]),
            describe(&p.body[c])
        );
        let mut out = p.clone();
        out.body[c] = Stmt::Loop(Loop {
            header: Header::Forelem {
                var: r.clone(),
                domain: dom,
                method: None,
            },
            body,
        });
        out.body.remove(w);
        out.results.retain(|x| x.name != *name);
        return Some((out, ev));
    }
    None
}

fn mentions_name_expr(e: &Expr, name: &str) -> bool {
    let mut found = false;
    e.visit(&mut |x| match x {
        Expr::Field { set, .. } => found |= set == name,
        Expr::Acc(r) => found |= r.name == name,
        Expr::SumWorkers { name: n, .. } => found |= n == name,
        _ => {}
    });
    found
}
