use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::blocking::{block_direct, block_indirect};
use super::dead::eliminate_dead_access;
use super::fusion::fuse_all;
use super::merge::merge_consumer;
use super::method::{select_iteration_method, DEFAULT_HASH_THRESHOLD};
use super::parallel::{blocked_loop_var, expand_and_hoist, parallelize};
use super::util::{describe, path_text};
use super::PassReport;
use crate::database::Database;
use crate::error::{Error, Result};
use crate::ir::{Effects, Expr, Header, Program, Stmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineOptions {
    /// Number of blocks or value segments per partitioned loop.
    pub partitions: u32,
    pub hash_threshold: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            partitions: 8,
            hash_threshold: DEFAULT_HASH_THRESHOLD,
        }
    }
}

/// One pass of the pipeline and the program it produced.
#[derive(Debug, Clone)]
pub struct PassStep {
    pub report: PassReport,
    pub program: Program,
}

/// Passes accepted by [`run_pass`], in pipeline order.
pub const PASS_NAMES: &[&str] = &[
    "eliminate_dead_access",
    "merge_consumer",
    "expand_and_hoist",
    "block",
    "parallelize",
    "reorder_and_fuse",
    "select_iteration_method",
];

pub fn run_pass(name: &str, p: &Program, db: Option<&Database>, opts: &PipelineOptions) -> Result<(Program, PassReport)> {
    Ok(match name {
        "eliminate_dead_access" => eliminate_dead_access(p),
        "merge_consumer" => merge_consumer(p),
        "expand_and_hoist" => expand_and_hoist(p),
        "block" => block_all(p, opts.partitions),
        "parallelize" => parallelize_all(p),
        "reorder_and_fuse" => fuse_all(p, db),
        "select_iteration_method" => select_iteration_method(p, db, opts.hash_threshold),
        other => {
            return Err(Error::Argument(format!(
                "unknown pass '{other}' (expected one of {})",
                PASS_NAMES.join(", ")
            )))
        }
    })
}

/// Runs every pass in order: dead code removal, producer/consumer merging,
/// hoisting of per-group counters, blocking, accumulator expansion,
/// parallelization, reordering with fusion and iteration method selection.
pub fn optimize(p: &Program, db: Option<&Database>, opts: &PipelineOptions) -> (Program, Vec<PassStep>) {
    let order = [
        "eliminate_dead_access",
        "merge_consumer",
        "expand_and_hoist",
        "block",
        "expand_and_hoist",
        "parallelize",
        "reorder_and_fuse",
        "select_iteration_method",
    ];
    let mut cur = p.clone();
    let mut steps = Vec::new();
    for name in order {
        let (next, report) = run_pass(name, &cur, db, opts).expect("known pass");
        cur = next;
        steps.push(PassStep {
            report,
            program: cur.clone(),
        });
    }
    (cur, steps)
}

/// The field `f` when `body` accumulates into a cell keyed by `T[var].f`.
fn keyed_field(body: &[Stmt], set: &str, var: &str) -> Option<String> {
    let mut found = None;
    for s in body {
        s.walk(&mut |st| {
            if let Stmt::Accumulate { target, .. } = st {
                if let Some(Expr::Field { set: s2, var: v2, field }) = target.key.as_deref() {
                    if s2 == set && v2 == var && found.is_none() {
                        found = Some(field.clone());
                    }
                }
            }
        });
    }
    found
}

/// Blocks each top-level forelem loop that writes something, when the
/// blocked loop can then be parallelized. A loop adding into cells keyed by
/// one of its fields is partitioned by value range on that field, so each
/// worker owns whole groups; other loops are split into contiguous blocks.
pub fn block_all(p: &Program, n: u32) -> (Program, PassReport) {
    const PASS: &str = "block";
    let mut out = p.clone();
    let mut evidence = Vec::new();
    let mut blocked = 0;
    for t in 0..out.body.len() {
        let Stmt::Loop(l) = &out.body[t] else { continue };
        let Header::Forelem { var, domain, .. } = &l.header else { continue };
        if domain.distinct.is_some() || domain.block.is_some() || Effects::of(&out.body[t]).writes.is_empty() {
            continue;
        }
        let what = describe(&out.body[t]);
        let (cand, report) = match keyed_field(&l.body, &domain.set, var) {
            Some(f) if domain.is_plain() => block_indirect(&out, &[t], &f, n),
            _ => block_direct(&out, &[t], n),
        };
        if !report.applied {
            evidence.push(format!("`{what}` kept: {}", report.evidence.join("; ")));
            continue;
        }
        let Some(k) = blocked_loop_var(&cand.body[t]) else { continue };
        let (trial, _) = expand_and_hoist(&cand);
        let at = trial
            .body
            .iter()
            .position(|s| matches!(s, Stmt::Loop(x) if matches!(&x.header, Header::Range { var, .. } if *var == k)));
        let (_, par) = match at {
            Some(i) => parallelize(&trial, &[i]),
            None => continue,
        };
        if !par.applied {
            evidence.push(format!("`{what}` kept: blocks could not run in parallel: {}", par.evidence.join("; ")));
            continue;
        }
        evidence.push(format!("{} `{what}`: {}", path_text(&[t]), report.evidence.join("; ")));
        out = cand;
        blocked += 1;
    }
    if blocked == 0 {
        if evidence.is_empty() {
            evidence.push("no top-level loop writes through a partitionable index set".into());
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
    (out, PassReport::applied(PASS, evidence, blocked))
}

/// Parallelizes every top-level blocked loop that passes the legality check.
pub fn parallelize_all(p: &Program) -> (Program, PassReport) {
    const PASS: &str = "parallelize";
    let mut out = p.clone();
    let mut evidence = Vec::new();
    let mut done = 0;
    for t in 0..out.body.len() {
        if blocked_loop_var(&out.body[t]).is_none() {
            continue;
        }
        let (next, r) = parallelize(&out, &[t]);
        evidence.extend(r.evidence.iter().map(|e| format!("{}: {e}", path_text(&[t]))));
        if r.applied {
            out = next;
            done += 1;
        }
    }
    if done == 0 {
        if evidence.is_empty() {
            evidence.push("no blocked loop to parallelize".into());
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
    (out, PassReport::applied(PASS, evidence, done))
}
