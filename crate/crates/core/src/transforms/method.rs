use alloc::format;
use alloc::vec::Vec;

use super::util::{describe, path_text};
use super::PassReport;
use crate::database::Database;
use crate::ir::{Header, IterMethod, Program, Stmt};

/// Smallest base multiset for which a filtered inner loop probes a hash index.
pub const DEFAULT_HASH_THRESHOLD: usize = 64;

/// Annotates every forelem loop with how to realize its index set. A filtered
/// loop nested in another loop probes a hash index on the filter field when
/// its base table has at least `threshold` rows; everything else scans.
/// Without a database, sizes are unknown and every loop scans.
pub fn select_iteration_method(p: &Program, db: Option<&Database>, threshold: usize) -> (Program, PassReport) {
    const PASS: &str = "select_iteration_method";
    let mut out = p.clone();
    let mut evidence = Vec::new();
    let mut changed = 0;
    for path in p.paths() {
        let Some(Stmt::Loop(l)) = p.stmt(&path) else { continue };
        let Header::Forelem { domain, method, .. } = &l.header else { continue };
        let nested = path.len() > 1;
        let size = db.and_then(|d| d.get(&domain.set)).map(|t| t.len());
        let choice = match (&domain.filter, &domain.block, size) {
            (Some(f), None, Some(n)) if nested && n >= threshold => {
                evidence.push(format!(
                    "{} `{}`: probe hash({}) ({} rows >= {threshold})",
                    path_text(&path),
                    describe(p.stmt(&path).unwrap()),
                    f.field,
                    n
                ));
                IterMethod::HashProbe(f.field.clone())
            }
            (Some(_), None, _) if nested => {
                evidence.push(format!(
                    "{} `{}`: scan ({})",
                    path_text(&path),
                    describe(p.stmt(&path).unwrap()),
                    match size {
                        Some(n) => format!("{n} rows < {threshold}"),
                        None => "size unknown".into(),
                    }
                ));
                IterMethod::NestedScan
            }
            _ => IterMethod::NestedScan,
        };
        if method.as_ref() != Some(&choice) {
            changed += 1;
        }
        if let Some(Stmt::Loop(ol)) = out.stmt_mut(&path) {
            if let Header::Forelem { method, .. } = &mut ol.header {
                *method = Some(choice);
            }
        }
    }
    if evidence.is_empty() {
        evidence.push("no filtered inner loop; every loop scans".into());
    }
    (out, PassReport::applied(PASS, evidence, changed))
}
