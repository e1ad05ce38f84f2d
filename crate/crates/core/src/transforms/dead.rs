use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::util::{describe, mentions_name, path_text};
use super::PassReport;
use crate::ir::{dead_statements, Effects, Program};

/// Removes statements whose effects reach no output, and the declarations
/// that only they used.
pub fn eliminate_dead_access(p: &Program) -> (Program, PassReport) {
    const PASS: &str = "eliminate_dead_access";
    let mut dead = dead_statements(p);
    if dead.is_empty() {
        return (p.clone(), PassReport::declined(PASS, "every statement contributes to an output"));
    }
    dead.sort();
    let mut out = p.clone();
    let mut evidence = Vec::new();
    for path in dead.iter().rev() {
        let s = p.stmt(path).expect("path from dead_statements");
        let names: Vec<String> = Effects::of(s).writes.into_keys().collect();
        evidence.push(format!(
            "removed {} `{}`: writes only {:?}, which no output depends on",
            path_text(path),
            describe(s),
            names
        ));
        let (last, _) = path.split_last().expect("non-empty path");
        out.parent_body_mut(path).expect("valid path").remove(*last);
    }
    evidence.reverse();
    let before = |n: &str| mentions_name(&p.body, n);
    let after = |n: &str| mentions_name(&out.body, n);
    let gone_results: Vec<_> = out
        .results
        .iter()
        .filter(|r| !r.output && before(&r.name) && !after(&r.name))
        .map(|r| r.name.clone())
        .collect();
    let gone_accs: Vec<_> = out
        .accs
        .iter()
        .filter(|a| before(&a.name) && !after(&a.name))
        .map(|a| a.name.clone())
        .collect();
    out.results.retain(|r| !gone_results.contains(&r.name));
    out.accs.retain(|a| !gone_accs.contains(&a.name));
    (out, PassReport::applied(PASS, evidence, dead.len()))
}
