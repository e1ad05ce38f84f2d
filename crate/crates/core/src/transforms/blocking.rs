use alloc::format;
use alloc::string::String;
use alloc::vec;

use super::util::{describe, loop_at, path_text};
use super::PassReport;
use crate::ir::{Expr, Filter, Header, Loop, Program, Stmt, StmtPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionMode {
    /// Split the index set into `n` contiguous blocks.
    Direct,
    /// Split the value range of a field into `n` segments.
    Indirect,
}

/// Which loop to partition, and how.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    pub mode: PartitionMode,
    pub n: u32,
    /// Partitioning field; only for [`PartitionMode::Indirect`].
    pub field: Option<String>,
    pub target: StmtPath,
}

impl PartitionSpec {
    pub fn apply(&self, p: &Program) -> (Program, PassReport) {
        match (self.mode, &self.field) {
            (PartitionMode::Direct, None) => block_direct(p, &self.target, self.n),
            (PartitionMode::Indirect, Some(f)) => block_indirect(p, &self.target, f, self.n),
            (PartitionMode::Direct, Some(_)) => (p.clone(), PassReport::declined("block_direct", "direct partitioning takes no field")),
            (PartitionMode::Indirect, None) => (p.clone(), PassReport::declined("block_indirect", "indirect partitioning needs a field")),
        }
    }
}

fn target_forelem<'p>(p: &'p Program, target: &[usize], pass: &str) -> Result<&'p Loop, PassReport> {
    match loop_at(p, target) {
        Some(l @ Loop { header: Header::Forelem { .. }, .. }) => Ok(l),
        Some(l) => Err(PassReport::declined(
            pass,
            format!("statement {} (`{}`) is not a forelem loop", path_text(target), describe(&Stmt::Loop(l.clone()))),
        )),
        None => Err(PassReport::declined(pass, format!("no loop at {}", path_text(target)))),
    }
}

/// `forelem (i in pA) S` becomes `for (k = 1..n) forelem (i in p[k]A) S`.
/// A filtered domain `pA.f[v]` is blocked the same way: filtering each block
/// of `pA` still visits every matching tuple exactly once.
pub fn block_direct(p: &Program, target: &[usize], n: u32) -> (Program, PassReport) {
    const PASS: &str = "block_direct";
    let l = match target_forelem(p, target, PASS) {
        Ok(l) => l,
        Err(r) => return (p.clone(), r),
    };
    let Header::Forelem { domain, .. } = &l.header else { unreachable!() };
    if n == 0 {
        return (p.clone(), PassReport::declined(PASS, "partition count must be at least 1"));
    }
    if domain.block.is_some() {
        return (p.clone(), PassReport::declined(PASS, "loop is already blocked"));
    }
    if domain.distinct.is_some() {
        return (
            p.clone(),
            PassReport::declined(PASS, "blocks of a distinct index set could repeat a value in two blocks"),
        );
    }
    let k = p.fresh_name("k");
    let mut inner = l.clone();
    if let Header::Forelem { domain, method, .. } = &mut inner.header {
        domain.block = Some(k.clone());
        *method = None;
    }
    let evidence = vec![format!(
        "blocks p[{k}]{} for {k} = 1..{n} are disjoint and cover p{}",
        domain.set, domain.set
    )];
    let mut out = p.clone();
    *out.stmt_mut(target).expect("checked") = Stmt::Loop(Loop {
        header: Header::Range { var: k, n, parallel: false },
        body: vec![Stmt::Loop(inner)],
    });
    (out, PassReport::applied(PASS, evidence, 2))
}

/// `forelem (i in pA) S` becomes
/// `for (k = 1..n) for (l in X(A.field)[k]) forelem (i in pA.field[l]) S`.
pub fn block_indirect(p: &Program, target: &[usize], field: &str, n: u32) -> (Program, PassReport) {
    const PASS: &str = "block_indirect";
    let l = match target_forelem(p, target, PASS) {
        Ok(l) => l,
        Err(r) => return (p.clone(), r),
    };
    let Header::Forelem { domain, .. } = &l.header else { unreachable!() };
    if n == 0 {
        return (p.clone(), PassReport::declined(PASS, "partition count must be at least 1"));
    }
    if !domain.is_plain() {
        return (p.clone(), PassReport::declined(PASS, format!("domain `{domain}` is not a plain index set")));
    }
    match p.set_schema(&domain.set) {
        Some(s) if s.index_of(field).is_some() => {}
        _ => {
            return (
                p.clone(),
                PassReport::declined(PASS, format!("'{}' has no field '{field}'", domain.set)),
            )
        }
    }
    let k = p.fresh_name("k");
    let lv = p.fresh_name("l");
    let mut inner = l.clone();
    if let Header::Forelem { domain, method, .. } = &mut inner.header {
        domain.filter = Some(Filter {
            field: field.into(),
            value: Expr::Var(lv.clone()),
        });
        *method = None;
    }
    let evidence = vec![format!(
        "segments X({set}.{field})[{k}], {k} = 1..{n}, partition the values of {set}.{field}, so each tuple of p{set} is visited once",
        set = domain.set
    )];
    let mut out = p.clone();
    *out.stmt_mut(target).expect("checked") = Stmt::Loop(Loop {
        header: Header::Range {
            var: k.clone(),
            n,
            parallel: false,
        },
        body: vec![Stmt::Loop(Loop {
            header: Header::Values {
                var: lv,
                set: domain.set.clone(),
                field: field.into(),
                part: Some(k),
            },
            body: vec![Stmt::Loop(inner)],
        })],
    });
    (out, PassReport::applied(PASS, evidence, 3))
}
