use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;

/// How a statement writes a name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum WriteKind {
    /// `acc += e`: commutes with other accumulations into the same name.
    Accumulate,
    /// `R += (...)`: commutes with other unions into the same result.
    Union,
    /// Assignments and merges: order-sensitive.
    Overwrite,
}

/// Names read and written by a statement subtree, loop headers included.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Effects {
    pub reads: BTreeSet<String>,
    pub writes: BTreeMap<String, BTreeSet<WriteKind>>,
}

impl Effects {
    pub fn of(s: &Stmt) -> Effects {
        let mut e = Effects::default();
        s.walk(&mut |st| e.add_own(st));
        e
    }

    pub fn of_all(stmts: &[Stmt]) -> Effects {
        let mut e = Effects::default();
        for s in stmts {
            s.walk(&mut |st| e.add_own(st));
        }
        e
    }

    fn add_own(&mut self, s: &Stmt) {
        for x in s.own_exprs() {
            expr_reads(x, &mut self.reads);
        }
        match s {
            Stmt::Loop(l) => match &l.header {
                Header::Forelem { domain, .. } => {
                    self.reads.insert(domain.set.clone());
                }
                Header::Values { set, .. } => {
                    self.reads.insert(set.clone());
                }
                Header::Range { .. } => {}
            },
            Stmt::Accumulate { target, .. } => self.write(&target.name, WriteKind::Accumulate),
            Stmt::Assign { target, .. } => self.write(&target.name, WriteKind::Overwrite),
            Stmt::Union { target, .. } => self.write(&target.name, WriteKind::Union),
            Stmt::Merge { target } => self.write(target, WriteKind::Overwrite),
        }
    }

    fn write(&mut self, name: &str, kind: WriteKind) {
        self.writes.entry(name.into()).or_default().insert(kind);
    }

    pub fn writes_name(&self, name: &str) -> bool {
        self.writes.contains_key(name)
    }

    /// Whether running `self` and `other` in either order can differ.
    pub fn conflicts(&self, other: &Effects) -> bool {
        if self.writes.keys().any(|w| other.reads.contains(w)) || other.writes.keys().any(|w| self.reads.contains(w)) {
            return true;
        }
        self.writes.iter().any(|(name, kinds)| match other.writes.get(name) {
            None => false,
            Some(ok) => {
                let all: BTreeSet<_> = kinds.union(ok).collect();
                all.len() != 1 || all.contains(&WriteKind::Overwrite)
            }
        })
    }
}

/// Accumulator and result names read by an expression.
pub fn expr_reads(e: &Expr, out: &mut BTreeSet<String>) {
    e.visit(&mut |x| match x {
        Expr::Acc(r) => {
            out.insert(r.name.clone());
        }
        Expr::SumWorkers { name, .. } => {
            out.insert(name.clone());
        }
        _ => {}
    });
}

/// Writers and readers of every name, by statement path.
#[derive(Debug, Clone, Default)]
pub struct DefUse {
    pub writes: BTreeMap<String, Vec<StmtPath>>,
    pub reads: BTreeMap<String, Vec<StmtPath>>,
}

impl DefUse {
    pub fn of(p: &Program) -> DefUse {
        let mut du = DefUse::default();
        for path in p.paths() {
            let s = p.stmt(&path).expect("path from paths()");
            let mut own = Effects::default();
            own.add_own(s);
            for r in own.reads {
                du.reads.entry(r).or_default().push(path.clone());
            }
            for w in own.writes.into_keys() {
                du.writes.entry(w).or_default().push(path.clone());
            }
        }
        du
    }

    pub fn writers(&self, name: &str) -> &[StmtPath] {
        self.writes.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn readers(&self, name: &str) -> &[StmtPath] {
        self.reads.get(name).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Names whose values can reach an output.
pub fn live_names(p: &Program) -> BTreeSet<String> {
    let mut live: BTreeSet<String> = p.outputs().map(|r| r.name.clone()).collect();
    let paths = p.paths();
    loop {
        let before = live.len();
        for path in &paths {
            let s = p.stmt(path).expect("valid path");
            let mut own = Effects::default();
            own.add_own(s);
            if own.writes.keys().any(|w| live.contains(w)) {
                live.extend(own.reads);
                for depth in 1..path.len() {
                    let mut hdr = Effects::default();
                    hdr.add_own(p.stmt(&path[..depth]).expect("ancestor"));
                    live.extend(hdr.reads);
                }
            }
        }
        if live.len() == before {
            return live;
        }
    }
}

/// Maximal statement subtrees that contribute nothing to any output.
pub fn dead_statements(p: &Program) -> Vec<StmtPath> {
    let live = live_names(p);
    let mut out = Vec::new();
    fn go(body: &[Stmt], prefix: &mut StmtPath, live: &BTreeSet<String>, out: &mut Vec<StmtPath>) {
        for (i, s) in body.iter().enumerate() {
            prefix.push(i);
            let eff = Effects::of(s);
            if !eff.writes.keys().any(|w| live.contains(w)) {
                out.push(prefix.clone());
            } else if let Stmt::Loop(l) = s {
                go(&l.body, prefix, live, out);
            }
            prefix.pop();
        }
    }
    go(&p.body, &mut Vec::new(), &live, &mut out);
    out
}
