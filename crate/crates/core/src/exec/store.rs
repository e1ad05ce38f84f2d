//! Accumulator and result state, with overlays for chunks whose effects must
//! stay private until the scheduler reports them complete.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use hashbrown::HashMap;

use super::compile::Compiled;
use crate::ir::AccType;
use crate::multiset::{Tuple, Value};

#[derive(Debug, Clone, Default)]
pub(crate) struct AccSlot {
    /// Set when the slot was reset in this layer, hiding the layer below.
    pub cleared: bool,
    pub scalar: Option<Value>,
    pub cells: HashMap<Value, Value>,
}

impl AccSlot {
    fn get(&self, key: Option<&Value>) -> Option<&Value> {
        match key {
            None => self.scalar.as_ref(),
            Some(k) => self.cells.get(k),
        }
    }

    fn reset(&mut self) {
        self.cleared = true;
        self.scalar = None;
        self.cells.clear();
    }

    /// Applies a newer layer on top of this one.
    fn overlay(&mut self, top: AccSlot) {
        if top.cleared {
            self.scalar = None;
            self.cells.clear();
        }
        if top.scalar.is_some() {
            self.scalar = top.scalar;
        }
        self.cells.extend(top.cells);
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct AccState {
    pub shared: AccSlot,
    pub workers: BTreeMap<i64, AccSlot>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct ResState {
    pub rows: Vec<Tuple>,
    pub workers: BTreeMap<i64, Vec<Tuple>>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Store {
    pub accs: Vec<AccState>,
    pub results: Vec<ResState>,
}

impl Store {
    pub fn shaped(c: &Compiled<'_>) -> Store {
        Store {
            accs: c.accs.iter().map(|_| AccState::default()).collect(),
            results: c.results.iter().map(|_| ResState::default()).collect(),
        }
    }

    fn slot(&self, acc: usize, worker: Option<i64>) -> Option<&AccSlot> {
        let a = &self.accs[acc];
        match worker {
            None => Some(&a.shared),
            Some(k) => a.workers.get(&k),
        }
    }

    pub fn slot_mut(&mut self, acc: usize, worker: Option<i64>) -> &mut AccSlot {
        let a = &mut self.accs[acc];
        match worker {
            None => &mut a.shared,
            Some(k) => a.workers.entry(k).or_default(),
        }
    }

    pub fn reset(&mut self, acc: usize, worker: Option<i64>) {
        self.slot_mut(acc, worker).reset();
    }

    /// Folds a committed chunk overlay into this store.
    pub fn commit(&mut self, top: Store) {
        for (mine, theirs) in self.accs.iter_mut().zip(top.accs) {
            mine.shared.overlay(theirs.shared);
            for (k, slot) in theirs.workers {
                mine.workers.entry(k).or_default().overlay(slot);
            }
        }
        for (mine, theirs) in self.results.iter_mut().zip(top.results) {
            mine.rows.extend(theirs.rows);
            for (k, rows) in theirs.workers {
                mine.workers.entry(k).or_default().extend(rows);
            }
        }
    }
}

/// The store being written plus, inside a chunk, the committed state below it.
pub(crate) struct Mem<'s> {
    pub base: Option<&'s Store>,
    pub cur: &'s mut Store,
}

pub(crate) fn zero(ty: AccType) -> Value {
    match ty {
        AccType::Int => Value::Int(0),
        AccType::Float => Value::Float(0.0),
    }
}

impl Mem<'_> {
    /// Value of one accumulator cell; unwritten cells read as zero.
    pub fn read(&self, acc: usize, ty: AccType, worker: Option<i64>, key: Option<&Value>) -> Value {
        if let Some(top) = self.cur.slot(acc, worker) {
            if let Some(v) = top.get(key) {
                return v.clone();
            }
            if top.cleared {
                return zero(ty);
            }
        }
        self.base
            .and_then(|b| b.slot(acc, worker))
            .and_then(|s| s.get(key))
            .cloned()
            .unwrap_or_else(|| zero(ty))
    }

    /// Worker indices that have a slot for `acc` in either layer, ascending.
    pub fn worker_ids(&self, acc: usize) -> BTreeSet<i64> {
        let mut ids: BTreeSet<i64> = self.cur.accs[acc].workers.keys().copied().collect();
        if let Some(b) = self.base {
            ids.extend(b.accs[acc].workers.keys().copied());
        }
        ids
    }

    pub fn result_len(&self, res: usize) -> usize {
        self.base.map_or(0, |b| b.results[res].rows.len()) + self.cur.results[res].rows.len()
    }

    pub fn result_row(&self, res: usize, h: usize) -> &Tuple {
        let below = self.base.map_or(0, |b| b.results[res].rows.len());
        if h < below {
            &self.base.unwrap().results[res].rows[h]
        } else {
            &self.cur.results[res].rows[h - below]
        }
    }
}
