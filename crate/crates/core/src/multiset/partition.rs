use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::{Multiset, Value};
use crate::error::{Error, Result};

/// The set of values of `field` found in `base`.
pub fn value_range(base: &Multiset, field: &str) -> Result<BTreeSet<Value>> {
    let idx = base.schema().require(field)?;
    Ok(base.rows().iter().map(|r| r.get(idx).clone()).collect())
}

/// A split of a field's value set into `n` disjoint segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueRangePartition {
    field: String,
    segments: Vec<Vec<Value>>,
    lookup: BTreeMap<Value, usize>,
}

impl ValueRangePartition {
    pub fn field(&self) -> &str {
        &self.field
    }

    pub fn segments(&self) -> &[Vec<Value>] {
        &self.segments
    }

    pub fn n(&self) -> usize {
        self.segments.len()
    }

    pub fn segment(&self, index: usize) -> &[Value] {
        &self.segments[index]
    }

    /// Segment holding `value`, if the value is part of the partitioned set.
    pub fn segment_of(&self, value: &Value) -> Option<usize> {
        self.lookup.get(value).copied()
    }

    /// True when some segment is empty, which only happens when there are
    /// fewer distinct values than segments.
    pub fn has_empty_segments(&self) -> bool {
        self.segments.iter().any(|s| s.is_empty())
    }

    pub(crate) fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = field.into();
        self
    }
}

/// Splits `values` into `n` contiguous blocks of the sorted value order.
/// Block sizes differ by at most one; the leading blocks take the remainder.
pub fn partition_values(values: &BTreeSet<Value>, n: usize) -> Result<ValueRangePartition> {
    if n == 0 {
        return Err(Error::Argument("partition count must be at least 1".into()));
    }
    let base = values.len() / n;
    let extra = values.len() % n;
    let mut iter = values.iter();
    let mut segments = Vec::with_capacity(n);
    let mut lookup = BTreeMap::new();
    for seg in 0..n {
        let size = base + usize::from(seg < extra);
        let block: Vec<Value> = iter.by_ref().take(size).cloned().collect();
        for v in &block {
            lookup.insert(v.clone(), seg);
        }
        segments.push(block);
    }
    Ok(ValueRangePartition {
        field: String::new(),
        segments,
        lookup,
    })
}

/// Contiguous block `index` of `0..len` split `n` ways, sizes differing by at most one.
pub(crate) fn block_bounds(len: usize, n: usize, index: usize) -> (usize, usize) {
    let base = len / n;
    let extra = len % n;
    let start = index * base + index.min(extra);
    let size = base + usize::from(index < extra);
    (start, start + size)
}


impl ValueRangePartition {
    /// Value-range partition of `field` over `base` into `n` segments.
    pub fn of_field(base: &Multiset, field: &str, n: usize) -> Result<ValueRangePartition> {
        Ok(partition_values(&value_range(base, field)?, n)?.with_field(field))
    }
}
