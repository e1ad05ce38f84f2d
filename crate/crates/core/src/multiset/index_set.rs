use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use super::partition::block_bounds;
use super::{Multiset, Value, ValueRangePartition};
use crate::error::{Error, Result};

/// Restriction of an index set to one partition.
#[derive(Debug, Clone, Copy)]
pub enum SetPartition<'a> {
    /// Block `index` (0-based) of the enumerated sequence split `n` ways.
    Direct { n: usize, index: usize },
    /// Rows whose partition field value falls in segment `index`.
    Indirect {
        partition: &'a ValueRangePartition,
        index: usize,
    },
}

/// Which tuples of a base multiset an iteration visits.
#[derive(Debug, Clone)]
pub struct IndexSet<'a> {
    base: &'a Multiset,
    filter: Option<(usize, Value)>,
    distinct_on: Option<usize>,
    partition: Option<SetPartition<'a>>,
}

impl<'a> IndexSet<'a> {
    /// Every row of `base` (the `pA` index set).
    pub fn all(base: &'a Multiset) -> Self {
        IndexSet {
            base,
            filter: None,
            distinct_on: None,
            partition: None,
        }
    }

    /// Rows whose `field` equals `value` (`pA.field[value]`).
    pub fn filter(mut self, field: &str, value: Value) -> Result<Self> {
        if self.distinct_on.is_some() {
            return Err(Error::Argument("filter and distinct are mutually exclusive".into()));
        }
        let idx = self.base.schema().require(field)?;
        let declared = self.base.schema().fields()[idx].ty;
        if value.field_type() != declared {
            return Err(Error::ty(format!(
                "filter on {}.{field} ({declared}) with {} value",
                self.base.name(),
                value.field_type()
            )));
        }
        self.filter = Some((idx, value));
        Ok(self)
    }

    /// One representative row per distinct value of `field` (`pA.distinct(field)`).
    pub fn distinct(mut self, field: &str) -> Result<Self> {
        if self.filter.is_some() {
            return Err(Error::Argument("filter and distinct are mutually exclusive".into()));
        }
        self.distinct_on = Some(self.base.schema().require(field)?);
        Ok(self)
    }

    pub fn partition(mut self, partition: SetPartition<'a>) -> Result<Self> {
        match partition {
            SetPartition::Direct { n, index } if n == 0 || index >= n => {
                return Err(Error::Argument(format!("block {index} of {n} out of range")));
            }
            SetPartition::Indirect { partition: p, index } => {
                self.base.schema().require(p.field())?;
                if index >= p.n() {
                    return Err(Error::Argument(format!(
                        "segment {index} of {} out of range",
                        p.n()
                    )));
                }
            }
            _ => {}
        }
        self.partition = Some(partition);
        Ok(self)
    }

    pub fn base(&self) -> &'a Multiset {
        self.base
    }
}

/// Row handles visited by `set`, in row order.
pub fn enumerate(set: &IndexSet<'_>) -> Result<Vec<usize>> {
    let base = set.base;
    let mut handles: Vec<usize> = match (&set.filter, set.distinct_on) {
        (Some((idx, value)), None) => {
            let mut out = Vec::new();
            for (h, row) in base.rows().iter().enumerate() {
                if row.get(*idx).try_eq(value)? {
                    out.push(h);
                }
            }
            out
        }
        (None, Some(idx)) => {
            let mut seen = BTreeSet::new();
            base.rows()
                .iter()
                .enumerate()
                .filter(|(_, row)| seen.insert(row.get(idx)))
                .map(|(h, _)| h)
                .collect()
        }
        (None, None) => (0..base.len()).collect(),
        (Some(_), Some(_)) => unreachable!("rejected by the builder"),
    };
    match set.partition {
        None => {}
        Some(SetPartition::Direct { n, index }) => {
            let (start, end) = block_bounds(handles.len(), n, index);
            handles = handles[start..end].to_vec();
        }
        Some(SetPartition::Indirect { partition, index }) => {
            let idx = base.schema().require(partition.field())?;
            handles.retain(|&h| partition.segment_of(base.row(h).get(idx)) == Some(index));
        }
    }
    Ok(handles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiset::test_support::rows;
    use crate::multiset::FieldType;
    use alloc::vec;
    use proptest::prelude::*;

    fn b() -> Multiset {
        rows(
            "B",
            &[("id", FieldType::Int), ("f", FieldType::Str)],
            vec![
                vec![7.into(), "a".into()],
                vec![3.into(), "b".into()],
                vec![7.into(), "c".into()],
            ],
        )
    }

    #[test]
    fn filter_selects_matching_rows() {
        let b = b();
        let set = IndexSet::all(&b).filter("id", Value::Int(7)).unwrap();
        assert_eq!(enumerate(&set).unwrap(), vec![0, 2]);
    }

    #[test]
    fn distinct_yields_one_row_per_value() {
        let access = rows(
            "access",
            &[("url", FieldType::Str)],
            vec![vec!["u1".into()], vec!["u1".into()], vec!["u2".into()]],
        );
        let set = IndexSet::all(&access).distinct("url").unwrap();
        assert_eq!(enumerate(&set).unwrap(), vec![0, 2]);
    }

    #[test]
    fn empty_base_enumerates_nothing() {
        let a = rows("A", &[("x", FieldType::Int)], vec![]);
        assert!(enumerate(&IndexSet::all(&a)).unwrap().is_empty());
    }

    #[test]
    fn errors() {
        let b = b();
        assert!(matches!(IndexSet::all(&b).filter("zz", Value::Int(1)), Err(Error::Schema(_))));
        assert!(matches!(IndexSet::all(&b).filter("id", "7".into()), Err(Error::Type(_))));
        assert!(IndexSet::all(&b).distinct("id").unwrap().filter("id", 1.into()).is_err());
    }

    #[test]
    fn indirect_partition_keeps_segment_rows() {
        let b = b();
        let p = ValueRangePartition::of_field(&b, "id", 2).unwrap();
        let seg0 = IndexSet::all(&b).partition(SetPartition::Indirect { partition: &p, index: 0 }).unwrap();
        let seg1 = IndexSet::all(&b).partition(SetPartition::Indirect { partition: &p, index: 1 }).unwrap();
        assert_eq!(enumerate(&seg0).unwrap(), vec![1]);
        assert_eq!(enumerate(&seg1).unwrap(), vec![0, 2]);
    }

    proptest! {
        #[test]
        fn filtered_enumeration_matches_full_scan(vals in proptest::collection::vec(0i64..6, 0..60)) {
            let m = rows("m", &[("f", FieldType::Int)], vals.iter().map(|v| vec![Value::Int(*v)]).collect());
            for v in -1..7 {
                let got = enumerate(&IndexSet::all(&m).filter("f", Value::Int(v)).unwrap()).unwrap();
                let expected: Vec<usize> = vals.iter().enumerate().filter(|(_, x)| **x == v).map(|(i, _)| i).collect();
                prop_assert_eq!(got, expected);
            }
        }

        #[test]
        fn direct_blocks_cover_exactly_once(len in 0usize..80, n in 1usize..10) {
            let m = rows("m", &[("f", FieldType::Int)], (0..len as i64).map(|v| vec![Value::Int(v)]).collect());
            let mut all = vec![];
            for index in 0..n {
                all.extend(enumerate(&IndexSet::all(&m).partition(SetPartition::Direct { n, index }).unwrap()).unwrap());
            }
            prop_assert_eq!(all, (0..len).collect::<Vec<_>>());
        }
    }
}
