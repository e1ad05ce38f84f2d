use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use hashbrown::HashMap;

use super::{Multiset, Value};
use crate::error::{Error, Result};

/// Hash index from a key field's values to the row handles holding them.
#[derive(Debug, Clone)]
pub struct HashIndex {
    base: String,
    key_field: String,
    key_index: usize,
    buckets: HashMap<Value, Vec<usize>>,
}

impl HashIndex {
    pub fn build(base: &Multiset, key_field: &str) -> Result<HashIndex> {
        let key_index = base.schema().require(key_field)?;
        let mut buckets: HashMap<Value, Vec<usize>> = HashMap::new();
        for (h, row) in base.rows().iter().enumerate() {
            buckets.entry(row.get(key_index).clone()).or_default().push(h);
        }
        Ok(HashIndex {
            base: base.name().into(),
            key_field: key_field.into(),
            key_index,
            buckets,
        })
    }

    pub fn key_field(&self) -> &str {
        &self.key_field
    }

    pub fn base_name(&self) -> &str {
        &self.base
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn key_index(&self) -> usize {
        self.key_index
    }

    /// Row handles whose key equals `key`; empty for absent keys.
    pub fn lookup(&self, key: &Value) -> &[usize] {
        self.buckets.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Like [`lookup`](Self::lookup) but rejects a key whose tag differs from the base field type.
    pub fn probe(&self, base: &Multiset, key: &Value) -> Result<&[usize]> {
        let ty = base.schema().fields()[self.key_index].ty;
        if key.field_type() != ty {
            return Err(Error::ty(format!(
                "probe of {}.{} ({ty}) with {} value",
                self.base,
                self.key_field,
                key.field_type()
            )));
        }
        Ok(self.lookup(key))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiset::test_support::rows;
    use crate::multiset::{enumerate, FieldType, IndexSet};
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn injective_key() {
        let b = rows(
            "B",
            &[("id", FieldType::Int), ("f", FieldType::Str)],
            vec![vec![1.into(), "x".into()], vec![2.into(), "y".into()]],
        );
        let idx = HashIndex::build(&b, "id").unwrap();
        assert_eq!(idx.bucket_count(), 2);
        assert_eq!(idx.lookup(&Value::Int(1)), &[0]);
        assert_eq!(idx.lookup(&Value::Int(2)), &[1]);
    }

    #[test]
    fn duplicate_keys_share_a_bucket() {
        let b = rows(
            "B",
            &[("id", FieldType::Int)],
            vec![vec![7.into()], vec![1.into()], vec![7.into()]],
        );
        let idx = HashIndex::build(&b, "id").unwrap();
        // Oracle: linear scan collecting matching rows.
        let scan: Vec<usize> = b.rows().iter().enumerate().filter(|(_, r)| r.get(0) == &Value::Int(7)).map(|(h, _)| h).collect();
        assert_eq!(idx.lookup(&Value::Int(7)), scan.as_slice());
        assert_eq!(scan.len(), 2);
    }

    #[test]
    fn empty_base_and_errors() {
        let e = rows("E", &[("id", FieldType::Int)], vec![]);
        let idx = HashIndex::build(&e, "id").unwrap();
        assert_eq!(idx.bucket_count(), 0);
        assert!(idx.lookup(&Value::Int(3)).is_empty());
        assert!(matches!(HashIndex::build(&e, "nope"), Err(Error::Schema(_))));
        assert!(matches!(idx.probe(&e, &"3".into()), Err(Error::Type(_))));
    }

    proptest! {
        #[test]
        fn buckets_partition_rows_and_agree_with_filter(vals in proptest::collection::vec(0i64..8, 0..80)) {
            let m = rows("m", &[("k", FieldType::Int)], vals.iter().map(|v| vec![Value::Int(*v)]).collect());
            let idx = HashIndex::build(&m, "k").unwrap();
            let mut seen = vec![0usize; m.len()];
            for v in -1..9 {
                let bucket = idx.lookup(&Value::Int(v));
                for &h in bucket {
                    seen[h] += 1;
                    prop_assert_eq!(m.row(h).get(0), &Value::Int(v));
                }
                let filtered = enumerate(&IndexSet::all(&m).filter("k", Value::Int(v)).unwrap()).unwrap();
                prop_assert_eq!(bucket, filtered.as_slice());
            }
            prop_assert!(seen.iter().all(|c| *c == 1));
        }
    }
}
