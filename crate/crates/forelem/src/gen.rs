//! Seeded random databases.
//!
//! For each table, in catalog (name) order, the generator draws a row count
//! uniformly from `min_rows..=max_rows` and then a value domain size `d`
//! uniformly from `1..=max(1, rows / 4)`. Every field of the table draws its
//! values uniformly from that domain: integers `0..d`, strings `s0..s{d-1}`,
//! floats `k / 4` for `k` in `0..d`. Small domains force repeated keys so
//! grouping, joins and filters all have work to do. The random stream is
//! ChaCha8 seeded from the given `u64`.

use forelem_core::database::Catalog;
use forelem_core::{Database, FieldType, Multiset, Schema, Tuple, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenOptions {
    pub min_rows: usize,
    pub max_rows: usize,
}

impl Default for GenOptions {
    fn default() -> GenOptions {
        GenOptions {
            min_rows: 0,
            max_rows: 1000,
        }
    }
}

fn value(rng: &mut impl Rng, ty: FieldType, d: usize) -> Value {
    let k = rng.gen_range(0..d);
    match ty {
        FieldType::Int => Value::Int(k as i64),
        FieldType::Str => Value::Str(format!("s{k}")),
        FieldType::Float => Value::Float(k as f64 / 4.0),
    }
}

pub fn random_table(rng: &mut impl Rng, name: &str, schema: &Schema, opts: &GenOptions) -> Multiset {
    let rows = rng.gen_range(opts.min_rows..=opts.max_rows.max(opts.min_rows));
    let d = rng.gen_range(1..=(rows / 4).max(1));
    let mut m = Multiset::new(name, schema.clone());
    for _ in 0..rows {
        let row = schema.fields().iter().map(|f| value(rng, f.ty, d)).collect();
        m.push(Tuple(row)).expect("values match the schema");
    }
    m
}

pub fn random_database(catalog: &Catalog, seed: u64, opts: &GenOptions) -> Database {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut db = Database::new();
    for (name, schema) in catalog {
        db.insert(random_table(&mut rng, name, schema, opts))
            .expect("catalog names are unique");
    }
    db
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> Catalog {
        let mut c = Catalog::new();
        c.insert("t".into(), Schema::new([("a", FieldType::Int), ("b", FieldType::Str)]).unwrap());
        c
    }

    #[test]
    fn same_seed_same_data() {
        let opts = GenOptions::default();
        let a = random_database(&catalog(), 7, &opts);
        let b = random_database(&catalog(), 7, &opts);
        assert_eq!(a.table("t").unwrap().rows(), b.table("t").unwrap().rows());
    }

    #[test]
    fn respects_row_bounds_and_repeats_values() {
        let opts = GenOptions {
            min_rows: 200,
            max_rows: 300,
        };
        for seed in 0..10 {
            let db = random_database(&catalog(), seed, &opts);
            let t = db.table("t").unwrap();
            assert!((200..=300).contains(&t.len()));
            let distinct: std::collections::BTreeSet<_> = t.rows().iter().map(|r| r.get(0).clone()).collect();
            assert!(distinct.len() <= t.len() / 4);
        }
    }
}
