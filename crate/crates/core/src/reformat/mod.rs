//! Physical data reformatting: dictionary encoding of string fields,
//! columnar layout with range-descriptor compression, and removal of
//! fields a program never reads.

mod adapt;
mod columnar;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::database::Database;
use crate::error::{Error, Result};
use crate::multiset::{FieldType, Multiset, Tuple, Value};

pub use adapt::{accessed_fields, adapt_program, auto_reformat_fields, drop_unused_fields, DropReport, OutputDecoding};
pub use columnar::{to_columnar, Column, ColumnData, ColumnEncoding, ColumnarTable, Encoding, Fallback};

/// Dense integer keys for the distinct strings of one field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dictionary {
    field: String,
    forward: HashMap<String, i64>,
    reverse: Vec<String>,
}

impl Dictionary {
    pub fn new(field: impl Into<String>) -> Dictionary {
        Dictionary {
            field: field.into(),
            forward: HashMap::new(),
            reverse: Vec::new(),
        }
    }

    /// Rebuilds a dictionary from its key-ordered value array.
    pub fn from_reverse(field: impl Into<String>, reverse: Vec<String>) -> Result<Dictionary> {
        let mut d = Dictionary::new(field);
        for s in reverse {
            if d.forward.contains_key(&s) {
                return Err(Error::Schema(format!("dictionary for `{}` repeats `{s}`", d.field)));
            }
            d.intern(&s);
        }
        Ok(d)
    }

    pub fn field(&self) -> &str {
        &self.field
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }

    /// Key of `s`, assigning the next key on first sight.
    pub fn intern(&mut self, s: &str) -> i64 {
        if let Some(&k) = self.forward.get(s) {
            return k;
        }
        let k = self.reverse.len() as i64;
        self.forward.insert(s.into(), k);
        self.reverse.push(s.into());
        k
    }

    pub fn key(&self, s: &str) -> Option<i64> {
        self.forward.get(s).copied()
    }

    pub fn value(&self, key: i64) -> Option<&str> {
        usize::try_from(key).ok().and_then(|k| self.reverse.get(k)).map(String::as_str)
    }

    /// Values in key order.
    pub fn reverse(&self) -> &[String] {
        &self.reverse
    }
}

/// Replaces the string field `field` of `table` by integer keys assigned in
/// first-occurrence order, returning the new database and the dictionary.
pub fn dictionary_encode(db: &Database, table: &str, field: &str) -> Result<(Database, Dictionary)> {
    let m = db.table(table)?;
    let idx = m.schema().require(field)?;
    let ty = m.schema().fields()[idx].ty;
    if ty != FieldType::Str {
        return Err(Error::Type(format!("{table}.{field} is {ty}, only string fields can be dictionary encoded")));
    }
    let mut dict = Dictionary::new(field);
    let (name, mut schema, rows) = m.clone().into_parts();
    schema.set_type(idx, FieldType::Int);
    let mut out = Multiset::new(name, schema);
    for mut row in rows {
        let key = dict.intern(row.0[idx].as_str().expect("string field"));
        row.0[idx] = Value::Int(key);
        out.push_unchecked(row);
    }
    let mut db2 = db.clone();
    db2.replace(out);
    db2.set_dictionary(table, dict.clone());
    Ok((db2, dict))
}

/// Maps dictionary keys in field `index` of `m` back to strings.
pub fn decode_field(m: &Multiset, index: usize, dict: &Dictionary) -> Result<Multiset> {
    let (name, mut schema, rows) = m.clone().into_parts();
    if schema.fields().get(index).map(|f| f.ty) != Some(FieldType::Int) {
        return Err(Error::Type(format!("{name}: field {index} does not hold dictionary keys")));
    }
    schema.set_type(index, FieldType::Str);
    let mut out = Multiset::new(name, schema);
    for mut row in rows {
        let k = row.0[index].as_int().expect("int field");
        let s = dict
            .value(k)
            .ok_or_else(|| Error::Eval(format!("key {k} is not in the dictionary for `{}`", dict.field())))?;
        row.0[index] = Value::Str(s.into());
        out.push_unchecked(row);
    }
    Ok(out)
}

/// The logical (string-valued) form of a stored table.
pub fn decode_table(db: &Database, table: &str) -> Result<Multiset> {
    let mut m = db.table(table)?.clone();
    let names: Vec<String> = m.schema().names().map(String::from).collect();
    for (i, f) in names.iter().enumerate() {
        if let Some(d) = db.dictionary(table, f) {
            m = decode_field(&m, i, d)?;
        }
    }
    Ok(m)
}

/// A database with every dictionary-encoded field decoded.
pub fn decode_database(db: &Database) -> Result<Database> {
    let mut out = Database::new();
    for t in db.tables() {
        out.insert(decode_table(db, t.name())?)?;
        if let Some(p) = db.distribution(t.name()) {
            if db.dictionary(t.name(), p.field()).is_none() {
                out.set_distribution(t.name(), p.clone())?;
            }
        }
    }
    Ok(out)
}

/// Projects `m` onto the named fields, in schema order.
pub(crate) fn project(m: &Multiset, keep: &[&str]) -> Multiset {
    let (name, mut schema, rows) = m.clone().into_parts();
    let drop: Vec<usize> = (0..schema.len())
        .rev()
        .filter(|&i| !keep.contains(&schema.fields()[i].name.as_str()))
        .collect();
    for &i in &drop {
        schema.remove(i);
    }
    let mut out = Multiset::new(name, schema);
    for mut row in rows {
        for &i in &drop {
            row.0.remove(i);
        }
        out.push_unchecked(Tuple(row.0));
    }
    out
}
