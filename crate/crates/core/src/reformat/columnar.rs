use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::Dictionary;
use crate::error::{Error, Result};
use crate::multiset::{FieldType, Multiset, Schema, Tuple, Value};

/// Requested encoding for one column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Plain,
    Dict,
    Range,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnEncoding {
    Plain,
    DictKeys(Dictionary),
    /// The column is exactly `lo, lo + step, ..., hi` in row order.
    RangeDescriptor { lo: i64, hi: i64, step: i64 },
}

/// Stored values of a column. Range-described columns store nothing.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Int(Vec<i64>),
    Str(Vec<String>),
    Float(Vec<f64>),
    Described,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    /// Logical type, before encoding.
    pub ty: FieldType,
    pub encoding: ColumnEncoding,
    pub data: ColumnData,
}

/// A requested encoding that could not be used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fallback {
    pub field: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnarTable {
    name: String,
    rows: usize,
    columns: Vec<Column>,
}

fn progression(v: &[i64]) -> Option<(i64, i64, i64)> {
    match v {
        [] => None,
        [x] => Some((*x, *x, 1)),
        [a, b, ..] => {
            let step = b.checked_sub(*a)?;
            if step == 0 {
                return None;
            }
            v.windows(2)
                .all(|w| w[1].checked_sub(w[0]) == Some(step))
                .then(|| (*a, *v.last().expect("non-empty"), step))
        }
    }
}

/// Splits `m` into columns. Fields not listed in `encodings` are stored plain.
/// A range descriptor is only used when the column, in row order, is an exact
/// arithmetic progression; otherwise the column is stored plain and a
/// [`Fallback`] is reported.
pub fn to_columnar(m: &Multiset, encodings: &[(&str, Encoding)]) -> Result<(ColumnarTable, Vec<Fallback>)> {
    for (f, _) in encodings {
        m.schema().require(f)?;
    }
    let mut fallbacks = Vec::new();
    let mut columns = Vec::new();
    for (i, field) in m.schema().fields().iter().enumerate() {
        let enc = encodings
            .iter()
            .rev()
            .find(|(f, _)| *f == field.name)
            .map(|(_, e)| *e)
            .unwrap_or(Encoding::Plain);
        let cells = m.rows().iter().map(|r| r.get(i));
        let plain = match field.ty {
            FieldType::Int => ColumnData::Int(cells.clone().map(|v| v.as_int().expect("int")).collect()),
            FieldType::Str => ColumnData::Str(cells.clone().map(|v| String::from(v.as_str().expect("str"))).collect()),
            FieldType::Float => ColumnData::Float(cells.clone().map(|v| v.as_f64().expect("float")).collect()),
        };
        let (encoding, data) = match (enc, field.ty) {
            (Encoding::Plain, _) => (ColumnEncoding::Plain, plain),
            (Encoding::Dict, FieldType::Str) => {
                let mut d = Dictionary::new(field.name.clone());
                let keys = cells.map(|v| d.intern(v.as_str().expect("str"))).collect();
                (ColumnEncoding::DictKeys(d), ColumnData::Int(keys))
            }
            (Encoding::Range, FieldType::Int) => {
                let ColumnData::Int(vals) = &plain else { unreachable!() };
                match progression(vals) {
                    Some((lo, hi, step)) => (ColumnEncoding::RangeDescriptor { lo, hi, step }, ColumnData::Described),
                    None => {
                        fallbacks.push(Fallback {
                            field: field.name.clone(),
                            reason: String::from("values are not an arithmetic progression in row order"),
                        });
                        (ColumnEncoding::Plain, plain)
                    }
                }
            }
            (e, ty) => {
                return Err(Error::Type(format!(
                    "{}.{}: {e:?} encoding does not apply to {ty} fields",
                    m.name(),
                    field.name
                )))
            }
        };
        columns.push(Column {
            name: field.name.clone(),
            ty: field.ty,
            encoding,
            data,
        });
    }
    Ok((
        ColumnarTable {
            name: m.name().into(),
            rows: m.len(),
            columns,
        },
        fallbacks,
    ))
}

impl ColumnarTable {
    /// Assembles a table from stored columns, checking lengths and encodings.
    pub fn new(name: impl Into<String>, rows: usize, columns: Vec<Column>) -> Result<ColumnarTable> {
        let name = name.into();
        for c in &columns {
            let len = match (&c.encoding, &c.data, c.ty) {
                (ColumnEncoding::Plain, ColumnData::Int(v), FieldType::Int) => v.len(),
                (ColumnEncoding::Plain, ColumnData::Str(v), FieldType::Str) => v.len(),
                (ColumnEncoding::Plain, ColumnData::Float(v), FieldType::Float) => v.len(),
                (ColumnEncoding::DictKeys(d), ColumnData::Int(v), FieldType::Str) => {
                    if let Some(k) = v.iter().find(|k| d.value(**k).is_none()) {
                        return Err(Error::Schema(format!("{name}.{}: key {k} outside dictionary", c.name)));
                    }
                    v.len()
                }
                (ColumnEncoding::RangeDescriptor { lo, hi, step }, ColumnData::Described, FieldType::Int) => {
                    if *step == 0 || (hi - lo) % step != 0 || (hi - lo) / step < 0 {
                        return Err(Error::Schema(format!("{name}.{}: malformed range descriptor", c.name)));
                    }
                    ((hi - lo) / step + 1) as usize
                }
                _ => return Err(Error::Schema(format!("{name}.{}: data does not match encoding", c.name))),
            };
            if len != rows {
                return Err(Error::Schema(format!(
                    "{name}.{}: {len} values for {rows} rows",
                    c.name
                )));
            }
        }
        Schema::new(columns.iter().map(|c| (c.name.clone(), c.ty)))?;
        Ok(ColumnarTable { name, rows, columns })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn logical_schema(&self) -> Schema {
        Schema::new(self.columns.iter().map(|c| (c.name.clone(), c.ty))).expect("checked on construction")
    }

    fn stored_value(c: &Column, row: usize) -> Value {
        match (&c.data, &c.encoding) {
            (ColumnData::Int(v), _) => Value::Int(v[row]),
            (ColumnData::Str(v), _) => Value::Str(v[row].clone()),
            (ColumnData::Float(v), _) => Value::Float(v[row]),
            (ColumnData::Described, ColumnEncoding::RangeDescriptor { lo, step, .. }) => {
                Value::Int(lo + step * row as i64)
            }
            (ColumnData::Described, _) => unreachable!("checked on construction"),
        }
    }

    /// Row form with every encoding undone.
    pub fn to_multiset(&self) -> Multiset {
        let mut m = Multiset::new(self.name.clone(), self.logical_schema());
        for r in 0..self.rows {
            let row = self
                .columns
                .iter()
                .map(|c| match (&c.encoding, Self::stored_value(c, r)) {
                    (ColumnEncoding::DictKeys(d), Value::Int(k)) => {
                        Value::Str(d.value(k).expect("checked on construction").into())
                    }
                    (_, v) => v,
                })
                .collect();
            m.push_unchecked(Tuple(row));
        }
        m
    }

    /// Row form as the executor sees it: dictionary fields stay integer keys.
    pub fn to_stored(&self) -> (Multiset, Vec<Dictionary>) {
        let mut schema = Schema::default();
        let mut dicts = Vec::new();
        for c in &self.columns {
            let ty = match &c.encoding {
                ColumnEncoding::DictKeys(d) => {
                    dicts.push(d.clone());
                    FieldType::Int
                }
                _ => c.ty,
            };
            schema.push(c.name.clone(), ty).expect("unique names");
        }
        let mut m = Multiset::new(self.name.clone(), schema);
        for r in 0..self.rows {
            m.push_unchecked(Tuple(self.columns.iter().map(|c| Self::stored_value(c, r)).collect()));
        }
        (m, dicts)
    }
}
