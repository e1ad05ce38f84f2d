//! In-memory multisets of tuples, index sets over them and hash indexes.

mod hash_index;
mod index_set;
mod partition;
mod value;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

pub use hash_index::HashIndex;
pub use index_set::{enumerate, IndexSet, SetPartition};
pub use partition::{partition_values, value_range, ValueRangePartition};
pub(crate) use partition::block_bounds;
pub use value::{FieldType, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Field {
    pub name: String,
    pub ty: FieldType,
}

/// Ordered, uniquely named fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Schema {
    fields: Vec<Field>,
}

impl Schema {
    pub fn new<I, S>(fields: I) -> Result<Schema>
    where
        I: IntoIterator<Item = (S, FieldType)>,
        S: Into<String>,
    {
        let mut schema = Schema::default();
        for (name, ty) in fields {
            schema.push(name, ty)?;
        }
        Ok(schema)
    }

    pub fn push(&mut self, name: impl Into<String>, ty: FieldType) -> Result<()> {
        let name = name.into();
        if self.index_of(&name).is_some() {
            return Err(Error::schema(format!("duplicate field `{name}`")));
        }
        self.fields.push(Field { name, ty });
        Ok(())
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Index of `name`, or a schema error naming the field.
    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::schema(format!("unknown field `{name}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.fields.iter().map(|f| f.name.as_str())
    }

    pub(crate) fn set_type(&mut self, index: usize, ty: FieldType) {
        self.fields[index].ty = ty;
    }

    pub(crate) fn remove(&mut self, index: usize) {
        self.fields.remove(index);
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, field) in self.fields.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}: {}", field.name, field.ty)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Tuple(pub Vec<Value>);

impl Tuple {
    pub fn new(values: Vec<Value>) -> Tuple {
        Tuple(values)
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn get(&self, index: usize) -> &Value {
        &self.0[index]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<Value>> for Tuple {
    fn from(values: Vec<Value>) -> Self {
        Tuple(values)
    }
}

/// A named bag of tuples conforming to one schema.
///
/// Row handles are positions in `rows`; they stay stable for the lifetime
/// of the multiset because rows are only ever appended.
#[derive(Debug, Clone)]
pub struct Multiset {
    name: String,
    schema: Schema,
    rows: Vec<Tuple>,
}

impl Multiset {
    pub fn new(name: impl Into<String>, schema: Schema) -> Multiset {
        Multiset {
            name: name.into(),
            schema,
            rows: Vec::new(),
        }
    }

    pub fn from_rows(
        name: impl Into<String>,
        schema: Schema,
        rows: impl IntoIterator<Item = Tuple>,
    ) -> Result<Multiset> {
        let mut m = Multiset::new(name, schema);
        for row in rows {
            m.push(row)?;
        }
        Ok(m)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rename(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Tuple] {
        &self.rows
    }

    pub fn row(&self, handle: usize) -> &Tuple {
        &self.rows[handle]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn check_row(&self, row: &Tuple) -> Result<()> {
        if row.len() != self.schema.len() {
            return Err(Error::schema(format!(
                "{}: row arity {} does not match schema arity {}",
                self.name,
                row.len(),
                self.schema.len()
            )));
        }
        for (value, field) in row.values().iter().zip(self.schema.fields()) {
            if value.field_type() != field.ty {
                return Err(Error::ty(format!(
                    "{}.{}: expected {}, found {} value `{}`",
                    self.name,
                    field.name,
                    field.ty,
                    value.field_type(),
                    value
                )));
            }
        }
        Ok(())
    }

    pub fn push(&mut self, row: Tuple) -> Result<()> {
        self.check_row(&row)?;
        self.rows.push(row);
        Ok(())
    }

    pub(crate) fn push_unchecked(&mut self, row: Tuple) {
        self.rows.push(row);
    }

    pub(crate) fn into_parts(self) -> (String, Schema, Vec<Tuple>) {
        (self.name, self.schema, self.rows)
    }

    /// Distinct tuples with their multiplicities.
    pub fn counts(&self) -> BTreeMap<&Tuple, usize> {
        let mut counts = BTreeMap::new();
        for row in &self.rows {
            *counts.entry(row).or_insert(0) += 1;
        }
        counts
    }

    /// Bag equality of the rows, ignoring names, schemas and row order.
    pub fn same_rows(&self, other: &Multiset) -> bool {
        self.len() == other.len() && self.counts() == other.counts()
    }

    /// Bag equality where float fields may differ by `rel_tol` (relative).
    pub fn approx_same_rows(&self, other: &Multiset, rel_tol: f64) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let mut a: Vec<&Tuple> = self.rows.iter().collect();
        let mut b: Vec<&Tuple> = other.rows.iter().collect();
        a.sort();
        b.sort();
        a.iter().zip(&b).all(|(x, y)| {
            x.len() == y.len()
                && x.values().iter().zip(y.values()).all(|(u, v)| match (u, v) {
                    (Value::Float(p), Value::Float(q)) => {
                        let scale = p.abs().max(q.abs()).max(1.0);
                        (p - q).abs() <= rel_tol * scale
                    }
                    _ => u == v,
                })
        })
    }

    /// Rows sorted by all columns left to right.
    pub fn sorted_rows(&self) -> Vec<Tuple> {
        let mut rows = self.rows.clone();
        rows.sort();
        rows
    }
}

/// Two multisets are equal when schemas match and they hold the same bag of rows.
impl PartialEq for Multiset {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema && self.same_rows(other)
    }
}

impl fmt::Display for Multiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}({})", self.name, self.schema)?;
        for row in &self.rows {
            let cells: Vec<String> = row.values().iter().map(|v| v.to_string()).collect();
            writeln!(f, "  ({})", cells.join(", "))?;
        }
        Ok(())
    }
}
