//! A named collection of multisets plus layout metadata.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};

use crate::error::{Error, Result};
use crate::multiset::{FieldType, Multiset, Schema, ValueRangePartition};
use crate::reformat::Dictionary;

/// Table schemas by name, as seen by the SQL frontend.
pub type Catalog = BTreeMap<String, Schema>;

#[derive(Debug, Clone, Default)]
pub struct Database {
    tables: BTreeMap<String, Multiset>,
    distributions: BTreeMap<String, ValueRangePartition>,
    dictionaries: BTreeMap<(String, String), Dictionary>,
}

impl Database {
    pub fn new() -> Database {
        Database::default()
    }

    pub fn with_tables(tables: impl IntoIterator<Item = Multiset>) -> Result<Database> {
        let mut db = Database::new();
        for t in tables {
            db.insert(t)?;
        }
        Ok(db)
    }

    pub fn insert(&mut self, table: Multiset) -> Result<()> {
        if self.tables.contains_key(table.name()) {
            return Err(Error::schema(format!("duplicate table `{}`", table.name())));
        }
        self.tables.insert(table.name().to_string(), table);
        Ok(())
    }

    /// Replaces (or adds) a table, dropping layout metadata that no longer applies.
    pub fn replace(&mut self, table: Multiset) {
        let name = table.name().to_string();
        self.dictionaries.retain(|(t, f), _| {
            t != &name || table.schema().field(f).is_some_and(|fd| fd.ty == FieldType::Int)
        });
        if let Some(d) = self.distributions.get(&name) {
            if table.schema().index_of(d.field()).is_none() {
                self.distributions.remove(&name);
            }
        }
        self.tables.insert(name, table);
    }

    pub fn get(&self, name: &str) -> Option<&Multiset> {
        self.tables.get(name)
    }

    pub fn table(&self, name: &str) -> Result<&Multiset> {
        self.get(name)
            .ok_or_else(|| Error::schema(format!("unknown table `{name}`")))
    }

    pub fn tables(&self) -> impl Iterator<Item = &Multiset> {
        self.tables.values()
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Records that `table` is already distributed by `partition`.
    pub fn set_distribution(&mut self, table: &str, partition: ValueRangePartition) -> Result<()> {
        self.table(table)?.schema().require(partition.field())?;
        self.distributions.insert(table.into(), partition);
        Ok(())
    }

    pub fn distribution(&self, table: &str) -> Option<&ValueRangePartition> {
        self.distributions.get(table)
    }

    pub fn set_dictionary(&mut self, table: &str, dict: Dictionary) {
        self.dictionaries
            .insert((table.into(), dict.field().into()), dict);
    }

    pub fn dictionary(&self, table: &str, field: &str) -> Option<&Dictionary> {
        self.dictionaries.get(&(table.into(), field.into()))
    }

    pub fn dictionaries(&self) -> impl Iterator<Item = (&str, &Dictionary)> {
        self.dictionaries.iter().map(|((t, _), d)| (t.as_str(), d))
    }

    pub fn has_dictionaries(&self) -> bool {
        !self.dictionaries.is_empty()
    }

    /// Schema of `table` with dictionary-encoded fields reported as strings.
    pub fn logical_schema(&self, table: &str) -> Result<Schema> {
        let mut schema = self.table(table)?.schema().clone();
        for i in 0..schema.len() {
            let name = schema.fields()[i].name.clone();
            if self.dictionary(table, &name).is_some() {
                schema.set_type(i, FieldType::Str);
            }
        }
        Ok(schema)
    }

    pub fn catalog(&self) -> Catalog {
        self.tables
            .keys()
            .map(|name| (name.clone(), self.logical_schema(name).expect("table exists")))
            .collect()
    }
}
