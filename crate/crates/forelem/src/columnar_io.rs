//! On-disk columnar store: a JSON manifest plus one binary file per stored
//! column. Integers and floats are little-endian 64-bit values; strings are
//! a little-endian u64 byte length followed by UTF-8. A dictionary file holds
//! the reverse array in key order using the same string encoding. Range
//! described columns have no file; the manifest carries `lo`, `hi`, `step`.

use std::fs;
use std::path::Path;

use forelem_core::reformat::{Column, ColumnData, ColumnEncoding, ColumnarTable, Dictionary};
use forelem_core::{Database, FieldType};
use serde::{Deserialize, Serialize};

use crate::error::{format, io, Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tables: Vec<TableEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TableEntry {
    name: String,
    rows: usize,
    columns: Vec<ColumnEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ColumnEntry {
    name: String,
    #[serde(rename = "type")]
    ty: String,
    encoding: EncodingEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dictionary: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum EncodingEntry {
    Plain,
    Dict,
    Range { lo: i64, hi: i64, step: i64 },
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u64).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn words(bytes: &[u8], path: &Path) -> Result<Vec<[u8; 8]>> {
    if bytes.len() % 8 != 0 {
        return Err(format(path, "length is not a multiple of 8"));
    }
    Ok(bytes.chunks_exact(8).map(|c| c.try_into().expect("8 bytes")).collect())
}

fn get_strs(bytes: &[u8], path: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        let len = bytes
            .get(at..at + 8)
            .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")) as usize)
            .ok_or_else(|| format(path, "truncated length prefix"))?;
        at += 8;
        let s = bytes
            .get(at..at + len)
            .ok_or_else(|| format(path, "truncated string"))?;
        out.push(String::from_utf8(s.to_vec()).map_err(|_| format(path, "string is not UTF-8"))?);
        at += len;
    }
    Ok(out)
}

fn column_bytes(data: &ColumnData) -> Option<Vec<u8>> {
    let mut buf = Vec::new();
    match data {
        ColumnData::Int(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
        ColumnData::Float(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
        ColumnData::Str(v) => v.iter().for_each(|s| put_str(&mut buf, s)),
        ColumnData::Described => return None,
    }
    Some(buf)
}

/// Writes `tables` into `dir`, replacing any previous manifest.
pub fn write_columnar(dir: &Path, tables: &[ColumnarTable]) -> Result<()> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut manifest = Manifest { tables: Vec::new() };
    for t in tables {
        let mut columns = Vec::new();
        for c in t.columns() {
            let stem = format!("{}.{}", t.name(), c.name);
            let file = match column_bytes(&c.data) {
                Some(bytes) => {
                    let name = format!("{stem}.bin");
                    let path = dir.join(&name);
                    fs::write(&path, bytes).map_err(io(&path))?;
                    Some(name)
                }
                None => None,
            };
            let (encoding, dictionary) = match &c.encoding {
                ColumnEncoding::Plain => (EncodingEntry::Plain, None),
                ColumnEncoding::RangeDescriptor { lo, hi, step } => (
                    EncodingEntry::Range {
                        lo: *lo,
                        hi: *hi,
                        step: *step,
                    },
                    None,
                ),
                ColumnEncoding::DictKeys(d) => {
                    let name = format!("{stem}.dict");
                    let path = dir.join(&name);
                    let mut buf = Vec::new();
                    d.reverse().iter().for_each(|s| put_str(&mut buf, s));
                    fs::write(&path, buf).map_err(io(&path))?;
                    (EncodingEntry::Dict, Some(name))
                }
            };
            columns.push(ColumnEntry {
                name: c.name.clone(),
                ty: c.ty.name().into(),
                encoding,
                file,
                dictionary,
            });
        }
        manifest.tables.push(TableEntry {
            name: t.name().into(),
            rows: t.rows(),
            columns,
        });
    }
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(|source| Error::Json {
        path: path.clone(),
        source,
    })?;
    fs::write(&path, text + "\n").map_err(io(&path))
}

/// Reads every table listed in the manifest of `dir`.
pub fn read_columnar_tables(dir: &Path) -> Result<Vec<ColumnarTable>> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.clone(),
        source,
    })?;
    let read = |name: &Option<String>, what: &str| -> Result<(Vec<u8>, std::path::PathBuf)> {
        let name = name
            .as_ref()
            .ok_or_else(|| format(&path, format!("column `{what}` names no file")))?;
        let p = dir.join(name);
        Ok((fs::read(&p).map_err(io(&p))?, p))
    };
    let mut tables = Vec::new();
    for t in manifest.tables {
        let mut columns = Vec::new();
        for c in t.columns {
            let ty = FieldType::parse(&c.ty)
                .ok_or_else(|| format(&path, format!("column `{}` has unknown type `{}`", c.name, c.ty)))?;
            let (encoding, data) = match c.encoding {
                EncodingEntry::Range { lo, hi, step } => {
                    (ColumnEncoding::RangeDescriptor { lo, hi, step }, ColumnData::Described)
                }
                EncodingEntry::Dict => {
                    let (bytes, p) = read(&c.dictionary, &c.name)?;
                    let dict = Dictionary::from_reverse(c.name.clone(), get_strs(&bytes, &p)?)?;
                    let (bytes, p) = read(&c.file, &c.name)?;
                    let keys = words(&bytes, &p)?.into_iter().map(i64::from_le_bytes).collect();
                    (ColumnEncoding::DictKeys(dict), ColumnData::Int(keys))
                }
                EncodingEntry::Plain => {
                    let (bytes, p) = read(&c.file, &c.name)?;
                    let data = match ty {
                        FieldType::Int => ColumnData::Int(words(&bytes, &p)?.into_iter().map(i64::from_le_bytes).collect()),
                        FieldType::Float => {
                            ColumnData::Float(words(&bytes, &p)?.into_iter().map(f64::from_le_bytes).collect())
                        }
                        FieldType::Str => ColumnData::Str(get_strs(&bytes, &p)?),
                    };
                    (ColumnEncoding::Plain, data)
                }
            };
            columns.push(Column {
                name: c.name,
                ty,
                encoding,
                data,
            });
        }
        tables.push(ColumnarTable::new(t.name, t.rows, columns)?);
    }
    Ok(tables)
}

/// Loads the store as the executor sees it: dictionary-encoded fields hold
/// integer keys and the dictionaries are registered on the database.
pub fn read_columnar(dir: &Path) -> Result<Database> {
    let mut db = Database::new();
    for t in read_columnar_tables(dir)? {
        let (m, dicts) = t.to_stored();
        db.insert(m)?;
        for d in dicts {
            db.set_dictionary(t.name(), d);
        }
    }
    Ok(db)
}
