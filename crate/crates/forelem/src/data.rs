//! CSV/TSV tables with schema sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use forelem_core::{Database, FieldType, Multiset, Schema, Tuple, Value};

use crate::columnar_io;
use crate::error::{format, io, Error, Result};

/// Parses a schema sidecar: one `field: type` per line, `#` starts a comment.
pub fn parse_schema(text: &str, path: &Path) -> Result<Schema> {
    let mut schema = Schema::default();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (name, ty) = line
            .split_once(':')
            .ok_or_else(|| format(path, format!("line {}: expected `field: type`", n + 1)))?;
        let ty = FieldType::parse(ty.trim())
            .ok_or_else(|| format(path, format!("line {}: unknown type `{}`", n + 1, ty.trim())))?;
        schema.push(name.trim(), ty)?;
    }
    Ok(schema)
}

pub fn schema_text(schema: &Schema) -> String {
    schema
        .fields()
        .iter()
        .map(|f| format!("{}: {}\n", f.name, f.ty))
        .collect()
}

pub fn parse_value(text: &str, ty: FieldType) -> Option<Value> {
    match ty {
        FieldType::Int => text.trim().parse().ok().map(Value::Int),
        FieldType::Float => text.trim().parse().ok().map(Value::Float),
        FieldType::Str => Some(Value::Str(text.into())),
    }
}

fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") => b'\t',
        _ => b',',
    }
}

/// Reads `NAME.csv` or `NAME.tsv` from `dir` using `NAME.schema`. Header
/// columns may come in any order; every schema field must be present.
pub fn read_table(dir: &Path, name: &str) -> Result<Multiset> {
    let schema_path = dir.join(format!("{name}.schema"));
    let text = fs::read_to_string(&schema_path).map_err(io(&schema_path))?;
    let schema = parse_schema(&text, &schema_path)?;
    let path = ["csv", "tsv"]
        .iter()
        .map(|ext| dir.join(format!("{name}.{ext}")))
        .find(|p| p.exists())
        .ok_or_else(|| format(&schema_path, format!("no {name}.csv or {name}.tsv next to the schema")))?;
    read_rows(&path, name, schema)
}

fn read_rows(path: &Path, name: &str, schema: Schema) -> Result<Multiset> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_for(path))
        .from_path(path)
        .map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    let mut columns = Vec::with_capacity(schema.len());
    for f in schema.fields() {
        let at = header
            .iter()
            .position(|h| h.trim() == f.name)
            .ok_or_else(|| format(path, format!("header lacks field `{}`", f.name)))?;
        columns.push((at, f.ty));
    }
    let mut m = Multiset::new(name, schema.clone());
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let mut row = Vec::with_capacity(columns.len());
        for (f, &(at, ty)) in schema.fields().iter().zip(&columns) {
            let raw = record.get(at).unwrap_or("");
            let v = parse_value(raw, ty).ok_or_else(|| {
                format(path, format!("row {}: `{raw}` is not a valid {ty} for `{}`", n + 1, f.name))
            })?;
            row.push(v);
        }
        m.push(Tuple(row))?;
    }
    Ok(m)
}

/// Loads every table with a schema sidecar in `dir`, or the columnar store
/// when `dir` holds a manifest.
pub fn read_database(dir: &Path) -> Result<Database> {
    if dir.join(columnar_io::MANIFEST).exists() {
        return columnar_io::read_columnar(dir);
    }
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let path = entry.map_err(io(dir))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("schema") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_string());
            }
        }
    }
    names.sort();
    let mut db = Database::new();
    for name in names {
        db.insert(read_table(dir, &name)?)?;
    }
    Ok(db)
}

/// Writes rows sorted by all columns, left to right, with a header line.
pub fn write_csv(path: &Path, m: &Multiset) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter_for(path))
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(m.schema().names()).map_err(csv_err)?;
    for row in m.sorted_rows() {
        w.write_record(row.values().iter().map(Value::to_string)).map_err(csv_err)?;
    }
    w.flush().map_err(io(path))
}

/// Writes `NAME.csv` and `NAME.schema` into `dir`.
pub fn write_table(dir: &Path, m: &Multiset) -> Result<PathBuf> {
    let schema_path = dir.join(format!("{}.schema", m.name()));
    fs::write(&schema_path, schema_text(m.schema())).map_err(io(&schema_path))?;
    let path = dir.join(format!("{}.csv", m.name()));
    write_csv(&path, m)?;
    Ok(path)
}

pub fn write_database(dir: &Path, db: &Database) -> Result<()> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    for m in db.tables() {
        write_table(dir, m)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_sidecar_allows_comments_and_blank_lines() {
        let s = parse_schema("# access log\nurl: str\n\nhits: int # per day\n", Path::new("x")).unwrap();
        assert_eq!(s.names().collect::<Vec<_>>(), ["url", "hits"]);
        assert!(parse_schema("url str\n", Path::new("x")).is_err());
        assert!(parse_schema("url: text\n", Path::new("x")).is_err());
    }

    #[test]
    fn header_order_is_free_and_output_is_sorted() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("t.schema"), "a: int\nb: str\n").unwrap();
        fs::write(dir.path().join("t.csv"), "b,a\n\"x,y\",2\nz,1\n").unwrap();
        let m = read_table(dir.path(), "t").unwrap();
        assert_eq!(m.rows()[0], Tuple(vec![Value::Int(2), Value::Str("x,y".into())]));
        let out = dir.path().join("out.csv");
        write_csv(&out, &m).unwrap();
        assert_eq!(fs::read_to_string(out).unwrap(), "a,b\n1,z\n2,\"x,y\"\n");
    }

    #[test]
    fn tsv_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("t.schema"), "a: int\n").unwrap();
        fs::write(dir.path().join("t.tsv"), "a\n1\nfoo\n").unwrap();
        let err = read_table(dir.path(), "t").unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }
}
