//! Versioned JSON and JSON-lines file formats.
//!
//! Every JSON document carries a top-level `schema_version`; every JSON-lines
//! file starts with a header line that does. Parse failures report
//! `path:line:column`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{PlanError, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PlanError + '_ {
    move |source| PlanError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line_offset: usize, e: serde_json::Error) -> PlanError {
    PlanError::Parse {
        path: path.to_path_buf(),
        line: e.line() + line_offset,
        column: e.column(),
        message: e.to_string(),
    }
}

fn check_version(path: &Path, value: &Value, line: usize) -> Result<()> {
    match value.get("schema_version").and_then(Value::as_u64) {
        Some(v) if v == SCHEMA_VERSION as u64 => Ok(()),
        Some(v) => Err(PlanError::SchemaVersion {
            path: path.to_path_buf(),
            found: v as u32,
            expected: SCHEMA_VERSION,
        }),
        None => Err(PlanError::Parse {
            path: path.to_path_buf(),
            line,
            column: 1,
            message: "missing integer field `schema_version`".into(),
        }),
    }
}

/// Parses a versioned JSON document from a string; `path` is used for messages.
pub fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    let value: Value = serde_json::from_str(text).map_err(|e| parse_err(path, 0, e))?;
    check_version(path, &value, 1)?;
    serde_json::from_str(text).map_err(|e| parse_err(path, 0, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_json(path, &text)
}

/// Serializes `value` (which must be a JSON object) with `schema_version` added.
pub fn to_versioned_string<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
        }
        None => return Err(PlanError::Config("only JSON objects can be versioned".into())),
    }
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_versioned_string(value)?).map_err(io_err(path))
}

/// Reads a JSON-lines file: a versioned header object, then one record per
/// non-blank line.
pub fn read_jsonl<H: DeserializeOwned, T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<(H, Vec<T>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_jsonl(path, &text)
}

pub fn parse_jsonl<H: DeserializeOwned, T: DeserializeOwned>(path: &Path, text: &str) -> Result<(H, Vec<T>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((i, first)) = lines.next() else {
        return Err(PlanError::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            message: "empty file: expected a header line".into(),
        });
    };
    let header: H = parse_json(path, first).map_err(|e| shift_line(e, i))?;
    let records = lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| parse_err(path, i, e)))
        .collect::<Result<Vec<T>>>()?;
    Ok((header, records))
}

fn shift_line(e: PlanError, by: usize) -> PlanError {
    match e {
        PlanError::Parse {
            path,
            line,
            column,
            message,
        } => PlanError::Parse {
            path,
            line: line + by,
            column,
            message,
        },
        other => other,
    }
}

/// Append-only JSON-lines writer.
pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<fs::File>,
}

impl JsonlWriter {
    /// Creates the file and writes the versioned header.
    pub fn create<H: Serialize>(path: impl AsRef<Path>, header: &H) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut w = Self {
            path,
            out: BufWriter::new(file),
        };
        let mut v = serde_json::to_value(header)?;
        if let Some(obj) = v.as_object_mut() {
            obj.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
        }
        w.write_value(&v)?;
        Ok(w)
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let v = serde_json::to_value(record)?;
        self.write_value(&v)
    }

    fn write_value(&mut self, v: &Value) -> Result<()> {
        let line = serde_json::to_string(v)?;
        writeln!(self.out, "{line}").map_err(io_err(&self.path))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(io_err(&self.path))
    }
}

/// Renders records as JSON lines behind a versioned header.
pub fn to_jsonl_string<H: Serialize, T: Serialize>(header: &H, records: &[T]) -> Result<String> {
    let mut h = serde_json::to_value(header)?;
    if let Some(obj) = h.as_object_mut() {
        obj.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    }
    let mut s = serde_json::to_string(&h)? + "\n";
    for r in records {
        s += &serde_json::to_string(r)?;
        s.push('\n');
    }
    Ok(s)
}
