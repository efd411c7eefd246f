//! JSONL reading and writing. One record per line, UTF-8, no BOM.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Result;

/// A line that could not be decoded. `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Records decoded from a JSONL stream together with per-line failures.
/// Blank lines are skipped.
#[derive(Debug, Clone)]
pub struct JsonlRead<T> {
    pub records: Vec<(usize, T)>,
    pub errors: Vec<LineError>,
}

impl<T> JsonlRead<T> {
    pub fn values(self) -> impl Iterator<Item = T> {
        self.records.into_iter().map(|(_, r)| r)
    }
}

pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<JsonlRead<T>> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        match serde_json::from_str(text) {
            Ok(r) => records.push((i + 1, r)),
            Err(e) => errors.push(LineError {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok(JsonlRead { records, errors })
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    mut writer: impl Write,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}
