//! Output files. Everything is built in memory and written only once the
//! command has succeeded.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::CliError;

pub const CSV_VERSION: &str = "v1";

#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn add_csv<T: Serialize>(&mut self, name: &str, kind: &str, rows: &[T]) -> Result<(), CliError> {
        self.add(name, write_csv(kind, rows)?);
        Ok(())
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Pipeline(e.to_string()))?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }

    /// Writes every file into `dir`. Files go to temporary names first, so a
    /// failed write leaves none of the outputs behind.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let unwritable = |e: std::io::Error| CliError::Input(format!("cannot write to {}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(unwritable)?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.partial"));
            if let Err(e) = fs::write(&tmp, bytes) {
                staged.push(tmp);
                for t in &staged {
                    let _ = fs::remove_file(t);
                }
                return Err(unwritable(e));
            }
            staged.push(tmp);
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, (name, _)) in staged.iter().zip(&self.files) {
            let dest = dir.join(name);
            fs::rename(tmp, &dest).map_err(unwritable)?;
            written.push(dest);
        }
        Ok(written)
    }
}

fn header(kind: &str) -> String {
    format!("# mrgg-csv {CSV_VERSION} {kind}\n")
}

pub fn write_csv<T: Serialize>(kind: &str, rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut buf = header(kind).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for row in rows {
            w.serialize(row).map_err(|e| CliError::Pipeline(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| CliError::Pipeline(format!("csv: {e}")))?;
    }
    Ok(buf)
}

/// Parses a file written by [`write_csv`], checking the version line.
pub fn read_csv<T: DeserializeOwned>(kind: &str, bytes: &[u8]) -> Result<Vec<T>, CliError> {
    let expected = header(kind);
    if !bytes.starts_with(expected.as_bytes()) {
        let first = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
        return Err(CliError::Input(format!(
            "expected header `{}`, found `{}`",
            expected.trim_end(),
            String::from_utf8_lossy(first)
        )));
    }
    csv::Reader::from_reader(&bytes[expected.len()..])
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Input(format!("csv: {e}")))
}
