//! CSV files with `#` provenance lines.

use std::borrow::Borrow;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Metadata stamped on every result file.
#[derive(Clone, Debug)]
pub struct Provenance {
    pub command: String,
    pub config_digest: String,
    pub projection: String,
    pub notes: Vec<String>,
}

/// A table held in memory and written in one go.
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// Shortest round-trip form of `x`, with an exponent for very large or small values.
pub fn num(x: impl Borrow<f64>) -> String {
    format!("{:?}", x.borrow())
}

/// Blank cell for quantities that were not computed.
pub fn opt<T: Borrow<f64>>(v: Option<T>) -> String {
    v.map(num).unwrap_or_default()
}

impl Csv {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            header: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn body(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    /// Result file with provenance lines followed by the body.
    pub fn write(&self, dir: &Path, name: &str, prov: &Provenance) -> Result<PathBuf, CliError> {
        let mut s = format!(
            "# code-version: {CODE_VERSION}\n# command: {}\n# config-sha256: {}\n# projection: {}\n",
            prov.command, prov.config_digest, prov.projection
        );
        for note in &prov.notes {
            s.push_str(&format!("# note: {note}\n"));
        }
        s.push_str(&self.body());
        write_file(dir, name, &s)
    }

    /// Plot data: the body only.
    pub fn write_plain(&self, dir: &Path, name: &str) -> Result<PathBuf, CliError> {
        write_file(dir, name, &self.body())
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(&dir.display().to_string(), e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path.display().to_string(), e))?;
    Ok(path)
}
