//! Run outputs, held in memory until the run has succeeded and then written
//! file by file through a temporary file and a rename.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        debug_assert!(!self.files.iter().any(|(n, _)| n == name), "duplicate artifact {name}");
        self.files.push((name.to_string(), bytes));
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::runtime("cli", e))?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// CSV from a header and rows of already formatted fields.
    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::runtime("cli", e);
        w.write_record(header).map_err(fail)?;
        for r in rows {
            w.write_record(r).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::runtime("cli", e.error()))?;
        self.add(name, bytes);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// Writes every file into `dir`, each replacing any old copy in one
    /// rename.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let dest = dir.join(name);
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
            tmp.write_all(bytes).map_err(io)?;
            tmp.as_file().sync_all().map_err(io)?;
            tmp.persist(&dest)
                .map_err(|e| CliError::Io(format!("{}: {}", dest.display(), e.error)))?;
            written.push(dest);
        }
        Ok(written)
    }
}
