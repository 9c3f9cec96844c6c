//! CSV artifacts: header row, `.` decimals, 17 significant digits.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::CliError;

/// Round-trip exact float text.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

pub struct OutDir {
    root: PathBuf,
    stamp: bool,
}

impl OutDir {
    pub fn new(root: &Path, stamp: bool) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|source| CliError::Write { path: root.to_path_buf(), source })?;
        Ok(Self { root: root.to_path_buf(), stamp })
    }

    pub fn write(&self, name: &str, table: &Table) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        let wrap = |source: std::io::Error| CliError::Write { path: path.clone(), source };
        let mut file = File::create(&path).map_err(wrap)?;
        if self.stamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            writeln!(file, "# generated at unix time {secs}").map_err(wrap)?;
        }
        let mut w = csv::Writer::from_writer(file);
        let csv_err = |e: csv::Error| wrap(e.into());
        w.write_record(&table.header).map_err(csv_err)?;
        for row in &table.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(wrap)?;
        Ok(path)
    }
}
