//! Output directory writers: pretty JSON, NDJSON time series, small CSV tables.
//!
//! Every writer is owned by the driver thread and emits values in a fixed
//! order, so identical runs produce identical bytes.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Names of the files written so far, in order.
    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn open(&mut self, name: &str) -> io::Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.root.join(name))?))
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> io::Result<()> {
        let mut w = self.open(name)?;
        w.write_all(text.as_bytes())?;
        w.flush()
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let mut w = self.open(name)?;
        w.write_all(bytes)?;
        w.flush()
    }

    /// One JSON object per line.
    pub fn write_ndjson<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> io::Result<()> {
        let mut w = self.open(name)?;
        for row in rows {
            serde_json::to_writer(&mut w, &row).map_err(io::Error::other)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> io::Result<()> {
        let mut w = self.open(name)?;
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()
    }
}

/// Shortest round-trip formatting, `null`-free for CSV.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        x.to_string()
    }
}
