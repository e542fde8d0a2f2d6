//! CSV emission: `#` metadata header, comma-separated rows at 17
//! significant digits, optional `#` footer records.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use chrono::{SecondsFormat, Utc};

/// A CSV document built in memory and written in one go.
#[derive(Debug, Default)]
pub struct Table {
    header: Vec<String>,
    columns: Vec<&'static str>,
    rows: Vec<String>,
    footer: Vec<String>,
}

/// `x` at full double precision.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

impl Table {
    pub fn new(command: &str, config: &[(&str, String)], timestamp: bool, columns: &[&'static str]) -> Self {
        let mut header = vec![format!("qsq {} {}", env!("CARGO_PKG_VERSION"), command)];
        for (k, v) in config {
            header.push(format!("{k} = {v}"));
        }
        if timestamp {
            header.push(format!("timestamp = {}", Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)));
        }
        Self {
            header,
            columns: columns.to_vec(),
            rows: Vec::new(),
            footer: Vec::new(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.columns.len());
        self.rows.push(fields.join(","));
    }

    pub fn footer(&mut self, key: &str, value: String) {
        self.footer.push(format!("{key} = {value}"));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for h in &self.header {
            let _ = writeln!(out, "# {h}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{r}");
        }
        for f in &self.footer {
            let _ = writeln!(out, "# {f}");
        }
        out
    }

    /// Writes to `path`, or stdout when `None`.
    pub fn write(&self, path: Option<&PathBuf>) -> io::Result<()> {
        let text = self.render();
        match path {
            Some(p) => fs::write(p, text),
            None => io::stdout().lock().write_all(text.as_bytes()),
        }
    }
}
