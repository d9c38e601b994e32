//! Artifact formats. Numbers in CSV files use 17 significant digits in
//! scientific notation; all files end lines with LF.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::RunError;

pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// CSV table with a header row; integer columns are written as integers.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match c {
                    Cell::Int(v) => write!(out, "{v}").unwrap(),
                    Cell::Num(v) => out.push_str(&format_number(*v)),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Pretty JSON with a trailing newline. Non-finite numbers become `null`.
pub fn render_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Output directory for one configuration.
#[derive(Debug, Clone)]
pub struct ArtifactDir {
    root: PathBuf,
}

impl ArtifactDir {
    pub fn create(out: &Path, config_hash: &str) -> Result<Self, RunError> {
        let root = out.join(config_hash);
        fs::create_dir_all(&root).map_err(|e| RunError::io(&root, e))?;
        Ok(ArtifactDir { root })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, RunError> {
        let p = self.root.join(name);
        fs::write(&p, contents).map_err(|e| RunError::io(&p, e))?;
        log::info!("wrote {}", p.display());
        Ok(p)
    }

    pub fn write_csv(&self, name: &str, table: &Table) -> Result<PathBuf, RunError> {
        self.write(name, &table.render())
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, RunError> {
        self.write(name, &render_json(value))
    }
}
