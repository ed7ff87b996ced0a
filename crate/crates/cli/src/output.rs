//! CSV tables with a fixed header and 17-significant-digit floats.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// A CSV cell.
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(&'static str),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<&'static str> for Cell {
    fn from(v: &'static str) -> Self {
        Cell::Text(v)
    }
}

fn render(cell: &Cell) -> String {
    match cell {
        Cell::Float(v) => format!("{v:.16e}"),
        Cell::Int(v) => v.to_string(),
        Cell::Text(s) => s.to_string(),
    }
}

pub struct Table {
    header: &'static [&'static str],
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", self.header.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(render).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `--out` if given, else `$LPAVG_OUT_DIR/<command>.csv`, else
/// `./<command>.csv`.
pub fn output_path(explicit: Option<&str>, command: &str) -> PathBuf {
    if let Some(p) = explicit {
        return PathBuf::from(p);
    }
    let dir = std::env::var_os("LPAVG_OUT_DIR").map(PathBuf::from).unwrap_or_else(|| ".".into());
    dir.join(format!("{command}.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(render(&Cell::Float(0.1)), "1.0000000000000001e-1");
        assert_eq!(render(&Cell::Float(-2.0)), "-2.0000000000000000e0");
        let x: f64 = render(&Cell::Float(std::f64::consts::PI)).parse().unwrap();
        assert_eq!(x, std::f64::consts::PI);
    }
}
