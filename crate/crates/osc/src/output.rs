//! CSV tables, run manifests and gnuplot scripts.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;

/// Seventeen significant digits, `.` decimal point, no locale.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// A table with a fixed header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()
    }

    pub fn read(path: &Path) -> io::Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Structured-text record of a run.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub code_version: String,
    pub outputs: Vec<String>,
    pub results: BTreeMap<String, String>,
    pub wall_time_s: f64,
    pub config: RunConfig,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> io::Result<()> {
        let text = toml::to_string(self).map_err(|e| io::Error::new(io::ErrorKind::Other, e.to_string()))?;
        fs::write(path, text)
    }
}

/// Gnuplot script plotting column `y` against column `x` of a CSV.
pub fn write_plot_script(csv: &Path, x: &str, ys: &[&str], header: &[String]) -> io::Result<PathBuf> {
    let col = |name: &str| header.iter().position(|h| h == name).map(|i| i + 1);
    let file = csv.file_name().and_then(|s| s.to_str()).unwrap_or("data.csv");
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset key autotitle columnhead\n");
    s.push_str(&format!("set terminal pngcairo size 900,600\nset output '{stem}.png'\nset xlabel '{x}'\n"));
    let xc = col(x).unwrap_or(1);
    let parts: Vec<String> =
        ys.iter().filter_map(|y| col(y)).map(|yc| format!("'{file}' using {xc}:{yc} with linespoints")).collect();
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    let path = csv.with_extension("gp");
    fs::write(&path, s)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(num(0.5625), "5.6250000000000000e-1");
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![num(1.0), "x, y".into()]);
        t.write(&p).unwrap();
        assert_eq!(Table::read(&p).unwrap(), t);
        let gp = write_plot_script(&p, "a", &["b"], &t.header).unwrap();
        assert!(fs::read_to_string(gp).unwrap().contains("using 1:2"));
    }
}
