//! CSV tables with a provenance line, resolved configs and optional plots.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use serde_json::Value;

use crate::config::Common;
use crate::error::CliError;
use crate::svg;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A table of cells, written as CSV.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Numeric values of a column; unparsable cells become NaN.
    pub fn column(&self, name: &str) -> Vec<f64> {
        let Some(j) = self.header.iter().position(|h| h == name) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .map(|r| r[j].parse().unwrap_or(f64::NAN))
            .collect()
    }
}

/// Shortest round-tripping decimal form.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Writes everything a subcommand produces under one directory.
pub struct Output {
    dir: PathBuf,
    command: &'static str,
    seed: u64,
    svg: bool,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(common: &Common, command: &'static str) -> Result<Self, CliError> {
        fs::create_dir_all(&common.out)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", common.out.display())))?;
        Ok(Self {
            dir: common.out.clone(),
            command,
            seed: common.seed,
            svg: common.svg,
            written: Vec::new(),
        })
    }

    pub fn svg_enabled(&self) -> bool {
        self.svg
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn provenance(&self) -> String {
        format!("# uamark {VERSION} command={} seed={}", self.command, self.seed)
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut file = fs::File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        writeln!(file, "{}", self.provenance())?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Writes raw text, e.g. a CSV produced by a library writer, after the
    /// provenance line.
    pub fn text_with_provenance(&mut self, name: &str, body: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut file = fs::File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        writeln!(file, "{}", self.provenance())?;
        file.write_all(body)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn resolved_config(&mut self, value: &Value) -> Result<PathBuf, CliError> {
        let path = self.path(&format!("{}.resolved.json", self.command));
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Line plot of `ys` against `x` from a table, if plots are enabled.
    pub fn plot(&mut self, name: &str, title: &str, table: &Table, x: &str, ys: &[&str], log_x: bool) -> Result<(), CliError> {
        self.plot_series(name, title, x, &table.column(x), &ys.iter().map(|y| (y.to_string(), table.column(y))).collect::<Vec<_>>(), log_x)
    }

    pub fn plot_series(
        &mut self,
        name: &str,
        title: &str,
        x_label: &str,
        xs: &[f64],
        series: &[(String, Vec<f64>)],
        log_x: bool,
    ) -> Result<(), CliError> {
        if !self.svg {
            return Ok(());
        }
        let path = self.path(name);
        fs::write(&path, svg::line_plot(title, x_label, xs, series, log_x))?;
        self.written.push(path);
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
