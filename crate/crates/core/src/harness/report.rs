//! CSV, JSON and plot-data output. Every file is written to a temporary
//! sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use super::study::LimitReport;
use crate::error::{Error, Result};

/// `{:.16e}`: 17 significant digits, `.` decimal separator. Negative zero
/// prints as zero.
pub fn fmt_num(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let mut tmp = NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// CSV with a header row and numeric rows in [`fmt_num`] format.
pub fn csv_bytes(header: &[&str], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|x| fmt_num(*x)))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_atomic(path, &csv_bytes(header, rows)?)
}

/// Where [`emit_report`] puts its files: `<dir>/<stem>.json`, `<dir>/<stem>.csv`
/// and `<dir>/<stem>_eps<i>.csv` per ε.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub dir: PathBuf,
    pub stem: String,
}

impl ReportPaths {
    pub fn new(dir: impl Into<PathBuf>, stem: impl Into<String>) -> Self {
        Self { dir: dir.into(), stem: stem.into() }
    }

    pub fn json(&self) -> PathBuf {
        self.dir.join(format!("{}.json", self.stem))
    }

    pub fn csv(&self) -> PathBuf {
        self.dir.join(format!("{}.csv", self.stem))
    }

    pub fn series(&self, index: usize) -> PathBuf {
        self.dir.join(format!("{}_eps{index}.csv", self.stem))
    }
}

pub const LONG_HEADER: [&str; 4] = ["eps", "t", "err", "model_err"];
pub const SERIES_HEADER: [&str; 4] = ["t", "err", "model_err", "energy"];

/// Write the JSON summary, the long-format table and one series per ε.
/// Returns the paths written.
pub fn emit_report(report: &LimitReport, paths: &ReportPaths) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let json = serde_json::to_vec_pretty(report)?;
    write_atomic(&paths.json(), &json)?;
    written.push(paths.json());

    let rows: Vec<Vec<f64>> = report.long_rows().iter().map(|r| r.to_vec()).collect();
    write_csv(&paths.csv(), &LONG_HEADER, &rows)?;
    written.push(paths.csv());

    for (i, run) in report.runs.iter().enumerate() {
        let Some(series) = &run.series else { continue };
        let err = series.error.clone().unwrap_or_else(|| vec![f64::NAN; series.t.len()]);
        let rows: Vec<Vec<f64>> = series
            .t
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let model = report.fit.map_or(f64::NAN, |f| f.model(run.eps, t));
                vec![t, err[j], model, series.energy[j]]
            })
            .collect();
        write_csv(&paths.series(i), &SERIES_HEADER, &rows)?;
        written.push(paths.series(i));
    }
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<LimitReport> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}
