//! Regression data and its preprocessing.
//!
//! The design matrix is stored column-major since every likelihood
//! evaluation works on a subset of columns.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EssError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    y: Vec<f64>,
    x: Vec<f64>,
    n: usize,
    p: usize,
    centered: bool,
    standardized: bool,
    yty: f64,
}

impl Dataset {
    /// Build from a response vector and a column-major design (`p` columns of length `n`).
    pub fn from_columns(y: Vec<f64>, x: Vec<f64>, p: usize) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(EssError::Dimension(format!("need at least 2 observations, got {n}")));
        }
        if p == 0 {
            return Err(EssError::Dimension("design has no columns".into()));
        }
        if x.len() != n * p {
            return Err(EssError::Dimension(format!(
                "design has {} entries, expected {n}x{p}",
                x.len()
            )));
        }
        if let Some(i) = y.iter().chain(x.iter()).position(|v| !v.is_finite()) {
            return Err(EssError::Dimension(format!("non-finite value at flat index {i}")));
        }
        let yty = y.iter().map(|v| v * v).sum();
        Ok(Dataset { y, x, n, p, centered: false, standardized: false, yty })
    }

    /// Build from row-major design rows.
    pub fn from_rows(y: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != y.len() {
            return Err(EssError::Dimension(format!(
                "response has {} rows but design has {}",
                y.len(),
                rows.len()
            )));
        }
        let p = rows.first().map_or(0, |r| r.len());
        let n = rows.len();
        let mut x = vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(EssError::Dimension(format!(
                    "design row {} has {} columns, expected {p}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                x[j * n + i] = *v;
            }
        }
        Self::from_columns(y, x, p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    pub fn columns(&self) -> &[f64] {
        &self.x
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// (y − ȳ)ᵀ(y − ȳ) once centered; plain yᵀy before.
    pub fn yty(&self) -> f64 {
        self.yty
    }

    /// Subtract column means from y and from every design column.
    pub fn center(&self) -> Dataset {
        let n = self.n as f64;
        let mut out = self.clone();
        let ybar = out.y.iter().sum::<f64>() / n;
        out.y.iter_mut().for_each(|v| *v -= ybar);
        for col in out.x.chunks_mut(self.n) {
            let m = col.iter().sum::<f64>() / n;
            col.iter_mut().for_each(|v| *v -= m);
        }
        out.yty = out.y.iter().map(|v| v * v).sum();
        out.centered = true;
        out
    }

    /// Scale each (centered) column to unit sample standard deviation, divisor n − 1.
    pub fn standardize(&self) -> Result<Dataset> {
        if !self.centered {
            return Err(EssError::config("standardize requires a centered dataset"));
        }
        let mut out = self.clone();
        let denom = (self.n - 1) as f64;
        for (j, col) in out.x.chunks_mut(self.n).enumerate() {
            let ss: f64 = col.iter().map(|v| v * v).sum();
            let sd = (ss / denom).sqrt();
            if sd <= 1e-12 {
                return Err(EssError::ZeroVariance(j));
            }
            col.iter_mut().for_each(|v| *v /= sd);
        }
        out.standardized = true;
        Ok(out)
    }

    /// Pearson correlation between two design columns.
    pub fn correlation(&self, a: usize, b: usize) -> f64 {
        let (ca, cb) = (self.column(a), self.column(b));
        let n = self.n as f64;
        let ma = ca.iter().sum::<f64>() / n;
        let mb = cb.iter().sum::<f64>() / n;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (u, v) in ca.iter().zip(cb) {
            let (du, dv) = (u - ma, v - mb);
            sab += du * dv;
            saa += du * du;
            sbb += dv * dv;
        }
        if saa <= 0.0 || sbb <= 0.0 {
            0.0
        } else {
            sab / (saa * sbb).sqrt()
        }
    }

    /// Load a response file (single column) and a design file (n × p).
    pub fn load_csv(response: &Path, design: &Path) -> Result<Dataset> {
        let y_rows = read_numeric_csv(response)?;
        if let Some((i, r)) = y_rows.iter().enumerate().find(|(_, r)| r.len() != 1) {
            return Err(EssError::RaggedRow {
                file: response.to_path_buf(),
                row: i + 1,
                found: r.len(),
                expected: 1,
            });
        }
        let y: Vec<f64> = y_rows.into_iter().map(|r| r[0]).collect();
        let rows = read_numeric_csv(design)?;
        if rows.len() != y.len() {
            return Err(EssError::Dimension(format!(
                "response {} has {} rows but design {} has {}",
                response.display(),
                y.len(),
                design.display(),
                rows.len()
            )));
        }
        Dataset::from_rows(y, &rows)
    }

    /// Write the design as a headed CSV (`x1..xp`).
    pub fn write_design_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| csv_io(path, e);
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let header: Vec<String> = (1..=self.p).map(|j| format!("x{j}")).collect();
        w.write_record(&header).map_err(io)?;
        for i in 0..self.n {
            let row: Vec<String> = (0..self.p).map(|j| fmt_f64(self.x[j * self.n + i])).collect();
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| EssError::Io { path: path.to_path_buf(), source: e })
    }

    pub fn write_response_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| csv_io(path, e);
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(["y"]).map_err(io)?;
        for v in &self.y {
            w.write_record([fmt_f64(*v)]).map_err(io)?;
        }
        w.flush().map_err(|e| EssError::Io { path: path.to_path_buf(), source: e })
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub(crate) fn csv_io(path: &Path, e: csv::Error) -> EssError {
    let kind = std::io::Error::other(e.to_string());
    EssError::Io { path: path.to_path_buf(), source: kind }
}

/// Parse a comma-separated numeric file. A first row that fails to parse is
/// treated as a header; any later non-numeric cell is an error.
fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => EssError::Io { path: path.to_path_buf(), source },
            other => EssError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(format!("{other:?}")),
            },
        })?;
    let mut rows = Vec::new();
    let mut width = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_io(path, e))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, usize> = rec
            .iter()
            .enumerate()
            .map(|(j, c)| c.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or(j))
            .collect();
        match parsed {
            Ok(vals) => {
                let w = *width.get_or_insert(vals.len());
                if vals.len() != w {
                    return Err(EssError::RaggedRow {
                        file: path.to_path_buf(),
                        row: i + 1,
                        found: vals.len(),
                        expected: w,
                    });
                }
                rows.push(vals);
            }
            Err(_) if i == 0 => continue,
            Err(j) => {
                return Err(EssError::Parse {
                    file: path.to_path_buf(),
                    row: i + 1,
                    col: j + 1,
                    value: rec.get(j).unwrap_or("").to_string(),
                })
            }
        }
    }
    if rows.is_empty() {
        return Err(EssError::EmptyFile(path.to_path_buf()));
    }
    Ok(rows)
}
