//! On-disk formats: bundle descriptions as JSON and CSV traces.

use std::io::{Read, Write};

use num_complex::Complex64;
use phk_core::bundlealg::IntMat;
use serde::{Deserialize, Serialize};

use crate::error::RunError;

/// `{k, m, matrix}` with `matrix` a `k x m` array of integer rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleFile {
    pub k: usize,
    pub m: usize,
    pub matrix: Vec<Vec<i64>>,
}

impl BundleFile {
    pub fn from_mat(h: &IntMat) -> Self {
        let (k, m) = h.shape();
        Self { k, m, matrix: h.to_rows() }
    }

    pub fn to_mat(&self) -> Result<IntMat, RunError> {
        if self.matrix.len() != self.k || self.matrix.iter().any(|r| r.len() != self.m) {
            return Err(RunError::Config(format!(
                "bundle matrix must have {} rows of {} entries",
                self.k, self.m
            )));
        }
        let data = self.matrix.iter().flatten().copied().collect();
        IntMat::new(self.k, self.m, data).map_err(|e| RunError::Config(format!("bundle matrix: {e}")))
    }

    pub fn read(r: impl Read) -> Result<Self, RunError> {
        serde_json::from_reader(r).map_err(|e| RunError::Config(format!("bundle file: {e}")))
    }

    pub fn write(&self, mut w: impl Write) -> Result<(), RunError> {
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| RunError::Io(e.to_string()))?;
        writeln!(w).map_err(|e| RunError::Io(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> RunError {
    RunError::Io(e.to_string())
}

/// Columns `n, re_avg, im_avg, abs_avg`.
pub fn write_ergodicity_csv(w: impl Write, averages: &[(usize, Complex64)]) -> Result<(), RunError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "re_avg", "im_avg", "abs_avg"]).map_err(csv_err)?;
    for (n, a) in averages {
        out.write_record([n.to_string(), a.re.to_string(), a.im.to_string(), a.norm().to_string()])
            .map_err(csv_err)?;
    }
    out.flush().map_err(|e| RunError::Io(e.to_string()))
}

/// Columns `iteration_block, exponent_1, ..., exponent_n`.
pub fn write_lyapunov_csv(w: impl Write, trace: &[(usize, Vec<f64>)]) -> Result<(), RunError> {
    let dim = trace.first().map(|t| t.1.len()).unwrap_or(0);
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["iteration_block".to_string()];
    header.extend((1..=dim).map(|i| format!("exponent_{i}")));
    out.write_record(&header).map_err(csv_err)?;
    for (block, exps) in trace {
        let mut row = vec![block.to_string()];
        row.extend(exps.iter().map(|e| e.to_string()));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush().map_err(|e| RunError::Io(e.to_string()))
}

/// Generic CSV with a header row.
pub fn write_table(w: impl Write, header: &[&str], rows: &[Vec<String>]) -> Result<(), RunError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    for r in rows {
        out.write_record(r).map_err(csv_err)?;
    }
    out.flush().map_err(|e| RunError::Io(e.to_string()))
}
