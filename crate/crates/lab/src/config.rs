//! JSON run configuration. Every field is optional; command-line flags take
//! precedence over file values, which take precedence over built-in
//! defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::RunError;

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub map: MapConfig,
    pub bundle: BundleConfig,
    pub simulate: SimulateConfig,
    pub lyapunov: LyapunovConfig,
    pub metric: MetricConfig,
    pub ph: PhConfig,
    pub ergodicity: ErgodicityConfig,
}

/// Parameters of the perturbed torus map.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapConfig {
    pub epsilon: Option<f64>,
    pub d: Option<u32>,
    pub direction: Option<[i64; 2]>,
}

/// A matrix given by name (`"B2"`, `"I"`) or as integer rows.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(String),
    Rows(Vec<Vec<i64>>),
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BundleConfig {
    pub a: Option<MatrixSpec>,
    pub k: Option<usize>,
    pub m: Option<usize>,
    /// Bundle file with the clutching matrix; `[I_k | 0]` when absent.
    pub clutching: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub iters: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovConfig {
    pub iters: Option<usize>,
    pub orbits: Option<usize>,
    pub skew_k: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    pub mu: Option<Vec<f64>>,
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhConfig {
    pub d_max: Option<u32>,
    pub n_max: Option<usize>,
    pub samples: Option<usize>,
    pub k: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErgodicityConfig {
    pub k: Option<usize>,
    pub omega: Option<Vec<f64>>,
    pub characters: Option<Vec<Vec<i64>>>,
    pub iters: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| {
            RunError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            RunError::Config(m) => RunError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Flag value, else file value, else default.
pub fn pick<T: Clone>(flag: Option<T>, file: &Option<T>, default: T) -> T {
    flag.or_else(|| file.clone()).unwrap_or(default)
}
