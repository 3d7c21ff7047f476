//! On-disk formats written and read by the commands. Every JSON file
//! carries a `format` tag and a `version`.

use std::path::{Path, PathBuf};

use action_shapley::agent::OptimizerKind;
use action_shapley::env::{read_training_point, EnvSpec, TrainingPoint};
use action_shapley::selection::{SelectionOutcome, ValidationSummary};
use action_shapley::{AlgoParams, ShapleyReport, SubsetMask};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

pub const MANIFEST: &str = "data/manifest.json";
pub const SHAPLEY: &str = "shapley/shapley.json";
pub const SHAPLEY_TABLE: &str = "shapley/shapley.txt";
pub const SELECTION: &str = "selection/selection.json";
pub const VALIDATION: &str = "validation/validation.json";
pub const VALIDATION_TABLE: &str = "validation/validation.csv";
pub const VALIDATION_SUMMARY: &str = "validation/summary.txt";
pub const CHART_REWARDS: &str = "validation/rewards.svg";
pub const CHART_BEATEN: &str = "validation/beaten.svg";
pub const REPORT: &str = "report.md";
pub const CACHE_DIR: &str = "cache";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub series_len: usize,
    pub env: EnvSpec,
    pub points: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Relative to the manifest's directory.
    pub file: String,
    pub config: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyFile {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub point_ids: Vec<String>,
    pub algo: AlgoParams,
    pub columns: Vec<ShapleyColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyColumn {
    pub optimizer: OptimizerKind,
    pub report: ShapleyReport,
}

impl ShapleyFile {
    pub fn column(&self, optimizer: OptimizerKind) -> CliResult<&ShapleyColumn> {
        self.columns.iter().find(|c| c.optimizer == optimizer).ok_or_else(|| {
            CliError::Missing(format!("{SHAPLEY} has no column for optimizer {optimizer}; rerun `shapley`"))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFile {
    pub format: String,
    pub version: u32,
    pub optimizer: OptimizerKind,
    pub point_ids: Vec<String>,
    pub global_theta: usize,
    pub indispensable: Vec<usize>,
    pub best: SelectionOutcome,
    pub worst: SelectionOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationFile {
    pub format: String,
    pub version: u32,
    pub optimizer: OptimizerKind,
    pub point_ids: Vec<String>,
    pub summary: ValidationSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Baseline>,
}

/// The agent trained on every point, scored in the same episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub mask: SubsetMask,
    pub j: Vec<Option<f64>>,
    pub mean_j: Option<f64>,
}

pub fn header(format: &str) -> (String, u32) {
    (format.to_string(), FORMAT_VERSION)
}

pub fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Reads a versioned JSON artifact. A missing file means an earlier
/// command has not run yet.
pub fn read_json<T: DeserializeOwned>(out: &Path, rel: &str, format: &str, producer: &str) -> CliResult<T> {
    let path = out.join(rel);
    if !path.exists() {
        return Err(CliError::Missing(format!(
            "{} not found; run `{producer}` first",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::io(&path, e))?;
    let tag = value.get("format").and_then(|v| v.as_str());
    let version = value.get("version").and_then(|v| v.as_u64());
    if tag != Some(format) || version != Some(FORMAT_VERSION as u64) {
        return Err(CliError::Io(format!(
            "{}: expected {format} v{FORMAT_VERSION}, found {tag:?} v{version:?}",
            path.display()
        )));
    }
    serde_json::from_value(value).map_err(|e| CliError::io(&path, e))
}

/// Loads the manifest and every training point it lists.
pub fn read_dataset(out: &Path) -> CliResult<(Manifest, Vec<TrainingPoint>)> {
    let manifest: Manifest = read_json(out, MANIFEST, "action-shapley-dataset", "generate")?;
    let dir: PathBuf = out.join(MANIFEST).parent().map(Path::to_path_buf).unwrap_or_default();
    let points = manifest
        .points
        .iter()
        .map(|entry| {
            let path = dir.join(&entry.file);
            let text = std::fs::read_to_string(&path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => {
                    CliError::Missing(format!("{} not found; rerun `generate`", path.display()))
                }
                _ => CliError::io(&path, e),
            })?;
            let point = read_training_point(&text).map_err(|e| CliError::io(&path, e))?;
            if point.id != entry.id || point.config != entry.config {
                return Err(CliError::Io(format!("{} does not match the manifest", path.display())));
            }
            Ok(point)
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok((manifest, points))
}
