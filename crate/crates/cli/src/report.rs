use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qdmd_core::dmd::ComplexRecord;
use qdmd_core::num_complex::Complex64;
use qdmd_core::simulator::fmt_f64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const TOOL_VERSION: &str = concat!("qdmd ", env!("CARGO_PKG_VERSION"));

/// Summary written next to every fitted model or prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub command: String,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<String>,
    #[serde(default)]
    pub eigenvalues: Vec<ComplexRecord>,
    #[serde(default)]
    pub resonance_estimates: Vec<f64>,
    /// Per-step relative error in percent.
    #[serde(default)]
    pub prediction_errors: Vec<f64>,
    /// Named scalar results.
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
    /// Wall-clock milliseconds per stage; only recorded on request since
    /// they differ between runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl RunReport {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunReport {
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            config,
            model_path: None,
            eigenvalues: vec![],
            resonance_estimates: vec![],
            prediction_errors: vec![],
            metrics: BTreeMap::new(),
            notes: vec![],
            timings_ms: None,
        }
    }

    pub fn set_eigenvalues(&mut self, eigs: &[Complex64]) {
        self.eigenvalues = eigs.iter().map(|&z| z.into()).collect();
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }
}

/// Stage timer feeding `RunReport::timings_ms` when enabled.
pub struct Timer {
    enabled: bool,
    start: Instant,
    stages: BTreeMap<String, f64>,
}

impl Timer {
    pub fn new(enabled: bool) -> Self {
        Timer {
            enabled,
            start: Instant::now(),
            stages: BTreeMap::new(),
        }
    }

    pub fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages
            .insert(stage.to_string(), (now - self.start).as_secs_f64() * 1e3);
        self.start = now;
    }

    pub fn finish(self, report: &mut RunReport) {
        if self.enabled {
            report.timings_ms = Some(self.stages);
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Plain numeric CSV table with a header row.
pub struct Table {
    pub columns: Vec<String>,
    rows: Vec<String>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: vec![],
        }
    }

    /// Row of numbers, optionally led by text cells.
    pub fn row(&mut self, text: &[&str], values: &[f64]) {
        assert_eq!(text.len() + values.len(), self.columns.len(), "row width");
        let mut cells: Vec<String> = text.iter().map(|s| s.to_string()).collect();
        cells.extend(values.iter().map(|&v| fmt_f64(v)));
        self.rows.push(cells.join(","));
    }

    pub fn render(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<String>,
}

/// Index of every file in an output bundle.
#[derive(Debug, Default)]
pub struct Bundle {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Bundle {
    pub fn new(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::data(format!("{}: {e}", root.display())))?;
        Ok(Bundle {
            root: root.to_path_buf(),
            entries: vec![],
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn table(&mut self, rel: &str, description: &str, table: &Table) -> CliResult<()> {
        write_text(&self.path(rel), &table.render())?;
        self.entries.push(ManifestEntry {
            file: rel.to_string(),
            description: description.to_string(),
            columns: table.columns.clone(),
        });
        Ok(())
    }

    pub fn text(
        &mut self,
        rel: &str,
        description: &str,
        text: &str,
        columns: Vec<String>,
    ) -> CliResult<()> {
        write_text(&self.path(rel), text)?;
        self.entries.push(ManifestEntry {
            file: rel.to_string(),
            description: description.to_string(),
            columns,
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, description: &str, value: &T) -> CliResult<()> {
        write_json(&self.path(rel), value)?;
        self.entries.push(ManifestEntry {
            file: rel.to_string(),
            description: description.to_string(),
            columns: vec![],
        });
        Ok(())
    }

    pub fn finish(self) -> CliResult<PathBuf> {
        let path = self.path("manifest.json");
        write_json(&path, &self.entries)?;
        Ok(path)
    }
}
