//! Report types and their CSV / JSON persistence.
//!
//! JSON (`schema = "v1"`):
//!
//! ```text
//! { schema, experiment, pipeline, seed, config: {…},
//!   levels: [ { degree, ambient_dim, witnesses?, rungs: [ { delta, pass counts,
//!               brackets: [ { epsilon, bracket, normalized } ] } ], details } ],
//!   summary: { bracket: [lo, hi], largest_level: [lo, hi], epsilon, rung } }
//! ```
//!
//! Wall-clock times are kept out of the JSON report and written to a sibling
//! `*.timing.json`; the CSV carries them per row.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::epsdim::{EpsDimBracket, NormalizedBracket};
use crate::error::{Error, Result};
use crate::lab::config::ExperimentConfig;

pub const SCHEMA: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsEntry {
    pub epsilon: f64,
    pub bracket: EpsDimBracket,
    pub normalized: NormalizedBracket,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessStats {
    pub total: usize,
    pub max_defect: f64,
    pub mean_defect: f64,
    pub max_norm_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rung {
    pub delta: f64,
    pub passed: usize,
    pub failed: usize,
    pub undetermined: usize,
    pub pass_fraction: f64,
    pub brackets: Vec<EpsEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelReport {
    pub degree: usize,
    /// `dim V_i`.
    pub ambient_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<WitnessStats>,
    pub rungs: Vec<Rung>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
    #[serde(skip)]
    pub wall_ms: f64,
}

impl LevelReport {
    /// Last rung: the finest `δ`.
    pub fn finest(&self) -> &Rung {
        self.rungs.last().expect("at least one rung")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    /// Max over levels of each end of the normalized bracket.
    pub bracket: [f64; 2],
    pub largest_level: [f64; 2],
    pub epsilon: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionReport {
    pub schema: &'static str,
    pub experiment: String,
    pub pipeline: &'static str,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub levels: Vec<LevelReport>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

impl DimensionReport {
    /// Summary for the first ε at the finest rung.
    pub fn summarize(levels: &[LevelReport]) -> Summary {
        let first = |l: &LevelReport| l.finest().brackets[0].normalized;
        let lo = levels.iter().map(|l| first(l).lower).fold(f64::NEG_INFINITY, f64::max);
        let hi = levels.iter().map(|l| first(l).upper).fold(f64::NEG_INFINITY, f64::max);
        let last = levels.last().expect("at least one level");
        let nb = first(last);
        Summary {
            bracket: [lo, hi],
            largest_level: [nb.lower, nb.upper],
            epsilon: last.finest().brackets[0].epsilon,
            delta: last.finest().delta,
        }
    }

    pub fn largest_level(&self) -> &LevelReport {
        self.levels.last().expect("at least one level")
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// One row per level and ε, at the finest rung.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record([
            "experiment_id",
            "level_degree",
            "epsilon",
            "lower_dim",
            "upper_dim",
            "normalized_lower",
            "normalized_upper",
            "witness_pass_fraction",
            "wall_ms",
        ])
        .map_err(ser)?;
        for l in &self.levels {
            let r = l.finest();
            for b in &r.brackets {
                w.write_record([
                    self.experiment.clone(),
                    l.degree.to_string(),
                    b.epsilon.to_string(),
                    b.bracket.lower.to_string(),
                    b.bracket.upper.to_string(),
                    b.normalized.lower.to_string(),
                    b.normalized.upper.to_string(),
                    r.pass_fraction.to_string(),
                    format!("{:.3}", l.wall_ms),
                ])
                .map_err(ser)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn timing_json(&self) -> Result<String> {
        let t: Vec<serde_json::Value> = self
            .levels
            .iter()
            .map(|l| serde_json::json!({ "degree": l.degree, "wall_ms": l.wall_ms }))
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "experiment": self.experiment, "levels": t }))
            .map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Writes `path` (JSON), `path.with_extension("csv")` and
    /// `path.with_extension("timing.json")`, each atomically.
    pub fn write(&self, path: &Path) -> Result<Vec<PathBuf>> {
        let json = self.to_json()?;
        let csv = self.to_csv()?;
        let timing = self.timing_json()?;
        let paths = sibling_paths(path);
        write_all_atomic(&[(&paths[0], json.as_bytes()), (&paths[1], csv.as_bytes()), (&paths[2], timing.as_bytes())])?;
        Ok(paths.to_vec())
    }
}

/// `[report.json, report.csv, report.timing.json]`.
pub fn sibling_paths(path: &Path) -> [PathBuf; 3] {
    [
        path.to_path_buf(),
        path.with_extension("csv"),
        path.with_extension("timing.json"),
    ]
}

/// Write each file atomically; if one fails, remove those already written.
pub fn write_all_atomic(files: &[(&Path, &[u8])]) -> Result<()> {
    for (i, (path, bytes)) in files.iter().enumerate() {
        if let Err(e) = write_atomic(path, bytes) {
            for (done, _) in &files[..i] {
                let _ = std::fs::remove_file(done);
            }
            return Err(e);
        }
    }
    Ok(())
}

/// Write to a temporary file in the target directory, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(io)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io)
}
