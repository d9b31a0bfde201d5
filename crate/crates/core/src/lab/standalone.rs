//! Runs that do not go through a dimension pipeline: sofic defect checks for
//! the levels of a configuration, and ε-dimension brackets of a family file.
//!
//! Family file (TOML):
//!
//! ```toml
//! p = 2.0
//! epsilons = [0.1, 0.3]
//! vectors = [[1.0, 0.0], [0.6, 0.8]]
//! # imag = [[0.0, 0.0], [0.0, 0.0]]
//! ```

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banach::{lp_norm, Exponent, C64};
use crate::epsdim::{eps_dim_bracket, eps_dim_upper, EpsDimBracket};
use crate::error::{Error, Result};
use crate::lab::config::ExperimentConfig;
use crate::lab::report::SCHEMA;
use crate::sofic::{defect_report, DefectReport};

#[derive(Debug, Clone, Serialize)]
pub struct SoficCheckLevel {
    pub degree: usize,
    pub max_multiplicativity: f64,
    pub min_freeness: f64,
    pub mean_freeness: f64,
    pub defects: DefectReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SoficCheckReport {
    pub schema: &'static str,
    pub experiment: String,
    pub seed: u64,
    pub levels: Vec<SoficCheckLevel>,
}

/// Defects of every pair in `F × F` at every configured level.
pub fn sofic_check(c: &ExperimentConfig) -> Result<SoficCheckReport> {
    let f = c.f_set()?;
    let pairs: Vec<_> = f.iter().flat_map(|s| f.iter().map(move |t| (s.clone(), t.clone()))).collect();
    let levels = c
        .sorted_levels()
        .par_iter()
        .map(|&d| {
            let sigma = c.build_level(d)?;
            let r = defect_report(&sigma, &pairs)?;
            Ok(SoficCheckLevel {
                degree: sigma.degree(),
                max_multiplicativity: r.max_multiplicativity(),
                min_freeness: r.min_freeness(),
                mean_freeness: r.mean_freeness(),
                defects: r,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SoficCheckReport {
        schema: SCHEMA,
        experiment: c.id.clone(),
        seed: c.seed,
        levels,
    })
}

impl SoficCheckReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Columns `level_degree,pair,kind,defect`.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::from("level_degree,pair,kind,defect\n");
        for l in &self.levels {
            let body = l.defects.to_csv()?;
            for line in body.lines().skip(1) {
                out.push_str(&format!("{},{line}\n", l.degree));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyFile {
    pub p: Exponent,
    pub epsilons: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    #[serde(default)]
    pub imag: Option<Vec<Vec<f64>>>,
}

impl FamilyFile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let f: FamilyFile = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        f.validate()?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.vectors.is_empty() {
            return bad("vectors must be nonempty".into());
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return bad("epsilons must be nonempty and lie in (0,1)".into());
        }
        let d = self.vectors[0].len();
        if d == 0 || self.vectors.iter().any(|v| v.len() != d) {
            return bad("vectors must share a positive length".into());
        }
        if let Some(im) = &self.imag {
            if im.len() != self.vectors.len() || im.iter().any(|v| v.len() != d) {
                return bad("imag must have the shape of vectors".into());
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Vec<Vec<C64>> {
        self.vectors
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.iter()
                    .enumerate()
                    .map(|(j, &re)| C64::new(re, self.imag.as_ref().map_or(0.0, |im| im[i][j])))
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyEntry {
    pub epsilon: f64,
    pub bracket: EpsDimBracket,
    /// Largest residual of the witness subspace, recomputed.
    pub upper_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyReport {
    pub schema: &'static str,
    pub p: Exponent,
    pub ambient_dim: usize,
    pub size: usize,
    pub brackets: Vec<FamilyEntry>,
}

pub fn family_brackets(f: &FamilyFile) -> Result<FamilyReport> {
    let a = f.family();
    let brackets = f
        .epsilons
        .iter()
        .map(|&eps| {
            let w = eps_dim_upper(&a, eps, f.p)?;
            Ok(FamilyEntry {
                epsilon: eps,
                bracket: eps_dim_bracket(&a, eps, f.p)?,
                upper_residual: w.audit(&a, &|v| lp_norm(v, f.p)),
            })
        })
        .collect::<Result<_>>()?;
    Ok(FamilyReport {
        schema: SCHEMA,
        p: f.p,
        ambient_dim: a[0].len(),
        size: a.len(),
        brackets,
    })
}

impl FamilyReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Columns `epsilon,lower_dim,upper_dim,upper_residual`.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::from("epsilon,lower_dim,upper_dim,upper_residual\n");
        for b in &self.brackets {
            out.push_str(&format!("{},{},{},{}\n", b.epsilon, b.bracket.lower, b.bracket.upper, b.upper_residual));
        }
        Ok(out)
    }
}
