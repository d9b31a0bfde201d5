//! TOML experiment configuration.
//!
//! ```toml
//! id = "lp-f2"
//! seed = 7
//!
//! [group]
//! kind = "free"
//! rank = 2
//!
//! [action]
//! kind = "regular-lp"
//! multiplicity = 1
//!
//! [approximation]
//! kind = "random"
//! levels = [100, 200, 400]
//!
//! [hom]
//! p = 2.0
//! f_radius = 1
//! m = 1
//! delta = 0.1
//! epsilons = [0.1]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::banach::{Exponent, ProductNormSpec};
use crate::error::{Error, Result};
use crate::group::{ball, GroupDescriptor, GroupWord};
use crate::sofic::{finite_block, folner_cyclic, folner_torus, random_free_with_rng, seeded_stream, tensor_power, SoficLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiChoice {
    /// Columns of a seeded Haar unitary.
    Haar,
    /// Standard basis vectors.
    Basis,
}

fn default_xi() -> XiChoice {
    XiChoice::Haar
}

fn default_samples() -> usize {
    8
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ActionConfig {
    RegularLp {
        #[serde(default = "default_one")]
        multiplicity: usize,
    },
    FiniteGroupRep {
        characters: Vec<i64>,
    },
    ZRotation {
        /// Rotation angle θ of `1 ∈ Z` acting on `C`.
        angle: f64,
        k: usize,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    Betti {
        radius: usize,
        #[serde(default)]
        telescoping_radii: Option<Vec<usize>>,
    },
    SchattenRegular {
        #[serde(default = "default_one")]
        multiplicity: usize,
        #[serde(default = "default_xi")]
        xi: XiChoice,
    },
}

impl ActionConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ActionConfig::RegularLp { .. } => "regular-lp",
            ActionConfig::FiniteGroupRep { .. } => "finite-group-rep",
            ActionConfig::ZRotation { .. } => "z-rotation",
            ActionConfig::Betti { .. } => "betti",
            ActionConfig::SchattenRegular { .. } => "schatten-regular",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApproximationKind {
    /// Independent uniform permutations per generator (free groups).
    Random,
    /// Rotations of `Z/d`, or of `(Z/n)²` with `d = n²`.
    Folner,
    /// Block quotient levels for `Z/k`.
    Block,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproximationConfig {
    pub kind: ApproximationKind,
    pub levels: Vec<usize>,
    /// Tensor power applied to every level.
    #[serde(default = "default_one")]
    pub power: usize,
}

fn default_norm_bound() -> f64 {
    1.0
}

fn default_rungs() -> usize {
    3
}

fn default_p() -> Exponent {
    Exponent::TWO
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomConfig {
    #[serde(default = "default_p")]
    pub p: Exponent,
    /// `F` is the ball of this radius in the standard generators.
    pub f_radius: usize,
    pub m: usize,
    pub delta: f64,
    /// `C` in `‖T‖ ≤ C`.
    #[serde(default = "default_norm_bound")]
    pub norm_bound: f64,
    /// Refinement schedule: rung `r` uses `δ / 2^r`.
    #[serde(default = "default_rungs")]
    pub rungs: usize,
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub group: GroupDescriptor,
    pub action: ActionConfig,
    pub approximation: ApproximationConfig,
    pub hom: HomConfig,
    #[serde(default)]
    pub rho: ProductNormSpec,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(s).map_err(|e| bad(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Read and validate; an unreadable file is a configuration error.
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(bad("id must be nonempty"));
        }
        self.group.validate().map_err(|e| bad(e.to_string()))?;
        self.rho.validate().map_err(|e| bad(e.to_string()))?;
        let h = &self.hom;
        if !(h.delta > 0.0 && h.delta.is_finite()) {
            return Err(bad(format!("delta must be positive, got {}", h.delta)));
        }
        if h.epsilons.is_empty() {
            return Err(bad("epsilons must be nonempty"));
        }
        if let Some(e) = h.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(bad(format!("epsilon entries must lie in (0,1), got {e}")));
        }
        if h.m == 0 {
            return Err(bad("m must be >= 1"));
        }
        if h.rungs == 0 {
            return Err(bad("rungs must be >= 1"));
        }
        if !(h.norm_bound > 0.0 && h.norm_bound.is_finite()) {
            return Err(bad("norm_bound must be positive"));
        }
        let a = &self.approximation;
        if a.levels.is_empty() {
            return Err(bad("levels must be nonempty"));
        }
        if a.levels.contains(&0) {
            return Err(bad("levels must be positive"));
        }
        if a.power == 0 {
            return Err(bad("power must be >= 1"));
        }
        match (a.kind, self.group) {
            (ApproximationKind::Random, g) if !g.is_free() => {
                return Err(bad(format!("random approximations need a free group, got {g}")))
            }
            (ApproximationKind::Folner, GroupDescriptor::Integers) => {}
            (ApproximationKind::Folner, GroupDescriptor::Integers2) => {
                if let Some(d) = a.levels.iter().find(|&&d| (d as f64).sqrt().round().powi(2) as usize != d) {
                    return Err(bad(format!("Z^2 levels must be perfect squares, got {d}")));
                }
            }
            (ApproximationKind::Folner, g) => return Err(bad(format!("Folner levels need Z or Z^2, got {g}"))),
            (ApproximationKind::Block, GroupDescriptor::Cyclic { .. }) => {}
            (ApproximationKind::Block, g) => return Err(bad(format!("block levels need Z/k, got {g}"))),
            _ => {}
        }
        match &self.action {
            ActionConfig::RegularLp { multiplicity } | ActionConfig::SchattenRegular { multiplicity, .. } => {
                if *multiplicity == 0 {
                    return Err(bad("multiplicity must be >= 1"));
                }
            }
            ActionConfig::FiniteGroupRep { characters } => {
                if !matches!(self.group, GroupDescriptor::Cyclic { .. }) {
                    return Err(bad("finite-group-rep needs a cyclic group"));
                }
                if characters.is_empty() {
                    return Err(bad("characters must be nonempty"));
                }
            }
            ActionConfig::ZRotation { angle, k, .. } => {
                if self.group != GroupDescriptor::Integers {
                    return Err(bad("z-rotation needs the group Z"));
                }
                if !angle.is_finite() {
                    return Err(bad("angle must be finite"));
                }
                if *k == 0 {
                    return Err(bad("k must be >= 1"));
                }
            }
            ActionConfig::Betti { radius, telescoping_radii } => {
                if !matches!(self.group, GroupDescriptor::Free { .. }) {
                    return Err(bad("betti needs a free group"));
                }
                if *radius < 2 {
                    return Err(bad("betti radius must be >= 2"));
                }
                if telescoping_radii.as_ref().is_some_and(|r| r.iter().any(|&x| x < 2)) {
                    return Err(bad("telescoping radii must be >= 2"));
                }
            }
        }
        Ok(())
    }

    /// `F`: the ball of radius `f_radius` in the standard generating set.
    pub fn f_set(&self) -> Result<Vec<GroupWord>> {
        ball(self.group, &self.group.standard_generating_set(), self.hom.f_radius)
    }

    /// Refinement schedule `δ, δ/2, …`.
    pub fn deltas(&self) -> Vec<f64> {
        (0..self.hom.rungs).map(|r| self.hom.delta / 2f64.powi(r as i32)).collect()
    }

    /// Levels sorted by degree with duplicates removed.
    pub fn sorted_levels(&self) -> Vec<usize> {
        let mut l = self.approximation.levels.clone();
        l.sort_unstable();
        l.dedup();
        l
    }

    /// The sofic level for base degree `d`, seeded from `(seed, d)`.
    pub fn build_level(&self, d: usize) -> Result<SoficLevel> {
        let base = match self.approximation.kind {
            ApproximationKind::Random => {
                let mut rng = seeded_stream(self.seed, d as u64);
                random_free_with_rng(self.group, d, &mut rng)?
            }
            ApproximationKind::Folner => match self.group {
                GroupDescriptor::Integers2 => folner_torus((d as f64).sqrt().round() as usize)?,
                _ => folner_cyclic(d)?,
            },
            ApproximationKind::Block => finite_block(self.group, d)?,
        };
        if self.approximation.power > 1 {
            tensor_power(&base, self.approximation.power)
        } else {
            Ok(base)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
id = "t"
seed = 3
[group]
kind = "free"
rank = 2
[action]
kind = "regular-lp"
[approximation]
kind = "random"
levels = [20, 10]
[hom]
f_radius = 1
m = 1
delta = 0.1
epsilons = [0.1, 0.05]
"#;

    #[test]
    fn parse_defaults() {
        let c = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_eq!(c.hom.p, Exponent::TWO);
        assert_eq!(c.hom.norm_bound, 1.0);
        assert_eq!(c.hom.rungs, 3);
        assert_eq!(c.rho, ProductNormSpec::default());
        assert_eq!(c.action, ActionConfig::RegularLp { multiplicity: 1 });
        assert_eq!(c.sorted_levels(), vec![10, 20]);
        assert_eq!(c.deltas(), vec![0.1, 0.05, 0.025]);
        assert_eq!(c.f_set().unwrap().len(), 5);
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_bad_values() {
        for (from, to) in [
            ("delta = 0.1", "delta = 0.0"),
            ("epsilons = [0.1, 0.05]", "epsilons = [1.5]"),
            ("epsilons = [0.1, 0.05]", "epsilons = []"),
            ("levels = [20, 10]", "levels = []"),
            ("m = 1", "m = 0"),
            ("kind = \"random\"", "kind = \"block\""),
            ("kind = \"regular-lp\"", "kind = \"z-rotation\"\nangle = 1.0\nk = 4"),
            ("rank = 2", "rank = 2\nextra = 1"),
            ("f_radius = 1", "f_radius = 1\np = 0.5"),
        ] {
            let s = BASE.replace(from, to);
            let e = ExperimentConfig::from_toml_str(&s).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{to}: {e:?}");
        }
        assert!(matches!(
            ExperimentConfig::load(Path::new("/nonexistent/cfg.toml")),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn levels_are_deterministic() {
        let c = ExperimentConfig::from_toml_str(BASE).unwrap();
        let a = c.build_level(10).unwrap();
        let b = c.build_level(10).unwrap();
        assert_eq!(a.generator_images(), b.generator_images());
        let d = c.build_level(20).unwrap();
        assert_eq!(d.degree(), 20);
    }
}
