//! Permutation models `σ: Γ → Sym(d)` and their Hamming defects.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{default_capacity, GroupDescriptor, GroupWord};

/// Seeded generator used everywhere randomness is needed.
///
/// ChaCha with 8 rounds; the `u64` seed is expanded by `SeedableRng::seed_from_u64`.
/// Output is identical on every platform.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Like [`seeded_rng`] but on an independent stream, e.g. one per level.
pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A bijection of `{0, ..., d-1}` stored as its image list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let d = images.len();
        if d == 0 {
            return Err(Error::InvalidArgument("permutation degree must be >= 1".into()));
        }
        let mut seen = vec![false; d];
        for &i in &images {
            if i >= d || seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "images do not form a bijection of 0..{d}"
                )));
            }
            seen[i] = true;
        }
        Ok(Permutation { images })
    }

    pub fn identity(d: usize) -> Self {
        Permutation {
            images: (0..d).collect(),
        }
    }

    /// `j ↦ j + shift mod d`.
    pub fn rotation(d: usize, shift: i64) -> Self {
        let s = shift.rem_euclid(d as i64) as usize;
        Permutation {
            images: (0..d).map(|j| (j + s) % d).collect(),
        }
    }

    /// Swap `i` and `j`.
    pub fn transposition(d: usize, i: usize, j: usize) -> Self {
        let mut images: Vec<usize> = (0..d).collect();
        images.swap(i, j);
        Permutation { images }
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    #[inline]
    pub fn apply(&self, j: usize) -> usize {
        self.images[j]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// `(self ∘ other)(j) = self(other(j))`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        check_degree(self, other)?;
        Ok(Permutation {
            images: other.images.iter().map(|&j| self.images[j]).collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.images.len()];
        for (i, &j) in self.images.iter().enumerate() {
            inv[j] = i;
        }
        Permutation { images: inv }
    }

    /// Integer power by repeated squaring; negative exponents use the inverse.
    pub fn pow(&self, e: i64) -> Permutation {
        let mut base = if e < 0 { self.inverse() } else { self.clone() };
        let mut e = e.unsigned_abs();
        let mut acc = Permutation::identity(self.degree());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.compose(&base).expect("same degree");
            }
            e >>= 1;
            if e > 0 {
                base = base.compose(&base).expect("same degree");
            }
        }
        acc
    }

    /// Number of fixed points.
    pub fn fixed_points(&self) -> usize {
        self.images.iter().enumerate().filter(|(i, &j)| *i == j).count()
    }
}

fn check_degree(a: &Permutation, b: &Permutation) -> Result<()> {
    if a.degree() != b.degree() {
        return Err(Error::DegreeMismatch {
            left: a.degree(),
            right: b.degree(),
        });
    }
    Ok(())
}

/// `(1/d) |{j : σ(j) ≠ τ(j)}|`.
pub fn hamming_distance(sigma: &Permutation, tau: &Permutation) -> Result<f64> {
    check_degree(sigma, tau)?;
    let diff = sigma
        .images
        .iter()
        .zip(&tau.images)
        .filter(|(a, b)| a != b)
        .count();
    Ok(diff as f64 / sigma.degree() as f64)
}

/// One map `σ: Γ → Sym(d)`, determined by the images of the standard generators.
#[derive(Debug, Clone, Serialize)]
pub struct SoficLevel {
    group: GroupDescriptor,
    degree: usize,
    generator_images: Vec<Permutation>,
    #[serde(skip)]
    inverse_images: Vec<Permutation>,
}

impl SoficLevel {
    pub fn from_images(group: GroupDescriptor, generator_images: Vec<Permutation>) -> Result<Self> {
        group.validate()?;
        if generator_images.len() != group.num_generators() {
            return Err(Error::InvalidArgument(format!(
                "{group} needs {} generator images, got {}",
                group.num_generators(),
                generator_images.len()
            )));
        }
        let degree = generator_images[0].degree();
        for p in &generator_images {
            if p.degree() != degree {
                return Err(Error::DegreeMismatch {
                    left: degree,
                    right: p.degree(),
                });
            }
        }
        let inverse_images = generator_images.iter().map(|p| p.inverse()).collect();
        Ok(SoficLevel {
            group,
            degree,
            generator_images,
            inverse_images,
        })
    }

    pub fn group(&self) -> GroupDescriptor {
        self.group
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn generator_images(&self) -> &[Permutation] {
        &self.generator_images
    }

    /// `σ(s_1 ⋯ s_k) = σ(s_1) ∘ ⋯ ∘ σ(s_k)` over the normal form of the word,
    /// with `σ(e) = id` and `σ(a^{-1}) = σ(a)^{-1}`.
    /// Abelian coordinates are evaluated as `σ(a)^x σ(b)^y`.
    pub fn evaluate(&self, w: &GroupWord) -> Result<Permutation> {
        if w.group() != self.group {
            return Err(Error::GroupMismatch {
                left: self.group.to_string(),
                right: w.group().to_string(),
            });
        }
        if let Some(coords) = w.coords() {
            let mut acc = Permutation::identity(self.degree);
            for (g, &x) in coords.iter().enumerate() {
                acc = acc.compose(&self.generator_images[g].pow(x))?;
            }
            return Ok(acc);
        }
        let letters = w.free_letters().expect("free word");
        // right to left so each step is a single lookup per point
        let mut images: Vec<usize> = (0..self.degree).collect();
        for l in letters.iter().rev() {
            let p = if l.inverse {
                &self.inverse_images[l.generator]
            } else {
                &self.generator_images[l.generator]
            };
            for x in images.iter_mut() {
                *x = p.images[*x];
            }
        }
        Ok(Permutation { images })
    }

    /// Point image `σ(w)(j)` without materialising the whole permutation.
    pub fn apply_word(&self, w: &GroupWord, j: usize) -> Result<usize> {
        if let Some(letters) = w.free_letters() {
            if w.group() != self.group {
                return Err(Error::GroupMismatch {
                    left: self.group.to_string(),
                    right: w.group().to_string(),
                });
            }
            let mut x = j;
            for l in letters.iter().rev() {
                x = if l.inverse {
                    self.inverse_images[l.generator].images[x]
                } else {
                    self.generator_images[l.generator].images[x]
                };
            }
            return Ok(x);
        }
        Ok(self.evaluate(w)?.apply(j))
    }

    pub fn multiplicativity_defect(&self, s: &GroupWord, t: &GroupWord) -> Result<f64> {
        let st = self.evaluate(&s.multiply(t)?)?;
        let prod = self.evaluate(s)?.compose(&self.evaluate(t)?)?;
        hamming_distance(&st, &prod)
    }

    pub fn freeness_defect(&self, s: &GroupWord, t: &GroupWord) -> Result<f64> {
        hamming_distance(&self.evaluate(s)?, &self.evaluate(t)?)
    }
}

/// Rotation model of `Z` on `Z/n`: `σ(m) = + m mod n`.
pub fn folner_cyclic(n: usize) -> Result<SoficLevel> {
    if n == 0 {
        return Err(Error::InvalidArgument("level size must be >= 1".into()));
    }
    SoficLevel::from_images(GroupDescriptor::Integers, vec![Permutation::rotation(n, 1)])
}

/// Rotation model of `Z^2` on the `n × n` torus, point `(x, y)` at index `x + n y`.
pub fn folner_torus(n: usize) -> Result<SoficLevel> {
    if n == 0 {
        return Err(Error::InvalidArgument("torus side must be >= 1".into()));
    }
    let d = n * n;
    let a = (0..d).map(|i| (i % n + 1) % n + n * (i / n)).collect();
    let b = (0..d).map(|i| i % n + n * ((i / n + 1) % n)).collect();
    SoficLevel::from_images(
        GroupDescriptor::Integers2,
        vec![Permutation::new(a)?, Permutation::new(b)?],
    )
}

/// Block model of `Z/k` on `n = q k + r` points: left translation on `q` copies
/// of the group, identity on the `r` leftover points.
///
/// Point `(g, j)` of copy `j` sits at index `j k + g`; leftovers occupy `q k..n`.
pub fn finite_block(group: GroupDescriptor, n: usize) -> Result<SoficLevel> {
    let k = match group {
        GroupDescriptor::Cyclic { order } => order as usize,
        other => {
            return Err(Error::InvalidArgument(format!(
                "finite_block needs a cyclic group, got {other}"
            )))
        }
    };
    if n == 0 {
        return Err(Error::InvalidArgument("target degree must be >= 1".into()));
    }
    let q = n / k;
    let mut images: Vec<usize> = (0..n).collect();
    for j in 0..q {
        for g in 0..k {
            images[j * k + g] = j * k + (g + 1) % k;
        }
    }
    SoficLevel::from_images(group, vec![Permutation::new(images)?])
}

/// Independent uniform permutations for the generators of `F_n`.
pub fn random_free(group: GroupDescriptor, d: usize, seed: u64) -> Result<SoficLevel> {
    random_free_with_rng(group, d, &mut seeded_rng(seed))
}

pub fn random_free_with_rng(
    group: GroupDescriptor,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SoficLevel> {
    let rank = match group {
        GroupDescriptor::Free { rank } => rank,
        other => {
            return Err(Error::InvalidArgument(format!(
                "random_free needs a free group, got {other}"
            )))
        }
    };
    if d < 2 {
        return Err(Error::InvalidArgument("degree must be >= 2".into()));
    }
    let images = (0..rank)
        .map(|_| {
            let mut v: Vec<usize> = (0..d).collect();
            v.shuffle(rng);
            Permutation { images: v }
        })
        .collect();
    SoficLevel::from_images(group, images)
}

/// Coordinatewise action on `{0..d}^k`, degree `d^k`.
/// Tuple `(a_1, ..., a_k)` is encoded as `Σ a_i d^{i-1}`.
pub fn tensor_power(sigma: &SoficLevel, k: usize) -> Result<SoficLevel> {
    tensor_power_with_capacity(sigma, k, default_capacity())
}

pub fn tensor_power_with_capacity(sigma: &SoficLevel, k: usize, cap: usize) -> Result<SoficLevel> {
    if k == 0 {
        return Err(Error::InvalidArgument("tensor power must be >= 1".into()));
    }
    let d = sigma.degree;
    let big = (0..k).try_fold(1usize, |acc, _| acc.checked_mul(d));
    let big = match big {
        Some(b) if b <= cap => b,
        _ => {
            return Err(Error::Capacity {
                requested: big.unwrap_or(usize::MAX),
                cap,
            })
        }
    };
    let images = sigma
        .generator_images
        .iter()
        .map(|p| {
            let v = (0..big)
                .map(|mut x| {
                    let mut out = 0;
                    let mut place = 1;
                    for _ in 0..k {
                        out += p.images[x % d] * place;
                        x /= d;
                        place *= d;
                    }
                    out
                })
                .collect();
            Permutation { images: v }
        })
        .collect();
    SoficLevel::from_images(sigma.group, images)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefectKind {
    Multiplicativity,
    Freeness,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairDefect {
    pub left: GroupWord,
    pub right: GroupWord,
    pub defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DefectReport {
    pub degree: usize,
    pub multiplicativity: Vec<PairDefect>,
    pub freeness: Vec<PairDefect>,
}

#[derive(Serialize)]
struct DefectRow<'a> {
    pair: String,
    kind: &'a str,
    defect: f64,
}

impl DefectReport {
    pub fn max_multiplicativity(&self) -> f64 {
        self.multiplicativity.iter().map(|d| d.defect).fold(0.0, f64::max)
    }

    pub fn min_freeness(&self) -> f64 {
        self.freeness.iter().map(|d| d.defect).fold(1.0, f64::min)
    }

    pub fn mean_freeness(&self) -> f64 {
        if self.freeness.is_empty() {
            return 1.0;
        }
        self.freeness.iter().map(|d| d.defect).sum::<f64>() / self.freeness.len() as f64
    }

    /// CSV with columns `pair,kind,defect`; pairs are rendered `s | t`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let rows = self
            .multiplicativity
            .iter()
            .map(|d| (d, "multiplicativity"))
            .chain(self.freeness.iter().map(|d| (d, "freeness")));
        for (d, kind) in rows {
            w.serialize(DefectRow {
                pair: format!("{} | {}", d.left, d.right),
                kind,
                defect: d.defect,
            })
            .map_err(|e| Error::Serialization(e.to_string()))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Multiplicativity defect for every pair, freeness defect for every pair of
/// distinct elements.
pub fn defect_report(sigma: &SoficLevel, pairs: &[(GroupWord, GroupWord)]) -> Result<DefectReport> {
    let results: Vec<(PairDefect, Option<PairDefect>)> = pairs
        .par_iter()
        .map(|(s, t)| {
            let m = sigma.multiplicativity_defect(s, t)?;
            let f = if s != t {
                Some(PairDefect {
                    left: s.clone(),
                    right: t.clone(),
                    defect: sigma.freeness_defect(s, t)?,
                })
            } else {
                None
            };
            Ok((
                PairDefect {
                    left: s.clone(),
                    right: t.clone(),
                    defect: m,
                },
                f,
            ))
        })
        .collect::<Result<_>>()?;
    let mut multiplicativity = Vec::with_capacity(results.len());
    let mut freeness = Vec::new();
    for (m, f) in results {
        multiplicativity.push(m);
        freeness.extend(f);
    }
    Ok(DefectReport {
        degree: sigma.degree,
        multiplicativity,
        freeness,
    })
}
