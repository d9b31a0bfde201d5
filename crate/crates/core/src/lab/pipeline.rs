//! Per-level pipelines: build the level, check witnesses, map them through
//! `α_S` and bracket the ε-dimension of the image.
//!
//! The image lives in `V_i^N` with the product norm
//! `ρ(f)^q = Σ_j 2^{-j} ‖f(j)‖^q`. Block `j` is scaled by `2^{-j/q}`, after which
//! `ρ(f) ≥ κ ‖f‖_2` with `κ` the l^p → l² factor of a block times the l^q → l²
//! factor across the supported blocks. An ε-containment in `ρ` is therefore an
//! `ε/κ`-containment in l², which the Hilbert-space lower bounds consume.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::json;

use crate::banach::{lp_norm, permute, random_unit_vector, random_unitary, Exponent, ProductNormSpec, C64};
use crate::cayley::{telescoping_residual, TruncatedCayleyGraph};
use crate::epsdim::{
    eps_dim_lower_sparse, l2_transfer_factor, EpsDimBracket, LowerMethod, NormalizedBracket, SparseVector,
    UpperMethod,
};
use crate::error::{Error, Result};
use crate::hom::{
    build_span, lp_witnesses, DefectPlan, FiniteRep, GeneratingSequence, HomCheck, Membership, ModelSpace,
    SchattenWitness,
};
use crate::lab::config::{ActionConfig, ExperimentConfig, XiChoice};
use crate::lab::report::{DimensionReport, EpsEntry, LevelReport, Rung, Summary, WitnessStats, SCHEMA};
use crate::sofic::{seeded_stream, SoficLevel};

/// Entries of a frame-rotated Schatten image at or below this size are dropped.
pub const CHOP: f64 = 1e-12;

/// Allowance for rounding in the frame rotation `M ↦ U* M U`.
pub const FRAME_SLACK: f64 = 1e-10;

/// Largest block length searched by the rotation pipeline.
pub const MAX_BLOCK: usize = 1_000_000;

/// Stream offset for the Haar frame of Schatten levels.
const FRAME_STREAM: u64 = 1 << 40;

/// Stream offset for audit samples of the rotation pipeline.
const AUDIT_STREAM: u64 = 1 << 41;

/// Dispatch on the action kind.
pub fn run(c: &ExperimentConfig) -> Result<DimensionReport> {
    match c.action {
        ActionConfig::RegularLp { .. } => run_lp_dimension(c),
        ActionConfig::FiniteGroupRep { .. } => run_finite_group(c),
        ActionConfig::ZRotation { .. } => run_z_upper_bound(c),
        ActionConfig::Betti { .. } => run_betti(c),
        ActionConfig::SchattenRegular { .. } => run_schatten(c),
    }
}

fn wrong_action(c: &ExperimentConfig, want: &str) -> Error {
    Error::Config(format!("pipeline {want} cannot run action {}", c.action.kind()))
}

/// A checked witness and its scaled `α_S` image.
#[derive(Debug, Clone)]
struct Candidate {
    check: HomCheck,
    alpha: SparseVector,
    /// `ρ`-norm of what sparsification dropped.
    slack: f64,
}

#[derive(Debug, Clone)]
struct WitnessLevel {
    degree: usize,
    /// `dim V_i`; also the length of one block.
    ambient_dim: usize,
    /// Blocks that can be nonzero and carry positive weight.
    blocks: usize,
    /// Length of the concatenated image, one block per generator.
    coords: usize,
    kappa: f64,
    candidates: Vec<Candidate>,
}

impl WitnessLevel {
    fn upper(&self) -> usize {
        self.blocks * self.ambient_dim
    }
}

/// `2^{-j/q}` for the 0-based block `k`.
fn block_scale(rho: &ProductNormSpec, k: usize) -> f64 {
    rho.weight(k + 1).powf(1.0 / rho.q)
}

fn supported_blocks(rho: &ProductNormSpec, generators: usize) -> usize {
    (0..generators).filter(|&k| rho.weight(k + 1) > 0.0).count()
}

/// `κ` with `ρ(f) ≥ κ ‖scaled f‖_2` when every block satisfies `‖x‖ ≥ κ_p ‖x‖_2`.
fn kappa(rho: &ProductNormSpec, kappa_p: f64, blocks: usize) -> f64 {
    if rho.q > 2.0 && blocks > 1 {
        kappa_p * (blocks as f64).powf(1.0 / rho.q - 0.5)
    } else {
        kappa_p
    }
}

fn scaled_sparse(blocks: &[Vec<C64>], rho: &ProductNormSpec) -> SparseVector {
    let mut out = Vec::new();
    for (k, v) in blocks.iter().enumerate() {
        let s = block_scale(rho, k);
        if s == 0.0 {
            continue;
        }
        let off = k * v.len();
        out.extend(v.iter().enumerate().filter(|(_, z)| **z != C64::new(0.0, 0.0)).map(|(i, z)| (off + i, z * s)));
    }
    out
}

fn lp_level(c: &ExperimentConfig, sigma: &SoficLevel, space: ModelSpace) -> Result<WitnessLevel> {
    let seq = GeneratingSequence::new(c.group, space)?;
    let span = build_span(&seq, &c.f_set()?, c.hom.m)?;
    let plan = DefectPlan::new(&span, sigma)?;
    let p = c.hom.p;
    let d = sigma.degree();
    let candidates = lp_witnesses(d, span.generators())
        .par_iter()
        .map(|w| Candidate {
            check: w.check(&span, &plan, p),
            alpha: scaled_sparse(&w.alpha(&span, &plan), &c.rho),
            slack: 0.0,
        })
        .collect();
    let blocks = supported_blocks(&c.rho, span.generators());
    Ok(WitnessLevel {
        degree: d,
        ambient_dim: d,
        blocks,
        coords: span.generators() * d,
        kappa: kappa(&c.rho, l2_transfer_factor(d, p), blocks),
        candidates,
    })
}

/// Witnesses `T_{u_a, u_b, j}` for the columns of a frame `U`; images are
/// stored in the frame, where `U*(u_a ⊗ ū_b)U = e_a ⊗ ē_b` up to rounding.
fn schatten_level(c: &ExperimentConfig, sigma: &SoficLevel, multiplicity: usize, xi: XiChoice) -> Result<WitnessLevel> {
    let seq = GeneratingSequence::new(c.group, ModelSpace::RegularLp { multiplicity })?;
    let span = build_span(&seq, &c.f_set()?, c.hom.m)?;
    let plan = DefectPlan::new(&span, sigma)?;
    let p = c.hom.p;
    let d = sigma.degree();
    let u = match xi {
        XiChoice::Haar => random_unitary(d, &mut seeded_stream(c.seed, FRAME_STREAM + d as u64)),
        XiChoice::Basis => DMatrix::identity(d, d),
    };
    let cols: Vec<Vec<C64>> = (0..d).map(|a| u.column(a).iter().copied().collect()).collect();
    let e = plan.word_image(span.identity_index());
    let framed: Vec<Vec<C64>> = cols
        .iter()
        .map(|x| {
            let moved = nalgebra::DVector::from_vec(permute(e, x)?);
            Ok((u.adjoint() * moved).iter().copied().collect())
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize, usize)> = (0..span.generators())
        .flat_map(|j| (0..d).flat_map(move |b| (0..d).map(move |a| (a, b, j))))
        .collect();
    let candidates = jobs
        .par_iter()
        .map(|&(a, b, j)| {
            let w = SchattenWitness::new(cols[a].clone(), cols[b].clone(), j)?;
            let check = w.check(&span, &plan, p)?;
            let s = block_scale(&c.rho, j);
            let (x, y) = (&framed[a], &framed[b]);
            let mut alpha = Vec::new();
            let mut dropped = 0.0;
            if s > 0.0 {
                for (cb, yb) in y.iter().enumerate() {
                    for (ra, xa) in x.iter().enumerate() {
                        let z = xa * yb.conj();
                        if z.norm() <= CHOP {
                            dropped += z.norm();
                        } else {
                            alpha.push((j * d * d + ra + d * cb, z * s));
                        }
                    }
                }
            }
            // the trace norm of the dropped part bounds every Schatten norm of it
            Ok(Candidate {
                check,
                alpha,
                slack: s * (dropped + FRAME_SLACK),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let blocks = supported_blocks(&c.rho, span.generators());
    Ok(WitnessLevel {
        degree: d,
        ambient_dim: d * d,
        blocks,
        coords: span.generators() * d * d,
        kappa: kappa(&c.rho, l2_transfer_factor(d, p), blocks),
        candidates,
    })
}

fn witness_stats(cands: &[Candidate]) -> WitnessStats {
    let mut max_defect = 0.0f64;
    let mut sum = 0.0;
    let mut max_norm = 0.0f64;
    for x in cands {
        max_defect = max_defect.max(x.check.defect);
        sum += x.check.defect;
        max_norm = max_norm.max(x.check.norm.upper);
    }
    WitnessStats {
        total: cands.len(),
        max_defect,
        mean_defect: if cands.is_empty() { 0.0 } else { sum / cands.len() as f64 },
        max_norm_upper: max_norm,
    }
}

fn fraction(passed: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        passed as f64 / total as f64
    }
}

fn evaluate(c: &ExperimentConfig, wl: &WitnessLevel) -> Result<LevelReport> {
    let upper = wl.upper();
    let mut rungs = Vec::new();
    for delta in c.deltas() {
        let mut passed = Vec::new();
        let (mut failed, mut undetermined) = (0, 0);
        for x in &wl.candidates {
            match x.check.classify(c.hom.norm_bound, delta) {
                Membership::Pass => passed.push(x),
                Membership::Fail => failed += 1,
                Membership::Undetermined => undetermined += 1,
            }
        }
        let family: Vec<SparseVector> = passed.iter().map(|x| x.alpha.clone()).collect();
        let mut brackets = Vec::new();
        for &eps in &c.hom.epsilons {
            let (lower, mut method) = if family.is_empty() {
                (0, LowerMethod::Trivial)
            } else {
                let radii: Vec<f64> = passed.iter().map(|x| (eps + x.slack) / wl.kappa).collect();
                eps_dim_lower_sparse(wl.coords, &family, &radii)?
            };
            if wl.kappa < 1.0 && lower > 0 {
                method = LowerMethod::Transfer;
            }
            let bracket = EpsDimBracket::new(lower, method, upper, UpperMethod::Coordinates)?;
            brackets.push(EpsEntry {
                epsilon: eps,
                normalized: NormalizedBracket::from_dims(lower, upper, wl.ambient_dim)?,
                bracket,
            });
        }
        rungs.push(Rung {
            delta,
            passed: passed.len(),
            failed,
            undetermined,
            pass_fraction: fraction(passed.len(), wl.candidates.len()),
            brackets,
        });
    }
    Ok(LevelReport {
        degree: wl.degree,
        ambient_dim: wl.ambient_dim,
        witnesses: Some(witness_stats(&wl.candidates)),
        rungs,
        details: serde_json::Value::Null,
        wall_ms: 0.0,
    })
}

fn run_levels<F>(c: &ExperimentConfig, level: F) -> Result<Vec<LevelReport>>
where
    F: Fn(usize) -> Result<LevelReport> + Sync,
{
    c.sorted_levels()
        .par_iter()
        .map(|&d| {
            let t = Instant::now();
            let mut r = level(d)?;
            r.wall_ms = t.elapsed().as_secs_f64() * 1e3;
            Ok(r)
        })
        .collect()
}

fn assemble(c: &ExperimentConfig, pipeline: &'static str, levels: Vec<LevelReport>, extra: serde_json::Value) -> DimensionReport {
    let summary: Summary = DimensionReport::summarize(&levels);
    DimensionReport {
        schema: SCHEMA,
        experiment: c.id.clone(),
        pipeline,
        seed: c.seed,
        config: c.clone(),
        levels,
        summary,
        extra,
    }
}

/// `l^p(Γ, C^n)` against the sofic levels: witness family `T_jk`, filtered by
/// the `(C, δ)` check, lower bound from the `α_S` images and upper bound from
/// the coordinate count.
pub fn run_lp_dimension(c: &ExperimentConfig) -> Result<DimensionReport> {
    let ActionConfig::RegularLp { multiplicity } = c.action else {
        return Err(wrong_action(c, "lp-dimension"));
    };
    let levels = run_levels(c, |d| {
        let sigma = c.build_level(d)?;
        evaluate(c, &lp_level(c, &sigma, ModelSpace::RegularLp { multiplicity })?)
    })?;
    Ok(assemble(c, "lp-dimension", levels, serde_json::Value::Null))
}

/// `l^p(Γ, C^n)` with Schatten targets `S^p(d)` and permutation unitaries;
/// normalized by `d²`.
pub fn run_schatten(c: &ExperimentConfig) -> Result<DimensionReport> {
    let ActionConfig::SchattenRegular { multiplicity, xi } = c.action else {
        return Err(wrong_action(c, "schatten"));
    };
    let levels = run_levels(c, |d| {
        let sigma = c.build_level(d)?;
        evaluate(c, &schatten_level(c, &sigma, multiplicity, xi)?)
    })?;
    Ok(assemble(c, "schatten", levels, serde_json::Value::Null))
}

fn constant_rungs(c: &ExperimentConfig, bracket: EpsDimBracket, ambient: usize) -> Result<Vec<Rung>> {
    let entry = |eps: f64| -> Result<EpsEntry> {
        Ok(EpsEntry {
            epsilon: eps,
            bracket,
            normalized: NormalizedBracket::from_dims(bracket.lower, bracket.upper, ambient)?,
        })
    };
    c.deltas()
        .into_iter()
        .map(|delta| {
            Ok(Rung {
                delta,
                passed: 0,
                failed: 0,
                undetermined: 0,
                pass_fraction: 1.0,
                brackets: c.hom.epsilons.iter().map(|&e| entry(e)).collect::<Result<_>>()?,
            })
        })
        .collect()
}

/// `Z/k` acting on `X = ⊕ χ_c`: dimension of the exactly equivariant maps
/// `X → C^d` per block level, against `dim X / k`.
pub fn run_finite_group(c: &ExperimentConfig) -> Result<DimensionReport> {
    let ActionConfig::FiniteGroupRep { ref characters } = c.action else {
        return Err(wrong_action(c, "finite-group"));
    };
    let order = c.group.order().ok_or_else(|| wrong_action(c, "finite-group"))?;
    let rep = FiniteRep::new(order, characters.clone())?;
    let dim_x = characters.len();
    let k = order as usize;
    let levels = run_levels(c, |d| {
        let sigma = c.build_level(d)?;
        let fixed = crate::hom::fixed_space_dimension(&sigma, &rep)?;
        let n = sigma.degree();
        let (q, r) = (n / k, n % k);
        let bracket = EpsDimBracket::new(fixed.rank, LowerMethod::Projection, fixed.rank + r, UpperMethod::Blocks)?;
        Ok(LevelReport {
            degree: n,
            ambient_dim: n,
            witnesses: None,
            rungs: constant_rungs(c, bracket, n)?,
            details: json!({
                "rank": fixed.rank,
                "trace": fixed.trace,
                "routes_agree": fixed.rank == fixed.trace,
                "q": q,
                "r": r,
                "block_estimate": dim_x * q + r,
            }),
            wall_ms: 0.0,
        })
    })?;
    let extra = json!({ "dim_x": dim_x, "order": k, "expected": dim_x as f64 / k as f64 });
    Ok(assemble(c, "finite-group", levels, extra))
}

/// Least `m ≤ MAX_BLOCK` with `|e^{i m j θ} − 1| < δ` for `1 ≤ j < k`.
pub fn rotation_block(theta: f64, k: usize, delta: f64) -> Result<usize> {
    (1..=MAX_BLOCK)
        .find(|&m| {
            (1..k).all(|j| {
                let phase = (m as f64 * j as f64 * theta).rem_euclid(std::f64::consts::TAU);
                (C64::from_polar(1.0, phase) - 1.0).norm() < delta
            })
        })
        .ok_or(Error::Capacity {
            requested: MAX_BLOCK + 1,
            cap: MAX_BLOCK,
        })
}

/// Block data of the piecewise-constant approximant on `Z/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct RotationBlocks {
    pub m: usize,
    pub k: usize,
    pub q: usize,
    pub r: usize,
    /// `q m + r`, or `n` when no full block fits.
    pub dim: usize,
}

impl RotationBlocks {
    pub fn new(n: usize, m: usize, k: usize) -> Self {
        let (q, r) = (n / (m * k), n % (m * k));
        RotationBlocks {
            m,
            k,
            q,
            r,
            dim: if q == 0 { n } else { q * m + r },
        }
    }

    /// `g(b mk + l + m j) = v(b mk + l)` on full blocks, `v` elsewhere.
    pub fn approximant(&self, v: &[C64]) -> Vec<C64> {
        let mut g = v.to_vec();
        let len = self.m * self.k;
        for b in 0..self.q {
            for l in 0..self.m {
                let base = v[b * len + l];
                for j in 1..self.k {
                    g[b * len + l + self.m * j] = base;
                }
            }
        }
        g
    }
}

/// `Σ_x |v(x) − g(x)|^p` and `Σ_{1 ≤ j < k} ‖v − σ(mj) v‖_p^p`.
fn rotation_audit(sigma: &SoficLevel, blocks: &RotationBlocks, v: &[C64], p: Exponent) -> Result<(f64, f64)> {
    let g = blocks.approximant(v);
    let pp = |x: f64| match p {
        Exponent::Finite(q) => x.powf(q),
        Exponent::Infinity => x,
    };
    let diff: Vec<C64> = v.iter().zip(&g).map(|(a, b)| a - b).collect();
    let lhs = pp(lp_norm(&diff, p));
    let gen = &sigma.generator_images()[0];
    let mut rhs = 0.0;
    for j in 1..blocks.k {
        let moved = permute(&gen.pow((blocks.m * j) as i64), v)?;
        let d: Vec<C64> = v.iter().zip(&moved).map(|(a, b)| a - b).collect();
        let n = lp_norm(&d, p);
        rhs = if p == Exponent::Infinity { f64::max(rhs, n) } else { rhs + pp(n) };
    }
    Ok((lhs, rhs))
}

/// `Z` acting on `C` by `e^{iθ}`: the upper bound `(q m + r)/n` from the block
/// approximant, valid once `(1 + C) k^{1/p} δ < ε`.
pub fn run_z_upper_bound(c: &ExperimentConfig) -> Result<DimensionReport> {
    let ActionConfig::ZRotation { angle, k, samples } = c.action else {
        return Err(wrong_action(c, "z-upper-bound"));
    };
    let p = c.hom.p;
    let deltas = c.deltas();
    let ms: Vec<usize> = deltas.iter().map(|&d| rotation_block(angle, k, d)).collect::<Result<_>>()?;
    let levels = run_levels(c, |d| {
        let sigma = c.build_level(d)?;
        let n = sigma.degree();
        let mut rungs = Vec::new();
        let mut details = Vec::new();
        for (&delta, &m) in deltas.iter().zip(&ms) {
            let blocks = RotationBlocks::new(n, m, k);
            let radius = (1.0 + c.hom.norm_bound) * (k as f64).powf(p.recip()) * delta;
            let mut worst = 0.0f64;
            let mut holds = true;
            if blocks.q > 0 {
                let mut rng = seeded_stream(c.seed, AUDIT_STREAM + n as u64);
                for s in 0..samples.max(1) {
                    let v: Vec<C64> = if s == 0 {
                        (0..n).map(|l| C64::from_polar(1.0, -angle * l as f64)).collect()
                    } else {
                        random_unit_vector(n, &mut rng)
                    };
                    let (lhs, rhs) = rotation_audit(&sigma, &blocks, &v, p)?;
                    holds &= lhs <= rhs * (1.0 + 1e-9) + 1e-12;
                    if rhs > 0.0 {
                        worst = worst.max(lhs / rhs);
                    }
                }
            }
            let mut brackets = Vec::new();
            for &eps in &c.hom.epsilons {
                let (upper, method) = if radius < eps {
                    (blocks.dim, UpperMethod::Blocks)
                } else {
                    (n, UpperMethod::Ambient)
                };
                let bracket = EpsDimBracket::new(0, LowerMethod::Trivial, upper, method)?;
                brackets.push(EpsEntry {
                    epsilon: eps,
                    normalized: NormalizedBracket::from_dims(0, upper, n)?,
                    bracket,
                });
            }
            let estimate = blocks.dim as f64 / n as f64;
            details.push(json!({
                "delta": delta,
                "blocks": blocks,
                "radius": radius,
                "estimate": estimate,
                "within_block_bound": estimate <= 1.0 / k as f64 + blocks.r as f64 / n as f64 + 1e-12 || blocks.q == 0,
                "audit": { "samples": if blocks.q > 0 { samples.max(1) } else { 0 }, "max_ratio": worst, "holds": holds },
            }));
            rungs.push(Rung {
                delta,
                passed: 0,
                failed: 0,
                undetermined: 0,
                pass_fraction: 1.0,
                brackets,
            });
        }
        Ok(LevelReport {
            degree: n,
            ambient_dim: n,
            witnesses: None,
            rungs,
            details: json!({ "rungs": details }),
            wall_ms: 0.0,
        })
    })?;
    Ok(assemble(c, "z-upper-bound", levels, json!({ "angle": angle, "k": k })))
}

/// Default telescoping radii `R−2, R−1, R`, keeping those `≥ 2`.
pub fn telescoping_radii(radius: usize, explicit: Option<&[usize]>) -> Vec<usize> {
    match explicit {
        Some(r) => r.to_vec(),
        None => (radius.saturating_sub(2)..=radius).filter(|&r| r >= 2).collect(),
    }
}

/// First `l^p` cohomology of `F_n`: lower bound `dim l^p(E) − dim l^p(Γ)`
/// through the exact sequence, upper bound `n − 1` generators, plus the
/// telescoping residuals of the density step.
pub fn run_betti(c: &ExperimentConfig) -> Result<DimensionReport> {
    let ActionConfig::Betti { radius, telescoping_radii: ref explicit } = c.action else {
        return Err(wrong_action(c, "betti"));
    };
    let n = c.group.num_generators();
    let levels = run_levels(c, |d| {
        let sigma = c.build_level(d)?;
        let edge = evaluate(c, &lp_level(c, &sigma, ModelSpace::EdgeSpace { rank: n })?)?;
        let vertex = evaluate(c, &lp_level(c, &sigma, ModelSpace::RegularLp { multiplicity: 1 })?)?;
        let deg = sigma.degree();
        let upper = (n - 1) * deg;
        let mut rungs = Vec::new();
        for (er, vr) in edge.rungs.iter().zip(&vertex.rungs) {
            let mut brackets = Vec::new();
            for (eb, vb) in er.brackets.iter().zip(&vr.brackets) {
                let lower = eb.bracket.lower.saturating_sub(vb.bracket.upper).min(upper);
                let method = if lower > 0 { LowerMethod::Subadditive } else { LowerMethod::Trivial };
                let bracket = EpsDimBracket::new(lower, method, upper, UpperMethod::Generators)?;
                brackets.push(EpsEntry {
                    epsilon: eb.epsilon,
                    normalized: NormalizedBracket::from_dims(lower, upper, deg)?,
                    bracket,
                });
            }
            rungs.push(Rung {
                brackets,
                ..er.clone()
            });
        }
        Ok(LevelReport {
            degree: deg,
            ambient_dim: deg,
            witnesses: edge.witnesses,
            rungs,
            details: json!({ "edge": edge.rungs, "vertex": vertex.rungs }),
            wall_ms: 0.0,
        })
    })?;
    let mut tele = Vec::new();
    if n >= 2 {
        let gens: Vec<usize> = (0..n - 1).collect();
        for r in telescoping_radii(radius, explicit.as_deref()) {
            let g = TruncatedCayleyGraph::new(n, r)?;
            tele.push(json!({ "radius": r, "residual": telescoping_residual(&g, n - 1, &gens)? }));
        }
    }
    let values: Vec<f64> = tele.iter().map(|t| t["residual"].as_f64().unwrap_or(f64::NAN)).collect();
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let extra = json!({ "telescoping": tele, "strictly_decreasing": decreasing });
    Ok(assemble(c, "betti", levels, extra))
}
