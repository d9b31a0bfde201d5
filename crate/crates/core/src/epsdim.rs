//! Certified brackets for the ε-dimension of finite vector families.
//!
//! A subspace `W` ε-contains `A` when every `a ∈ A` has some `w ∈ W` with
//! `‖a − w‖ < ε`; `d_ε(A)` is the least such `dim W`. Upper bounds come with an
//! explicit witness subspace. Lower bounds are Hilbert-space trace arguments.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_rational::Ratio;
use serde::{Serialize, Serializer};

use crate::banach::{lp_norm, Exponent, C64};
use crate::error::{Error, Result};

/// Rank threshold for pivoted Gram orthogonalisation.
pub const RANK_TOL: f64 = 1e-8;

/// Slack used when rounding real bounds up to integers.
const CEIL_SLACK: f64 = 1e-9;

fn ceil_safe(x: f64) -> usize {
    let c = (x - CEIL_SLACK).ceil();
    if c <= 0.0 {
        0
    } else {
        c as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerMethod {
    Trivial,
    KyFan,
    KyFanSubfamily,
    Trace,
    Transfer,
    /// Rank of an exact projection onto equivariant maps.
    Projection,
    /// `dim(V) − dim(W)` from a short exact sequence.
    Subadditive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpperMethod {
    Zero,
    Pca,
    Greedy,
    Ambient,
    Coordinates,
    /// Piecewise-constant approximant on explicit blocks.
    Blocks,
    /// Number of dynamical generators times the level dimension.
    Generators,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EpsDimBracket {
    pub lower: usize,
    pub upper: usize,
    pub lower_method: LowerMethod,
    pub upper_method: UpperMethod,
}

impl EpsDimBracket {
    pub fn new(
        lower: usize,
        lower_method: LowerMethod,
        upper: usize,
        upper_method: UpperMethod,
    ) -> Result<Self> {
        if lower > upper {
            return Err(Error::InvalidArgument(format!(
                "unsound bracket: lower {lower} > upper {upper}"
            )));
        }
        Ok(EpsDimBracket {
            lower,
            upper,
            lower_method,
            upper_method,
        })
    }

    pub fn contains(&self, x: usize) -> bool {
        self.lower <= x && x <= self.upper
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    Ok(())
}

fn ambient(a: &[Vec<C64>]) -> Result<usize> {
    let d = a.first().map_or(0, |v| v.len());
    if let Some(v) = a.iter().find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: v.len(),
        });
    }
    Ok(d)
}

/// A subspace that ε-contains the family, kept for audit.
#[derive(Debug, Clone)]
pub struct UpperWitness {
    pub dim: usize,
    pub method: UpperMethod,
    /// Orthonormal basis of `W` as columns.
    pub basis: DMatrix<C64>,
    /// Largest residual `‖a − P_W a‖` in the requested norm.
    pub max_residual: f64,
}

impl UpperWitness {
    /// Recompute every residual from scratch.
    pub fn audit(&self, a: &[Vec<C64>], norm: &dyn Fn(&[C64]) -> f64) -> f64 {
        a.iter()
            .map(|v| norm(residual(&self.basis, v).as_slice()))
            .fold(0.0, f64::max)
    }
}

fn residual(basis: &DMatrix<C64>, v: &[C64]) -> DVector<C64> {
    let v = DVector::from_column_slice(v);
    if basis.ncols() == 0 {
        return v;
    }
    let coef = basis.adjoint() * &v;
    v - basis * coef
}

/// Upper bound on `d_ε(A)` in the l^p norm.
///
/// `p = 2`: principal subspaces of increasing rank, stopping at the first rank
/// where every residual is below ε. Other `p`: greedy selection of the family
/// member with the largest residual, residuals of the orthogonal projection
/// measured in l^p.
pub fn eps_dim_upper(a: &[Vec<C64>], eps: f64, p: Exponent) -> Result<UpperWitness> {
    if p.is(2.0) {
        eps_dim_upper_pca(a, eps)
    } else {
        eps_dim_upper_greedy(a, eps, &|v| lp_norm(v, p))
    }
}

pub fn eps_dim_upper_pca(a: &[Vec<C64>], eps: f64) -> Result<UpperWitness> {
    check_eps(eps)?;
    let d = ambient(a)?;
    let l2 = |v: &[C64]| lp_norm(v, Exponent::TWO);
    let max0 = a.iter().map(|v| l2(v)).fold(0.0, f64::max);
    if max0 < eps {
        return Ok(UpperWitness {
            dim: 0,
            method: UpperMethod::Zero,
            basis: DMatrix::zeros(d, 0),
            max_residual: max0,
        });
    }
    let cols: Vec<C64> = a.iter().flatten().copied().collect();
    let m = DMatrix::from_column_slice(d, a.len(), &cols);
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let norms2: Vec<f64> = a.iter().map(|v| l2(v).powi(2)).collect();
    let mut captured = vec![0.0f64; a.len()];
    for (r, &idx) in order.iter().enumerate() {
        let col = u.column(idx);
        for (i, v) in a.iter().enumerate() {
            let c: C64 = col.iter().zip(v).map(|(x, y)| x.conj() * y).sum();
            captured[i] += c.norm_sqr();
        }
        let worst = norms2
            .iter()
            .zip(&captured)
            .map(|(n, c)| (n - c).max(0.0).sqrt())
            .fold(0.0, f64::max);
        if worst < eps {
            let basis = DMatrix::from_columns(
                &order[..=r].iter().map(|&k| u.column(k).into_owned()).collect::<Vec<_>>(),
            );
            let mut w = UpperWitness {
                dim: r + 1,
                method: UpperMethod::Pca,
                basis,
                max_residual: 0.0,
            };
            w.max_residual = w.audit(a, &l2);
            if w.max_residual < eps {
                return Ok(w);
            }
        }
    }
    // full span of the family always works
    eps_dim_upper_greedy(a, eps, &l2)
}

pub fn eps_dim_upper_greedy(
    a: &[Vec<C64>],
    eps: f64,
    norm: &dyn Fn(&[C64]) -> f64,
) -> Result<UpperWitness> {
    check_eps(eps)?;
    let d = ambient(a)?;
    let mut basis: Vec<DVector<C64>> = Vec::new();
    loop {
        let b = if basis.is_empty() {
            DMatrix::zeros(d, 0)
        } else {
            DMatrix::from_columns(&basis)
        };
        let res: Vec<DVector<C64>> = a.iter().map(|v| residual(&b, v)).collect();
        let norms: Vec<f64> = res.iter().map(|r| norm(r.as_slice())).collect();
        let (worst, &wn) = match norms.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)) {
            Some(x) => x,
            None => (0, &0.0),
        };
        if wn < eps {
            return Ok(UpperWitness {
                dim: basis.len(),
                method: if basis.is_empty() { UpperMethod::Zero } else { UpperMethod::Greedy },
                basis: b,
                max_residual: wn,
            });
        }
        let r = &res[worst];
        let rn = r.norm();
        if rn <= RANK_TOL || basis.len() == d {
            // numerically inside the span already; nothing left to add
            return Ok(UpperWitness {
                dim: basis.len(),
                method: UpperMethod::Greedy,
                basis: b,
                max_residual: wn,
            });
        }
        basis.push(r / C64::new(rn, 0.0));
    }
}

/// Hermitian eigenvalues in decreasing order.
pub fn hermitian_eigenvalues(g: &DMatrix<C64>) -> Vec<f64> {
    if g.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(g.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Eigenvalues of a Gram matrix, split into the connected components of its
/// sparsity pattern so that disjointly supported families stay cheap.
pub fn gram_eigenvalues(g: &DMatrix<C64>) -> Vec<f64> {
    let n = g.nrows();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::with_capacity(n);
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut members = vec![start];
        comp[start] = start;
        let mut i = 0;
        while i < members.len() {
            let u = members[i];
            for v in 0..n {
                if comp[v] == usize::MAX && g[(u, v)] != C64::new(0.0, 0.0) {
                    comp[v] = start;
                    members.push(v);
                }
            }
            i += 1;
        }
        if members.len() == 1 {
            out.push(g[(start, start)].re);
        } else {
            let sub = DMatrix::from_fn(members.len(), members.len(), |a, b| g[(members[a], members[b])]);
            out.extend(hermitian_eigenvalues(&sub));
        }
    }
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// Least `r` with `Σ_{top r} λ ≥ target`. Eigenvalues must be sorted decreasingly.
///
/// If `W` has dimension `r` then `Tr(P_W G) ≤ Σ_{top r} λ(G)`, so any ε-containing
/// `W` must reach the target.
pub fn ky_fan_rank(eigs_desc: &[f64], target: f64) -> usize {
    if target <= CEIL_SLACK {
        return 0;
    }
    let mut acc = 0.0;
    for (r, &l) in eigs_desc.iter().enumerate() {
        acc += l.max(0.0);
        if acc >= target - CEIL_SLACK {
            return r + 1;
        }
    }
    eigs_desc.len()
}

/// Normalised family `b_i = a_i / ‖a_i‖` and per-member radii `r_i / ‖a_i‖`;
/// zero vectors are dropped (they impose nothing).
fn normalise(a: &[Vec<C64>], radii: &[f64]) -> (Vec<Vec<C64>>, Vec<f64>) {
    let mut b = Vec::new();
    let mut r = Vec::new();
    for (v, &rad) in a.iter().zip(radii) {
        let n = lp_norm(v, Exponent::TWO);
        if n > 0.0 {
            b.push(v.iter().map(|z| z / n).collect());
            r.push(rad / n);
        }
    }
    (b, r)
}

fn gram(a: &[Vec<C64>]) -> DMatrix<C64> {
    let k = a.len();
    let d = a.first().map_or(0, |v| v.len());
    let nnz: usize = a.iter().map(|v| v.iter().filter(|z| **z != C64::new(0.0, 0.0)).count()).sum();
    let mut g = DMatrix::zeros(k, k);
    if nnz * 8 <= k * d {
        // sparse families: accumulate over the members touching each coordinate
        let mut by_coord: Vec<Vec<(usize, C64)>> = vec![Vec::new(); d];
        for (i, v) in a.iter().enumerate() {
            for (c, z) in v.iter().enumerate() {
                if *z != C64::new(0.0, 0.0) {
                    by_coord[c].push((i, *z));
                }
            }
        }
        for members in &by_coord {
            for &(i, x) in members {
                for &(j, y) in members {
                    g[(i, j)] += x.conj() * y;
                }
            }
        }
        return g;
    }
    for i in 0..k {
        for j in i..k {
            let z: C64 = a[i].iter().zip(&a[j]).map(|(x, y)| x.conj() * y).sum();
            g[(i, j)] = z;
            g[(j, i)] = z.conj();
        }
    }
    g
}

/// Gram matrix with no off-diagonal entries.
fn is_diagonal(g: &DMatrix<C64>) -> bool {
    let n = g.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || g[(i, j)] == C64::new(0.0, 0.0)))
}

/// Unit-vector target `Σ (1 − min(1, r_i²))`.
pub fn ky_fan_target(radii: &[f64]) -> f64 {
    radii.iter().map(|r| 1.0 - (r * r).min(1.0)).sum()
}

/// Pivoted Gram orthogonalisation order; returns indices and squared residual
/// norms at selection time.
fn pivot_order(b: &[Vec<C64>]) -> Vec<(usize, f64)> {
    let k = b.len();
    let d = b.first().map_or(0, |v| v.len());
    let mut res: Vec<DVector<C64>> = b.iter().map(|v| DVector::from_column_slice(v)).collect();
    let mut used = vec![false; k];
    let mut out = Vec::new();
    for _ in 0..k.min(d) {
        let best = (0..k)
            .filter(|&i| !used[i])
            .map(|i| (i, res[i].norm_squared()))
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)));
        let Some((i, n2)) = best else { break };
        if n2 <= RANK_TOL * RANK_TOL {
            break;
        }
        used[i] = true;
        out.push((i, n2));
        let q = &res[i] / C64::new(n2.sqrt(), 0.0);
        for j in 0..k {
            if !used[j] {
                let c = q.dotc(&res[j]);
                res[j] -= &q * c;
            }
        }
    }
    out
}

/// Lower bound on `d_ε(A)` for the l² norm with a separate radius per member:
/// each `a_i` must be within `radii[i]` of `W`.
///
/// Maximum of the Ky Fan bound on the whole family, on pivoted near-orthonormal
/// subfamilies, and (when the Gram matrix is a contraction) the trace bound
/// `⌈Tr G − k·max r⌉` for compressions of orthonormal systems.
pub fn eps_dim_lower_weighted(a: &[Vec<C64>], radii: &[f64]) -> Result<(usize, LowerMethod)> {
    if a.len() != radii.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: radii.len(),
        });
    }
    if radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    ambient(a)?;
    let mut best = (0usize, LowerMethod::Trivial);
    let (b, r) = normalise(a, radii);
    if b.is_empty() {
        return Ok(best);
    }
    let g = gram(&b);
    let eigs = gram_eigenvalues(&g);
    let kf = ky_fan_rank(&eigs, ky_fan_target(&r));
    if kf > best.0 {
        best = (kf, LowerMethod::KyFan);
    }

    // an orthogonal family is its own best subfamily
    let piv = if is_diagonal(&g) { Vec::new() } else { pivot_order(&b) };
    for thresh in [1.0 - RANK_TOL, 0.75, 0.5] {
        let idx: Vec<usize> = piv.iter().take_while(|(_, n2)| *n2 >= thresh).map(|(i, _)| *i).collect();
        if idx.is_empty() || idx.len() == b.len() {
            continue;
        }
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |x, y| g[(idx[x], idx[y])]);
        let rs: Vec<f64> = idx.iter().map(|&i| r[i]).collect();
        let v = ky_fan_rank(&gram_eigenvalues(&sub), ky_fan_target(&rs));
        if v > best.0 {
            best = (v, LowerMethod::KyFanSubfamily);
        }
    }

    // compression of an orthonormal system: unnormalised Gram must be ≤ I
    let g_raw = gram(a);
    let raw_eigs = gram_eigenvalues(&g_raw);
    if raw_eigs.first().copied().unwrap_or(0.0) <= 1.0 + 1e-12 {
        let tr: f64 = (0..a.len()).map(|i| g_raw[(i, i)].re).sum();
        let rmax = radii.iter().copied().fold(0.0, f64::max);
        if rmax < 1.0 {
            let t = trace_bound(a.len(), tr, rmax);
            if t > best.0 {
                best = (t, LowerMethod::Trace);
            }
        }
    }
    Ok(best)
}

/// Sparse vector in `C^dim`: `(coordinate, value)` pairs.
pub type SparseVector = Vec<(usize, C64)>;

/// [`eps_dim_lower_weighted`] for sparse families. Pairwise orthogonal
/// families are settled from the norms alone; anything else is densified.
pub fn eps_dim_lower_sparse(dim: usize, a: &[SparseVector], radii: &[f64]) -> Result<(usize, LowerMethod)> {
    if a.len() != radii.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: radii.len(),
        });
    }
    if let Some(&(c, _)) = a.iter().flatten().find(|(c, _)| *c >= dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: c + 1,
        });
    }
    let mut owner: Vec<Option<usize>> = vec![None; dim];
    let mut orthogonal = true;
    'scan: for (i, v) in a.iter().enumerate() {
        for &(c, z) in v {
            if z == C64::new(0.0, 0.0) {
                continue;
            }
            match owner[c] {
                Some(o) if o != i => {
                    orthogonal = false;
                    break 'scan;
                }
                _ => owner[c] = Some(i),
            }
        }
    }
    if !orthogonal {
        let dense: Vec<Vec<C64>> = a
            .iter()
            .map(|v| {
                let mut out = vec![C64::new(0.0, 0.0); dim];
                for &(c, z) in v {
                    out[c] += z;
                }
                out
            })
            .collect();
        return eps_dim_lower_weighted(&dense, radii);
    }
    if radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    let norms2: Vec<f64> = a.iter().map(|v| v.iter().map(|(_, z)| z.norm_sqr()).sum()).collect();
    let r: Vec<f64> = norms2
        .iter()
        .zip(radii)
        .filter(|(n2, _)| **n2 > 0.0)
        .map(|(n2, rad)| rad / n2.sqrt())
        .collect();
    let mut best = (0usize, LowerMethod::Trivial);
    let kf = ky_fan_rank(&vec![1.0; r.len()], ky_fan_target(&r));
    if kf > best.0 {
        best = (kf, LowerMethod::KyFan);
    }
    if norms2.iter().copied().fold(0.0, f64::max) <= 1.0 + 1e-12 {
        let rmax = radii.iter().copied().fold(0.0, f64::max);
        if rmax < 1.0 {
            let t = trace_bound(a.len(), norms2.iter().sum(), rmax);
            if t > best.0 {
                best = (t, LowerMethod::Trace);
            }
        }
    }
    Ok(best)
}

/// Lower bound on `d_ε(A)` in l² with a uniform radius.
pub fn eps_dim_lower_trace(a: &[Vec<C64>], eps: f64) -> Result<usize> {
    check_eps(eps)?;
    Ok(eps_dim_lower_weighted(a, &vec![eps; a.len()])?.0)
}

/// `⌈−kε + Tr(P_V P)⌉`, clamped at zero.
pub fn trace_bound(k: usize, trace: f64, eps: f64) -> usize {
    ceil_safe(trace - k as f64 * eps)
}

/// `⌈k(1 − ε²)⌉` for `k` orthonormal vectors.
pub fn orthonormal_bound(k: usize, eps: f64) -> usize {
    ceil_safe(k as f64 * (1.0 - eps * eps))
}

/// Factor `c` with `‖v‖_p ≥ c ‖v‖_2` in dimension `d`.
pub fn l2_transfer_factor(d: usize, p: Exponent) -> f64 {
    if p.recip() >= 0.5 {
        1.0
    } else {
        (d as f64).powf(p.recip() - 0.5)
    }
}

/// Bracket for `d_ε(A)` in l^p. The lower side transfers the l² bound through
/// `‖·‖_p ≥ c ‖·‖_2`, so an ε-containment in l^p is an `ε/c`-containment in l².
pub fn eps_dim_bracket(a: &[Vec<C64>], eps: f64, p: Exponent) -> Result<EpsDimBracket> {
    check_eps(eps)?;
    let d = ambient(a)?;
    let up = eps_dim_upper(a, eps, p)?;
    let c = l2_transfer_factor(d, p);
    let (lo, mut method) = eps_dim_lower_weighted(a, &vec![eps / c; a.len()])?;
    if !p.is(2.0) && lo > 0 {
        method = LowerMethod::Transfer;
    }
    let (upper, upper_method) = if up.dim <= d { (up.dim, up.method) } else { (d, UpperMethod::Ambient) };
    EpsDimBracket::new(lo, method, upper, upper_method)
}

/// `κ(ε, α) = 1 − (log α − log 4 − log(2+4ε)) / log(ε/(2+4ε))`, clamped to `[0, 1]`.
pub fn packing_lower_bound(eps: f64, alpha: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0,1), got {eps}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    let s = 2.0 + 4.0 * eps;
    let k = 1.0 - (alpha.ln() - 4f64.ln() - s.ln()) / (eps / s).ln();
    Ok(k.clamp(0.0, 1.0))
}

fn ser_ratio<S: Serializer>(r: &Ratio<u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(&format_args!("{}/{}", r.numer(), r.denom()))
}

/// A bracket divided by the ambient dimension of the level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizedBracket {
    #[serde(serialize_with = "ser_ratio")]
    pub lower_exact: Ratio<u64>,
    #[serde(serialize_with = "ser_ratio")]
    pub upper_exact: Ratio<u64>,
    pub lower: f64,
    pub upper: f64,
}

impl NormalizedBracket {
    pub fn from_dims(lower: usize, upper: usize, ambient: usize) -> Result<Self> {
        if ambient == 0 {
            return Err(Error::InvalidArgument("ambient dimension must be >= 1".into()));
        }
        let lo = Ratio::new(lower as u64, ambient as u64);
        let hi = Ratio::new(upper as u64, ambient as u64);
        Ok(NormalizedBracket {
            lower_exact: lo,
            upper_exact: hi,
            lower: lower as f64 / ambient as f64,
            upper: upper as f64 / ambient as f64,
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// `d_ε` bracket of `A` divided by `dim V_i` (`d` for l^p levels, `d²` for Schatten levels).
pub fn normalized_eps_dim(
    a: &[Vec<C64>],
    eps: f64,
    p: Exponent,
    ambient_dim: usize,
) -> Result<NormalizedBracket> {
    if a.is_empty() {
        return NormalizedBracket::from_dims(0, 0, ambient_dim);
    }
    let b = eps_dim_bracket(a, eps, p)?;
    NormalizedBracket::from_dims(b.lower, b.upper, ambient_dim)
}
