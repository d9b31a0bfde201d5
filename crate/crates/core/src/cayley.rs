//! Edge calculus on the radius-`R` ball of the Cayley tree of `F_n`.
//!
//! Every non-root vertex `v` owns exactly one edge, the one to its parent, and
//! that edge is stored with the tree orientation parent → child. Edge `i`
//! belongs to vertex `i + 1`. Operators zero-pad outside the ball.

use indexmap::IndexSet;
use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use serde::Serialize;

use crate::banach::{lp_norm, Exponent, C64};
use crate::error::{Error, Result};
use crate::group::{ball, GroupDescriptor, GroupWord, Letter};

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

#[derive(Debug, Clone)]
pub struct TruncatedCayleyGraph {
    rank: usize,
    radius: usize,
    vertices: IndexSet<GroupWord>,
    depth: Vec<usize>,
    /// `parent[v]` for `v ≥ 1`; `parent[0]` is unused.
    parent: Vec<usize>,
    /// Letter `l` with `child = parent · l`.
    step: Vec<Letter>,
    neighbors: Vec<Vec<usize>>,
}

impl TruncatedCayleyGraph {
    pub fn new(rank: usize, radius: usize) -> Result<Self> {
        let group = GroupDescriptor::free(rank)?;
        let words = ball(group, &group.standard_generating_set(), radius)?;
        let vertices: IndexSet<GroupWord> = words.into_iter().collect();
        let n = vertices.len();
        let mut depth = vec![0; n];
        let mut parent = vec![0; n];
        let mut step = vec![Letter::new(0, false); n];
        let mut neighbors = vec![Vec::new(); n];
        for (v, w) in vertices.iter().enumerate().skip(1) {
            let letters = w.free_letters().expect("free word");
            let last = *letters.last().expect("non-root vertex");
            let pw = crate::group::reduce(&letters[..letters.len() - 1], group)?;
            let p = vertices.get_index_of(&pw).expect("ball is prefix closed");
            depth[v] = letters.len();
            parent[v] = p;
            step[v] = last;
            neighbors[v].push(p);
            neighbors[p].push(v);
        }
        Ok(TruncatedCayleyGraph {
            rank,
            radius,
            vertices,
            depth,
            parent,
            step,
            neighbors,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn vertex(&self, i: usize) -> &GroupWord {
        &self.vertices[i]
    }

    pub fn vertex_index(&self, w: &GroupWord) -> Option<usize> {
        self.vertices.get_index_of(w)
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    /// All `2n` neighbours present.
    pub fn is_interior(&self, v: usize) -> bool {
        self.depth[v] < self.radius
    }

    /// `(parent, child)` vertex indices of edge `e`.
    pub fn edge_endpoints(&self, e: usize) -> (usize, usize) {
        (self.parent[e + 1], e + 1)
    }

    /// Shell of an edge: depth of its child.
    pub fn edge_shell(&self, e: usize) -> usize {
        self.depth[e + 1]
    }

    /// Generator index `j` of the edge, which is `{x, x a_j}` for some `x`.
    pub fn edge_generator(&self, e: usize) -> usize {
        self.step[e + 1].generator
    }

    /// `+1` when the stored orientation is `(x, x a_j)`, `−1` when it is `(x a_j, x)`.
    pub fn edge_sign(&self, e: usize) -> f64 {
        if self.step[e + 1].inverse {
            -1.0
        } else {
            1.0
        }
    }

    /// Edge index of `{x, x a_j}` with the sign relating `𝓔_{(x, x a_j)}` to the stored orientation.
    pub fn cayley_edge(&self, x: &GroupWord, j: usize) -> Option<(usize, f64)> {
        let y = x.multiply(&x.group().generator(j).ok()?).ok()?;
        let xi = self.vertex_index(x)?;
        let yi = self.vertex_index(&y)?;
        if yi != 0 && self.parent[yi] == xi {
            Some((yi - 1, 1.0))
        } else if xi != 0 && self.parent[xi] == yi {
            Some((xi - 1, -1.0))
        } else {
            None
        }
    }

    /// Shell sizes `|{v : |v| = k}|` for `k = 0..=R`.
    pub fn shell_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.radius + 1];
        for &d in &self.depth {
            s[d] += 1;
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct G<'a> {
            group: String,
            radius: usize,
            vertices: Vec<&'a GroupWord>,
            edges: Vec<[&'a GroupWord; 2]>,
        }
        let g = G {
            group: format!("F{}", self.rank),
            radius: self.radius,
            vertices: self.vertices.iter().collect(),
            edges: (0..self.num_edges())
                .map(|e| {
                    let (p, c) = self.edge_endpoints(e);
                    [&self.vertices[p], &self.vertices[c]]
                })
                .collect(),
        };
        serde_json::to_value(g).expect("plain data")
    }
}

/// Antisymmetric edge function; `values[e]` is the value on the stored orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFunction {
    pub values: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexFunction {
    pub values: Vec<C64>,
}

impl EdgeFunction {
    pub fn zeros(g: &TruncatedCayleyGraph) -> Self {
        EdgeFunction {
            values: vec![zero(); g.num_edges()],
        }
    }

    /// `𝓔_{(x, x a_j)}`.
    pub fn basis(g: &TruncatedCayleyGraph, x: &GroupWord, j: usize) -> Result<Self> {
        let (e, s) = g
            .cayley_edge(x, j)
            .ok_or_else(|| Error::InvalidArgument(format!("edge ({x}, {x}*a_{j}) not in ball")))?;
        let mut f = EdgeFunction::zeros(g);
        f.values[e] = C64::new(s, 0.0);
        Ok(f)
    }

    pub fn norm(&self, p: Exponent) -> f64 {
        lp_norm(&self.values, p)
    }

    pub fn inner(&self, other: &EdgeFunction) -> C64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum()
    }

    /// `{"edges": [[from, to], ...], "values": [[re, im], ...]}`.
    pub fn to_json(&self, g: &TruncatedCayleyGraph) -> serde_json::Value {
        let edges: Vec<[String; 2]> = (0..g.num_edges())
            .map(|e| {
                let (p, c) = g.edge_endpoints(e);
                [g.vertex(p).to_string(), g.vertex(c).to_string()]
            })
            .collect();
        let values: Vec<[f64; 2]> = self.values.iter().map(|z| [z.re, z.im]).collect();
        serde_json::json!({ "edges": edges, "values": values })
    }
}

impl VertexFunction {
    pub fn zeros(g: &TruncatedCayleyGraph) -> Self {
        VertexFunction {
            values: vec![zero(); g.num_vertices()],
        }
    }

    pub fn delta(g: &TruncatedCayleyGraph, v: usize) -> Self {
        let mut f = VertexFunction::zeros(g);
        f.values[v] = C64::new(1.0, 0.0);
        f
    }

    pub fn norm(&self, p: Exponent) -> f64 {
        lp_norm(&self.values, p)
    }

    pub fn inner(&self, other: &VertexFunction) -> C64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum()
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// `(δg)(x, y) = g(y) − g(x)` on every stored edge.
pub fn coboundary(g: &TruncatedCayleyGraph, f: &VertexFunction) -> Result<EdgeFunction> {
    check_len(g.num_vertices(), f.values.len())?;
    Ok(EdgeFunction {
        values: (0..g.num_edges())
            .map(|e| {
                let (p, c) = g.edge_endpoints(e);
                f.values[c] - f.values[p]
            })
            .collect(),
    })
}

/// Transpose of [`coboundary`]:
/// `(∂f)(x) = Σ_j f(x a_j^{-1}, x) − Σ_j f(x, x a_j)`, net inflow at `x`.
pub fn boundary(g: &TruncatedCayleyGraph, f: &EdgeFunction) -> Result<VertexFunction> {
    check_len(g.num_edges(), f.values.len())?;
    let mut out = VertexFunction::zeros(g);
    for (e, &x) in f.values.iter().enumerate() {
        let (p, c) = g.edge_endpoints(e);
        out.values[c] += x;
        out.values[p] -= x;
    }
    Ok(out)
}

/// `(Ag)(x) = (1/2n) Σ_{y ~ x} g(y)`, neighbours outside the ball count as zero.
pub fn random_walk_operator(g: &TruncatedCayleyGraph, f: &VertexFunction) -> Result<VertexFunction> {
    check_len(g.num_vertices(), f.values.len())?;
    let w = 1.0 / (2 * g.rank) as f64;
    Ok(VertexFunction {
        values: g
            .neighbors
            .iter()
            .map(|nb| nb.iter().map(|&y| f.values[y]).sum::<C64>() * w)
            .collect(),
    })
}

/// Largest eigenvalue magnitude of a real symmetric operator by power iteration
/// on its square, started from the all-ones vector. Converged when successive
/// Rayleigh quotients of the square differ by less than `tolerance`.
fn power_norm(
    n: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    iterations: usize,
    tolerance: f64,
) -> Result<f64> {
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut last = f64::NAN;
    let mut change = f64::INFINITY;
    for _ in 0..iterations {
        let y = apply(&apply(&x));
        let lambda: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ny == 0.0 {
            return Ok(0.0);
        }
        x = y.into_iter().map(|v| v / ny).collect();
        change = (lambda - last).abs();
        last = lambda;
        if change < tolerance {
            return Ok(lambda.max(0.0).sqrt());
        }
    }
    Err(Error::Convergence {
        iterations,
        last: last.max(0.0).sqrt(),
        change,
    })
}

/// Power-iteration estimate of `‖A‖` on the radius-`R` ball of `F_n`.
pub fn spectral_gap_estimate(rank: usize, radius: usize, iterations: usize, tolerance: f64) -> Result<f64> {
    if radius < 2 {
        return Err(Error::InvalidArgument("radius must be >= 2".into()));
    }
    let g = TruncatedCayleyGraph::new(rank, radius)?;
    let w = 1.0 / (2 * rank) as f64;
    power_norm(
        g.num_vertices(),
        |x| g.neighbors.iter().map(|nb| nb.iter().map(|&y| x[y]).sum::<f64>() * w).collect(),
        iterations,
        tolerance,
    )
}

/// Same estimate for `Z` with generators `±1` on `[−R, R]`.
pub fn spectral_gap_estimate_integers(radius: usize, iterations: usize, tolerance: f64) -> Result<f64> {
    let n = 2 * radius + 1;
    power_norm(
        n,
        |x| {
            (0..n)
                .map(|i| {
                    let l = if i > 0 { x[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                    0.5 * (l + r)
                })
                .collect()
        },
        iterations,
        tolerance,
    )
}

#[derive(Debug, Clone)]
pub struct HodgeDecomposition {
    pub harmonic: EdgeFunction,
    pub potential: VertexFunction,
    /// `‖L g − ∂f‖ / ‖∂f‖` on the solve region.
    pub solver_residual: f64,
    /// `‖f − harmonic − δ(potential)‖_2`.
    pub reconstruction_residual: f64,
    /// `max |∂(harmonic)|` on the solve region.
    pub harmonic_boundary: f64,
    pub iterations: usize,
}

/// Vertices at depth `≤ R − 2`: the potential lives here.
fn solve_region(g: &TruncatedCayleyGraph) -> Vec<usize> {
    (0..g.num_vertices())
        .filter(|&v| g.depth[v] + 2 <= g.radius)
        .collect()
}

/// Maximum iteration count of the Hodge solver, `10 |V|`.
pub fn hodge_max_iterations(g: &TruncatedCayleyGraph) -> usize {
    10 * g.num_vertices()
}

/// Split `f = h + δg` with `∂h = 0` at every vertex of depth `≤ R − 2` and
/// `g` supported there. `f` must vanish on edges reaching the outer shell.
///
/// `g` solves `∂δ g = ∂f` on that region by conjugate gradients with relative
/// tolerance `tolerance`; `h ⊥ δg` because `⟨h, δg⟩ = ⟨∂h, g⟩ = 0`.
pub fn hodge_decompose(g: &TruncatedCayleyGraph, f: &EdgeFunction, tolerance: f64) -> Result<HodgeDecomposition> {
    check_len(g.num_edges(), f.values.len())?;
    if g.radius < 2 {
        return Err(Error::InvalidArgument("radius must be >= 2".into()));
    }
    for e in 0..g.num_edges() {
        if g.edge_shell(e) == g.radius && f.values[e] != zero() {
            let (p, c) = g.edge_endpoints(e);
            return Err(Error::SupportTouchesBoundary(format!("({}, {})", g.vertex(p), g.vertex(c))));
        }
    }
    let region = solve_region(g);
    let n = g.num_vertices();
    let mut in_region = vec![false; n];
    for &v in &region {
        in_region[v] = true;
    }
    let df = boundary(g, f)?;
    let b: Vec<C64> = region.iter().map(|&v| df.values[v]).collect();
    let apply = |x: &[C64]| -> Vec<C64> {
        let mut full = VertexFunction::zeros(g);
        for (i, &v) in region.iter().enumerate() {
            full.values[v] = x[i];
        }
        let l = boundary(g, &coboundary(g, &full).expect("sizes")).expect("sizes");
        region.iter().map(|&v| l.values[v]).collect()
    };
    let max_iter = hodge_max_iterations(g);
    let (x, iterations, rel) = conjugate_gradient(apply, &b, tolerance, max_iter)?;
    let mut potential = VertexFunction::zeros(g);
    for (i, &v) in region.iter().enumerate() {
        potential.values[v] = x[i];
    }
    let dg = coboundary(g, &potential)?;
    let harmonic = EdgeFunction {
        values: f.values.iter().zip(&dg.values).map(|(a, b)| a - b).collect(),
    };
    let recon: Vec<C64> = (0..f.values.len())
        .map(|e| f.values[e] - harmonic.values[e] - dg.values[e])
        .collect();
    let dh = boundary(g, &harmonic)?;
    let harmonic_boundary = region.iter().map(|&v| dh.values[v].norm()).fold(0.0, f64::max);
    Ok(HodgeDecomposition {
        harmonic,
        potential,
        solver_residual: rel,
        reconstruction_residual: lp_norm(&recon, Exponent::TWO),
        harmonic_boundary,
        iterations,
    })
}

/// Conjugate gradients for a Hermitian positive-definite operator.
/// Returns the solution, the iteration count and the final relative residual.
fn conjugate_gradient(
    apply: impl Fn(&[C64]) -> Vec<C64>,
    b: &[C64],
    tolerance: f64,
    max_iter: usize,
) -> Result<(Vec<C64>, usize, f64)> {
    let bn = lp_norm(b, Exponent::TWO);
    let mut x = vec![zero(); b.len()];
    if bn == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let dot = |u: &[C64], v: &[C64]| -> C64 { u.iter().zip(v).map(|(a, b)| a.conj() * b).sum() };
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r).re;
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap).re;
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..x.len() {
            x[i] += p[i] * alpha;
            r[i] -= ap[i] * alpha;
        }
        let rr_new = dot(&r, &r).re;
        if rr_new.sqrt() <= tolerance * bn {
            // recompute the true residual rather than trusting the recursion
            let ax = apply(&x);
            let res: Vec<C64> = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
            let rel = lp_norm(&res, Exponent::TWO) / bn;
            if rel <= tolerance * 10.0 {
                return Ok((x, it, rel));
            }
        }
        let beta = rr_new / rr;
        for i in 0..p.len() {
            p[i] = r[i] + p[i] * beta;
        }
        rr = rr_new;
    }
    Err(Error::Convergence {
        iterations: max_iter,
        last: rr.sqrt() / bn,
        change: rr.sqrt() / bn,
    })
}

/// Sign of the harmonic generator on the subtree below a first letter:
/// `+` under `a`, `b`, `−` under `a^{-1}`, `b^{-1}`.
fn generator_sign(g: &TruncatedCayleyGraph, child: usize) -> i64 {
    let first = g.vertex(child).free_letters().expect("free")[0];
    if first.inverse {
        -1
    } else {
        1
    }
}

fn check_f2(g: &TruncatedCayleyGraph) -> Result<()> {
    if g.rank != 2 {
        return Err(Error::InvalidArgument(format!(
            "the harmonic generator is defined on F2, got F{}",
            g.rank
        )));
    }
    Ok(())
}

/// Harmonic generator on the stored orientation: a shell-`k` edge carries
/// `±3^{-(k-1)}`, starting from `𝓔_{(e,a)} + 𝓔_{(e,b)} + 𝓔_{(a^{-1},e)} + 𝓔_{(b^{-1},e)}`
/// and splitting each value equally among the three outgoing edges.
pub fn harmonic_generator(g: &TruncatedCayleyGraph) -> Result<EdgeFunction> {
    check_f2(g)?;
    Ok(EdgeFunction {
        values: (0..g.num_edges())
            .map(|e| {
                let c = e + 1;
                let s = generator_sign(g, c) as f64;
                C64::new(s * 3f64.powi(-(g.depth[c] as i32 - 1)), 0.0)
            })
            .collect(),
    })
}

/// Exact rational values of [`harmonic_generator`].
pub fn harmonic_generator_exact(g: &TruncatedCayleyGraph) -> Result<Vec<Ratio<i64>>> {
    check_f2(g)?;
    Ok((0..g.num_edges())
        .map(|e| {
            let c = e + 1;
            Ratio::new(generator_sign(g, c), 3i64.pow(g.depth[c] as u32 - 1))
        })
        .collect())
}

/// [`boundary`] over exact rationals.
pub fn boundary_exact(g: &TruncatedCayleyGraph, f: &[Ratio<i64>]) -> Result<Vec<Ratio<i64>>> {
    check_len(g.num_edges(), f.len())?;
    let mut out = vec![Ratio::from_integer(0); g.num_vertices()];
    for (e, &x) in f.iter().enumerate() {
        let (p, c) = g.edge_endpoints(e);
        out[c] += x;
        out[p] -= x;
    }
    Ok(out)
}

/// `Σ_{k=1..K} 4·3^{k-1}·3^{-p(k-1)}`: the l^p norm to the p of the harmonic
/// generator through shell `K`, from the shell counts.
pub fn harmonic_norm_partial_sum(p: f64, shells: usize) -> f64 {
    (1..=shells)
        .map(|k| 4.0 * 3f64.powi(k as i32 - 1) * 3f64.powf(-p * (k as f64 - 1.0)))
        .sum()
}

/// `4 / (1 − 3^{1−p})`, the limit of [`harmonic_norm_partial_sum`] for `p > 1`.
pub fn harmonic_norm_limit(p: f64) -> f64 {
    4.0 / (1.0 - 3f64.powf(1.0 - p))
}

/// l² distance from `𝓔_{(e, a_target)}` to the span of `δχ_v` (`v` interior)
/// and every `𝓔_{(x, x a_j)}` in the ball with `j ∈ generator_set`.
pub fn telescoping_residual(g: &TruncatedCayleyGraph, target: usize, generator_set: &[usize]) -> Result<f64> {
    if target >= g.rank || generator_set.iter().any(|&j| j >= g.rank) {
        return Err(Error::InvalidArgument("generator index out of range".into()));
    }
    if g.radius < 2 {
        return Err(Error::InvalidArgument("radius must be >= 2".into()));
    }
    let m = g.num_edges();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for v in 0..g.num_vertices() {
        if g.is_interior(v) {
            let dv = coboundary(g, &VertexFunction::delta(g, v))?;
            cols.push(DVector::from_iterator(m, dv.values.iter().map(|z| z.re)));
        }
    }
    for e in 0..m {
        if generator_set.contains(&g.edge_generator(e)) {
            let mut c = DVector::zeros(m);
            c[e] = 1.0;
            cols.push(c);
        }
    }
    let e0 = g.identity_index();
    let t = EdgeFunction::basis(g, g.vertex(e0), target)?;
    let t = DVector::from_iterator(m, t.values.iter().map(|z| z.re));
    if cols.is_empty() {
        return Ok(t.norm());
    }
    let a = DMatrix::from_columns(&cols);
    let svd = a.svd(true, false);
    let u = svd.u.expect("requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut proj = DVector::zeros(m);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > 1e-10 * smax {
            let col = u.column(k);
            proj += col * col.dot(&t);
        }
    }
    Ok((t - proj).norm())
}

impl TruncatedCayleyGraph {
    fn identity_index(&self) -> usize {
        0
    }
}

/// `(Af)(x) = Σ_{j=1..|x|} f(γ_x(j−1), γ_x(j))` along the geodesic from `e`.
pub fn geodesic_integral(g: &TruncatedCayleyGraph, f: &EdgeFunction) -> Result<VertexFunction> {
    check_len(g.num_edges(), f.values.len())?;
    let mut out = VertexFunction::zeros(g);
    // BFS order puts every parent before its children
    for v in 1..g.num_vertices() {
        out.values[v] = out.values[g.parent[v]] + f.values[v - 1];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::free_ball_size;
    use crate::sofic::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn graph(r: usize) -> TruncatedCayleyGraph {
        TruncatedCayleyGraph::new(2, r).unwrap()
    }

    fn w(g: &TruncatedCayleyGraph, s: &str) -> GroupWord {
        GroupWord::parse(GroupDescriptor::Free { rank: g.rank() }, s).unwrap()
    }

    fn random_vertex(g: &TruncatedCayleyGraph, seed: u64, interior_only: bool) -> VertexFunction {
        let mut rng = seeded_rng(seed);
        VertexFunction {
            values: (0..g.num_vertices())
                .map(|v| {
                    if interior_only && !g.is_interior(v) {
                        zero()
                    } else {
                        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    }
                })
                .collect(),
        }
    }

    fn random_edge(g: &TruncatedCayleyGraph, seed: u64, max_shell: usize) -> EdgeFunction {
        let mut rng = seeded_rng(seed);
        EdgeFunction {
            values: (0..g.num_edges())
                .map(|e| {
                    if g.edge_shell(e) <= max_shell {
                        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    } else {
                        zero()
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn tree_shape() {
        for rank in [1, 2, 3] {
            for r in 0..=5 {
                let g = TruncatedCayleyGraph::new(rank, r).unwrap();
                assert_eq!(g.num_edges() + 1, g.num_vertices());
                assert_eq!(g.num_vertices() as u128, free_ball_size(rank, r));
                let shells = g.shell_sizes();
                for k in 1..=r {
                    let expect = 2 * rank * (2 * rank - 1).pow(k as u32 - 1);
                    assert_eq!(shells[k], expect);
                }
            }
        }
    }

    #[test]
    fn coboundary_examples() {
        let g = graph(1);
        let c = VertexFunction {
            values: vec![C64::new(2.5, -1.0); g.num_vertices()],
        };
        assert!(coboundary(&g, &c).unwrap().values.iter().all(|z| *z == zero()));
        let d = coboundary(&g, &VertexFunction::delta(&g, 0)).unwrap();
        assert_eq!(d.values.len(), 4);
        assert!(d.values.iter().all(|z| *z == C64::new(-1.0, 0.0)));
        // in Cayley orientation: outgoing from e along a, b is −1, incoming from a^-1, b^-1 is +1
        let e = g.vertex(0).clone();
        for j in 0..2 {
            let (idx, s) = g.cayley_edge(&e, j).unwrap();
            assert_eq!(d.values[idx].re * s, -1.0);
            let (idx, s) = g.cayley_edge(&w(&g, &format!("{}^-1", ["a", "b"][j])), j).unwrap();
            assert_eq!(d.values[idx].re * s, 1.0);
        }
    }

    #[test]
    fn boundary_examples() {
        let g = graph(3);
        let e = g.vertex(0).clone();
        let f = EdgeFunction::basis(&g, &e, 0).unwrap();
        let b = boundary(&g, &f).unwrap();
        let a = g.vertex_index(&w(&g, "a")).unwrap();
        assert_eq!(b.values[0], C64::new(-1.0, 0.0));
        assert_eq!(b.values[a], C64::new(1.0, 0.0));
        assert_eq!(b.values.iter().filter(|z| **z != zero()).count(), 2);
    }

    #[test]
    fn random_walk_examples() {
        let g = graph(3);
        let out = random_walk_operator(&g, &VertexFunction::delta(&g, 0)).unwrap();
        for v in 0..g.num_vertices() {
            let expect = if g.depth(v) == 1 { 0.25 } else { 0.0 };
            assert_eq!(out.values[v].re, expect);
        }
        let ones = VertexFunction {
            values: vec![C64::new(1.0, 0.0); g.num_vertices()],
        };
        let out = random_walk_operator(&g, &ones).unwrap();
        for v in 0..g.num_vertices() {
            if g.is_interior(v) {
                assert!((out.values[v].re - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn laplacian_identity_on_basis() {
        let g = graph(4);
        for v in 0..g.num_vertices() {
            let x = VertexFunction::delta(&g, v);
            let l = boundary(&g, &coboundary(&g, &x).unwrap()).unwrap();
            let a = random_walk_operator(&g, &x).unwrap();
            for u in 0..g.num_vertices() {
                if g.is_interior(u) {
                    let rhs = (x.values[u] - a.values[u]) * 4.0;
                    assert!((l.values[u] - rhs).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn spectral_gap_examples() {
        let mut prev = 0.0;
        for r in [2, 4, 6, 8] {
            let s = spectral_gap_estimate(2, r, 10_000, 1e-12).unwrap();
            assert!(s >= prev && s < 0.9, "R={r}: {s}");
            prev = s;
        }
        // ball eigenvalue oracle: dense symmetric eigensolver at R = 4
        let g = graph(4);
        let n = g.num_vertices();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for e in 0..g.num_edges() {
            let (p, c) = g.edge_endpoints(e);
            a[(p, c)] = 0.25;
            a[(c, p)] = 0.25;
        }
        let top = a.symmetric_eigenvalues().iter().map(|x| x.abs()).fold(0.0, f64::max);
        let est = spectral_gap_estimate(2, 4, 10_000, 1e-14).unwrap();
        assert!((top - est).abs() < 1e-6, "{top} vs {est}");
        // Z on [−R, R]: cos(π/(2R+2)) tends to 1
        for r in [5, 20, 80] {
            let z = spectral_gap_estimate_integers(r, 1_000_000, 1e-14).unwrap();
            let exact = (std::f64::consts::PI / (2.0 * r as f64 + 2.0)).cos();
            assert!((z - exact).abs() < 1e-5, "{z} vs {exact}");
        }
        assert!(matches!(
            spectral_gap_estimate(2, 6, 2, 1e-14),
            Err(Error::Convergence { .. })
        ));
        assert!(spectral_gap_estimate(2, 1, 100, 1e-8).is_err());
    }

    #[test]
    fn hodge_examples() {
        let g = graph(5);
        let pot = {
            let mut p = random_vertex(&g, 3, false);
            for v in 0..g.num_vertices() {
                if g.depth(v) + 2 > g.radius() {
                    p.values[v] = zero();
                }
            }
            p
        };
        let f = coboundary(&g, &pot).unwrap();
        let h = hodge_decompose(&g, &f, 1e-10).unwrap();
        assert!(h.harmonic.norm(Exponent::TWO) < 1e-8);

        let gen = harmonic_generator(&g).unwrap();
        let mut gen_cut = gen.clone();
        for e in 0..g.num_edges() {
            if g.edge_shell(e) == g.radius() {
                gen_cut.values[e] = zero();
            }
        }
        // cutting the last shell breaks ∂ = 0 only at depth R − 1
        let h = hodge_decompose(&g, &gen_cut, 1e-10).unwrap();
        assert!(h.potential.norm(Exponent::TWO) < 1e-8);

        assert!(matches!(hodge_decompose(&g, &gen, 1e-10), Err(Error::SupportTouchesBoundary(_))));
    }

    #[test]
    fn harmonic_generator_shells() {
        let g = graph(6);
        let f = harmonic_generator(&g).unwrap();
        for e in 0..g.num_edges() {
            let k = g.edge_shell(e);
            assert!((f.values[e].norm() - 3f64.powi(-(k as i32 - 1))).abs() < 1e-15);
        }
        let e = g.vertex(0).clone();
        for j in 0..2 {
            let (idx, s) = g.cayley_edge(&e, j).unwrap();
            assert_eq!(f.values[idx].re * s, 1.0);
        }
        let exact = harmonic_generator_exact(&g).unwrap();
        let b = boundary_exact(&g, &exact).unwrap();
        for v in 0..g.num_vertices() {
            if g.is_interior(v) {
                assert_eq!(b[v], Ratio::from_integer(0));
            }
        }
        let bf = boundary(&g, &f).unwrap();
        for v in 0..g.num_vertices() {
            if g.is_interior(v) {
                assert!(bf.values[v].norm() < 1e-14);
            }
        }
        // each shell contributes exactly 4 to the l^1 norm
        for k in 1..=6 {
            let s: f64 = (0..g.num_edges()).filter(|&e| g.edge_shell(e) == k).map(|e| f.values[e].norm()).sum();
            assert!((s - 4.0).abs() < 1e-12);
        }
        assert!(harmonic_generator(&TruncatedCayleyGraph::new(3, 2).unwrap()).is_err());
    }

    #[test]
    fn telescoping_examples() {
        let g2 = graph(2);
        assert!(telescoping_residual(&g2, 0, &[0]).unwrap() < 1e-12);
        let mut prev = f64::INFINITY;
        for r in 2..=5 {
            let g = graph(r);
            let t = telescoping_residual(&g, 1, &[0]).unwrap();
            assert!(t > 0.0 && t < prev);
            // closed form 1/sqrt(2R): the a-edges are free, leaving the axis of b
            assert!((t - 1.0 / (2.0 * r as f64).sqrt()).abs() < 1e-9, "R={r}: {t}");
            prev = t;
        }
    }

    #[test]
    fn geodesic_examples() {
        let g = graph(4);
        let z = geodesic_integral(&g, &EdgeFunction::zeros(&g)).unwrap();
        assert!(z.values.iter().all(|x| *x == zero()));
        let e = g.vertex(0).clone();
        let f = EdgeFunction::basis(&g, &e, 0).unwrap();
        let a = geodesic_integral(&g, &f).unwrap();
        let first_is_a = |v: usize| {
            g.vertex(v).free_letters().unwrap().first() == Some(&Letter::new(0, false))
        };
        for v in 0..g.num_vertices() {
            let expect = if first_is_a(v) { 1.0 } else { 0.0 };
            assert_eq!(a.values[v].re, expect);
        }
        assert_eq!(a.norm(Exponent::Infinity), 1.0);
    }

    #[test]
    fn json_forms() {
        let g = graph(1);
        let j = g.to_json();
        assert_eq!(j["vertices"][0], "e");
        assert_eq!(j["edges"].as_array().unwrap().len(), 4);
        assert_eq!(j["edges"][0][0], "e");
        let f = harmonic_generator(&g).unwrap().to_json(&g);
        assert_eq!(f["values"][0], serde_json::json!([1.0, 0.0]));
        assert_eq!(f["edges"][1], serde_json::json!(["e", "a^-1"]));
    }

    proptest! {
        #[test]
        fn adjointness(seed in 0u64..200) {
            let g = graph(4);
            let x = random_vertex(&g, seed, true);
            let h = random_edge(&g, seed + 7, 4);
            let lhs = coboundary(&g, &x).unwrap().inner(&h);
            let rhs = x.inner(&boundary(&g, &h).unwrap());
            prop_assert!((lhs - rhs).norm() <= 1e-12);
        }

        #[test]
        fn coboundary_linear(seed in 0u64..200, s in -3.0f64..3.0) {
            let g = graph(3);
            let x = random_vertex(&g, seed, false);
            let y = random_vertex(&g, seed + 1, false);
            let comb = VertexFunction { values: x.values.iter().zip(&y.values).map(|(a, b)| a * s + b).collect() };
            let lhs = coboundary(&g, &comb).unwrap();
            let dx = coboundary(&g, &x).unwrap();
            let dy = coboundary(&g, &y).unwrap();
            for e in 0..g.num_edges() {
                prop_assert!((lhs.values[e] - (dx.values[e] * s + dy.values[e])).norm() < 1e-12);
            }
        }

        #[test]
        fn geodesic_inverts_coboundary(seed in 0u64..200) {
            let g = graph(4);
            let f = random_edge(&g, seed, 4);
            let back = coboundary(&g, &geodesic_integral(&g, &f).unwrap()).unwrap();
            for e in 0..g.num_edges() {
                prop_assert!((back.values[e] - f.values[e]).norm() < 1e-12);
            }
        }

        #[test]
        fn hodge_orthogonal_and_idempotent(seed in 0u64..40) {
            let g = graph(4);
            let f = random_edge(&g, seed, 3);
            let h = hodge_decompose(&g, &f, 1e-10).unwrap();
            let dg = coboundary(&g, &h.potential).unwrap();
            let ip = h.harmonic.inner(&dg).norm();
            prop_assert!(ip <= 1e-8 * f.norm(Exponent::TWO).powi(2).max(1.0));
            prop_assert!(h.reconstruction_residual <= 1e-12);
            prop_assert!(h.harmonic_boundary <= 1e-8);
            let again = hodge_decompose(&g, &h.harmonic, 1e-10).unwrap();
            for e in 0..g.num_edges() {
                prop_assert!((again.harmonic.values[e] - h.harmonic.values[e]).norm() <= 1e-8);
            }
        }
    }
}
