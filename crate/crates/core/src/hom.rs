//! Local spans `X_{F,m}`, almost-equivariant maps into a sofic level, the
//! explicit witness families, the coordinate map `α_S` and averaging.
//!
//! The model spaces are `l^p(Γ, l^p(n))` with generators `δ_e ⊗ e_k`, and the
//! edge space `l^p(E(F_n))` with generators `𝓔_{(e, e a_k)}`. In both, the
//! translate `s·x_k` is again a unit basis vector, so `X_{F,m}` has the basis
//! `{s·x_k : s ∈ F^m, k < min(m, n)}` and its norm is the l^p norm of the
//! coefficients.

use std::collections::HashSet;

use indexmap::IndexSet;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banach::{
    lp_norm, operator_pnorm, permute, schatten_norm_of, singular_values, Codomain, Exponent,
    NormBracket, NormMethod, SchattenMode, C64, UNITARY_TOL,
};
use crate::epsdim::{hermitian_eigenvalues, RANK_TOL};
use crate::error::{Error, Result};
use crate::group::{ball_with_capacity, default_capacity, GroupDescriptor, GroupWord};
use crate::sofic::{Permutation, SoficLevel};

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpace {
    /// `l^p(Γ, l^p(n))`.
    RegularLp { multiplicity: usize },
    /// `l^p(E(F_n))`, edges `(x, x a_j)`.
    EdgeSpace { rank: usize },
}

impl ModelSpace {
    pub fn num_generators(&self) -> usize {
        match *self {
            ModelSpace::RegularLp { multiplicity } => multiplicity,
            ModelSpace::EdgeSpace { rank } => rank,
        }
    }
}

/// The unit generators `x_1, …, x_n` of a model space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratingSequence {
    pub group: GroupDescriptor,
    pub space: ModelSpace,
}

impl GeneratingSequence {
    pub fn new(group: GroupDescriptor, space: ModelSpace) -> Result<Self> {
        group.validate()?;
        if space.num_generators() == 0 {
            return Err(Error::InvalidArgument("generating sequence is empty".into()));
        }
        if let ModelSpace::EdgeSpace { rank } = space {
            if !(group.is_free() || group == GroupDescriptor::Integers) || group.num_generators() != rank {
                return Err(Error::InvalidArgument(format!(
                    "edge space of rank {rank} needs a free group of that rank, got {group}"
                )));
            }
        }
        Ok(GeneratingSequence { group, space })
    }

    pub fn len(&self) -> usize {
        self.space.num_generators()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Basis `{s·x_k}` of `X_{F,m}`; label `(w, k)` has index `w·generators + k`.
#[derive(Debug, Clone)]
pub struct LocalSpan {
    sequence: GeneratingSequence,
    f: Vec<GroupWord>,
    m: usize,
    words: IndexSet<GroupWord>,
    generators: usize,
}

/// `X_{F,m}` for the sequence `S`: translates of `x_k`, `k < min(m, |S|)`, by
/// all products of at most `m` elements of `F`.
pub fn build_span(s: &GeneratingSequence, f: &[GroupWord], m: usize) -> Result<LocalSpan> {
    build_span_with_capacity(s, f, m, default_capacity())
}

pub fn build_span_with_capacity(s: &GeneratingSequence, f: &[GroupWord], m: usize, cap: usize) -> Result<LocalSpan> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be >= 1".into()));
    }
    if !f.iter().any(|w| w.is_identity()) {
        return Err(Error::InvalidArgument("F must contain the identity".into()));
    }
    let words = ball_with_capacity(s.group, f, m, cap)?;
    let generators = m.min(s.len());
    if words.len().saturating_mul(generators) > cap {
        return Err(Error::Capacity {
            requested: words.len() * generators,
            cap,
        });
    }
    let mut fs: Vec<GroupWord> = Vec::new();
    for w in f {
        if !fs.contains(w) {
            fs.push(w.clone());
        }
    }
    Ok(LocalSpan {
        sequence: *s,
        f: fs,
        m,
        words: words.into_iter().collect(),
        generators,
    })
}

impl LocalSpan {
    pub fn group(&self) -> GroupDescriptor {
        self.sequence.group
    }

    pub fn sequence(&self) -> &GeneratingSequence {
        &self.sequence
    }

    pub fn f(&self) -> &[GroupWord] {
        &self.f
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Words of `F^m` in discovery order; index 0 is the identity.
    pub fn words(&self) -> &IndexSet<GroupWord> {
        &self.words
    }

    /// Generators actually present, `min(m, |S|)`.
    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn dim(&self) -> usize {
        self.words.len() * self.generators
    }

    pub fn label(&self, word: usize, k: usize) -> usize {
        word * self.generators + k
    }

    pub fn label_of(&self, w: &GroupWord, k: usize) -> Option<usize> {
        if k >= self.generators {
            return None;
        }
        self.words.get_index_of(w).map(|i| self.label(i, k))
    }

    /// `(word, k)` of a label.
    pub fn unlabel(&self, label: usize) -> (&GroupWord, usize) {
        (&self.words[label / self.generators], label % self.generators)
    }

    pub fn identity_index(&self) -> usize {
        0
    }
}

/// `T: X_{F,m} → V_i` in the span basis; columns are images of basis vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMapMatrix {
    pub matrix: DMatrix<C64>,
    pub codomain: Codomain,
    pub p_in: Exponent,
    pub p_out: Exponent,
    /// How the level acts on a Schatten codomain; ignored for l^p.
    pub mode: SchattenMode,
    /// A known upper bound on the operator norm.
    pub norm_cap: Option<f64>,
}

impl LinearMapMatrix {
    pub fn new(matrix: DMatrix<C64>, codomain: Codomain, p_in: Exponent, p_out: Exponent) -> Result<Self> {
        if matrix.nrows() != codomain.rows() {
            return Err(Error::DimensionMismatch {
                expected: codomain.rows(),
                actual: matrix.nrows(),
            });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
        Ok(LinearMapMatrix {
            matrix,
            codomain,
            p_in,
            p_out,
            mode: SchattenMode::Conjugate,
            norm_cap: None,
        })
    }

    pub fn with_mode(mut self, mode: SchattenMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn zeros(span: &LocalSpan, codomain: Codomain, p: Exponent) -> Self {
        LinearMapMatrix::new(DMatrix::zeros(codomain.rows(), span.dim()), codomain, p, p).expect("shape")
    }

    pub fn norm_bracket(&self, method: NormMethod) -> Result<NormBracket> {
        let mut b = operator_pnorm(&self.matrix, self.p_in, self.p_out, self.codomain, method)?;
        if let Some(cap) = self.norm_cap {
            b.upper = b.upper.min(cap);
            b.lower = b.lower.min(b.upper);
        }
        Ok(b)
    }

    fn column(&self, c: usize) -> Vec<C64> {
        self.matrix.column(c).iter().copied().collect()
    }
}

/// Degree of the level acting on a codomain.
fn codomain_degree(cod: Codomain) -> usize {
    match cod {
        Codomain::Lp { dim } | Codomain::Schatten { dim } => dim,
    }
}

/// `π · v` in the codomain: permutation of coordinates on l^p, `U M U*` or
/// `U M` on Schatten space (column-major storage).
pub fn act(cod: Codomain, mode: SchattenMode, pi: &Permutation, v: &[C64]) -> Result<Vec<C64>> {
    match cod {
        Codomain::Lp { .. } => permute(pi, v),
        Codomain::Schatten { dim } => {
            if pi.degree() != dim || v.len() != dim * dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: pi.degree(),
                });
            }
            let mut out = vec![zero(); v.len()];
            for b in 0..dim {
                let tb = match mode {
                    SchattenMode::Conjugate => pi.apply(b),
                    SchattenMode::Multiply => b,
                };
                for a in 0..dim {
                    out[pi.apply(a) + dim * tb] = v[a + dim * b];
                }
            }
            Ok(out)
        }
    }
}

/// Every reduced product `s_1⋯s_k` (`1 ≤ k ≤ m`, `s_i ∈ F`) paired with the
/// composed permutation `σ(s_1)∘⋯∘σ(s_k)`, duplicates merged.
#[derive(Debug, Clone)]
pub struct DefectPlan {
    degree: usize,
    entries: Vec<(usize, Permutation)>,
    /// `σ(w)` for every span word.
    word_images: Vec<Permutation>,
}

impl DefectPlan {
    pub fn new(span: &LocalSpan, sigma: &SoficLevel) -> Result<Self> {
        if sigma.group() != span.group() {
            return Err(Error::GroupMismatch {
                left: span.group().to_string(),
                right: sigma.group().to_string(),
            });
        }
        let f_images: Vec<Permutation> = span.f.iter().map(|s| sigma.evaluate(s)).collect::<Result<_>>()?;
        let mut seen: HashSet<(usize, Permutation)> = HashSet::new();
        let mut frontier: Vec<(GroupWord, Permutation)> = Vec::new();
        let mut entries = Vec::new();
        for (s, ps) in span.f.iter().zip(&f_images) {
            let key = (span.words.get_index_of(s).expect("F ⊆ F^m"), ps.clone());
            if seen.insert(key.clone()) {
                entries.push(key);
                frontier.push((s.clone(), ps.clone()));
            }
        }
        for _ in 1..span.m {
            let mut next = Vec::new();
            for (w, pw) in &frontier {
                for (s, ps) in span.f.iter().zip(&f_images) {
                    let ws = w.multiply(s)?;
                    let pws = pw.compose(ps)?;
                    let idx = span.words.get_index_of(&ws).expect("F^m closed under the plan");
                    let key = (idx, pws);
                    if seen.insert(key.clone()) {
                        entries.push(key.clone());
                        next.push((ws, key.1));
                    }
                }
            }
            frontier = next;
        }
        let word_images = span.words.iter().map(|w| sigma.evaluate(w)).collect::<Result<_>>()?;
        Ok(DefectPlan {
            degree: sigma.degree(),
            entries,
            word_images,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, Permutation)] {
        &self.entries
    }

    pub fn word_image(&self, w: usize) -> &Permutation {
        &self.word_images[w]
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomCheck {
    pub norm: NormBracket,
    pub defect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Membership {
    Pass,
    Fail,
    /// The norm bracket straddles `C`.
    Undetermined,
}

/// Slack on the norm bound, for closed forms that land exactly on `C`.
pub const NORM_SLACK: f64 = 1e-9;

impl HomCheck {
    pub fn classify(&self, norm_bound: f64, delta: f64) -> Membership {
        if self.defect >= delta || self.norm.lower > norm_bound + NORM_SLACK {
            Membership::Fail
        } else if self.norm.upper <= norm_bound + NORM_SLACK {
            Membership::Pass
        } else {
            Membership::Undetermined
        }
    }
}

fn check_shapes(t: &LinearMapMatrix, span: &LocalSpan, plan: &DefectPlan) -> Result<()> {
    if t.matrix.ncols() != span.dim() {
        return Err(Error::SpanMismatch(format!(
            "map has {} columns, span has dimension {}",
            t.matrix.ncols(),
            span.dim()
        )));
    }
    if codomain_degree(t.codomain) != plan.degree {
        return Err(Error::DegreeMismatch {
            left: codomain_degree(t.codomain),
            right: plan.degree,
        });
    }
    Ok(())
}

/// `max ‖T(s_1⋯s_k x_j) − σ(s_1)⋯σ(s_k) T(x_j)‖` over the plan.
pub fn equivariance_defect(t: &LinearMapMatrix, span: &LocalSpan, plan: &DefectPlan) -> Result<f64> {
    check_shapes(t, span, plan)?;
    let e = span.identity_index();
    let mut worst = 0.0f64;
    for j in 0..span.generators {
        let base = t.column(span.label(e, j));
        for (w, pi) in &plan.entries {
            let moved = act(t.codomain, t.mode, pi, &base)?;
            let col = t.column(span.label(*w, j));
            let diff: Vec<C64> = col.iter().zip(&moved).map(|(a, b)| a - b).collect();
            worst = worst.max(t.codomain.norm(&diff, t.p_out));
        }
    }
    Ok(worst)
}

/// Operator-norm bracket and maximal equivariance defect of `T`.
pub fn hom_defect(t: &LinearMapMatrix, span: &LocalSpan, plan: &DefectPlan) -> Result<HomCheck> {
    let defect = equivariance_defect(t, span, plan)?;
    Ok(HomCheck {
        norm: t.norm_bracket(NormMethod::Bracket)?,
        defect,
    })
}

/// `T_jk(f) = Σ_{s ∈ F^m} ⟨f(s), e_k*⟩ δ_{σ(s)(j)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LpWitness {
    pub j: usize,
    pub k: usize,
}

impl LpWitness {
    pub fn to_matrix(&self, span: &LocalSpan, plan: &DefectPlan, p: Exponent) -> LinearMapMatrix {
        let d = plan.degree;
        let mut m = DMatrix::zeros(d, span.dim());
        if self.k < span.generators {
            for w in 0..span.words.len() {
                m[(plan.word_images[w].apply(self.j), span.label(w, self.k))] = one();
            }
        }
        LinearMapMatrix::new(m, Codomain::Lp { dim: d }, p, p).expect("shape")
    }

    /// Every column has a single unit entry, so the norm is
    /// `max_r g_r^{1 − 1/p}` with `g_r` the number of words sent to `r`.
    pub fn norm(&self, span: &LocalSpan, plan: &DefectPlan, p: Exponent) -> f64 {
        if self.k >= span.generators {
            return 0.0;
        }
        let mut targets: Vec<usize> = (0..span.words.len()).map(|w| plan.word_images[w].apply(self.j)).collect();
        targets.sort_unstable();
        let mut best = 0usize;
        let mut run = 0usize;
        for (i, &x) in targets.iter().enumerate() {
            run = if i > 0 && targets[i - 1] == x { run + 1 } else { 1 };
            best = best.max(run);
        }
        (best as f64).powf(1.0 - p.recip())
    }

    /// Each defect is `‖δ_{σ(w)(j)} − δ_{π(j)}‖_p`, either 0 or `2^{1/p}`.
    pub fn defect(&self, span: &LocalSpan, plan: &DefectPlan, p: Exponent) -> f64 {
        if self.k >= span.generators {
            return 0.0;
        }
        let t_x = plan.word_images[span.identity_index()].apply(self.j);
        for (w, pi) in &plan.entries {
            if plan.word_images[*w].apply(self.j) != pi.apply(t_x) {
                return 2f64.powf(p.recip());
            }
        }
        0.0
    }

    pub fn check(&self, span: &LocalSpan, plan: &DefectPlan, p: Exponent) -> HomCheck {
        HomCheck {
            norm: NormBracket::exact(self.norm(span, plan, p)),
            defect: self.defect(span, plan, p),
        }
    }

    /// `α_S(T_jk)`: `δ_{σ(e)(j)}` in block `k`, zero elsewhere.
    pub fn alpha(&self, span: &LocalSpan, plan: &DefectPlan) -> Vec<Vec<C64>> {
        let d = plan.degree;
        (0..span.sequence.len())
            .map(|k| {
                let mut v = vec![zero(); d];
                if k == self.k && k < span.generators {
                    v[plan.word_images[span.identity_index()].apply(self.j)] = one();
                }
                v
            })
            .collect()
    }
}

/// All `d·n` witnesses `T_jk`, ordered by `j` then `k`.
pub fn lp_witnesses(d: usize, n: usize) -> Vec<LpWitness> {
    (0..d).flat_map(|j| (0..n).map(move |k| LpWitness { j, k })).collect()
}

/// Dense matrices of the witness family.
pub fn witness_family_lp(span: &LocalSpan, plan: &DefectPlan, p: Exponent) -> Vec<LinearMapMatrix> {
    lp_witnesses(plan.degree, span.sequence.len())
        .par_iter()
        .map(|w| w.to_matrix(span, plan, p))
        .collect()
}

fn check_unit(v: &[C64], what: &str) -> Result<()> {
    let n = lp_norm(v, Exponent::TWO);
    if (n - 1.0).abs() > UNITARY_TOL.sqrt() {
        return Err(Error::InvalidArgument(format!("{what} must be a unit vector, norm {n}")));
    }
    Ok(())
}

fn check_unitaries(span: &LocalSpan, unitaries: &[DMatrix<C64>]) -> Result<usize> {
    if unitaries.len() != span.words.len() {
        return Err(Error::SpanMismatch(format!(
            "{} unitaries for {} span words",
            unitaries.len(),
            span.words.len()
        )));
    }
    let d = unitaries.first().map_or(0, |u| u.nrows());
    for u in unitaries {
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: u.nrows(),
            });
        }
    }
    Ok(d)
}

fn outer_vec(x: &[C64], y: &[C64]) -> Vec<C64> {
    let d = x.len();
    let mut out = vec![zero(); d * d];
    for b in 0..d {
        let yb = y[b].conj();
        for a in 0..d {
            out[a + d * b] = x[a] * yb;
        }
    }
    out
}

fn mat_vec(u: &DMatrix<C64>, x: &[C64]) -> Vec<C64> {
    (u * nalgebra::DVector::from_column_slice(x)).iter().copied().collect()
}

/// Conjugation-mode witnesses `T_{ξ,η,j}(f) = Σ_s f(s,j) U_s ξ ⊗ \overline{U_s η}`,
/// one per generator `j`, into `S^p(d)`. `unitaries[w]` is the unitary of span word `w`.
pub fn witness_family_schatten(
    span: &LocalSpan,
    unitaries: &[DMatrix<C64>],
    xi: &[C64],
    eta: &[C64],
    p: Exponent,
) -> Result<Vec<LinearMapMatrix>> {
    let d = check_unitaries(span, unitaries)?;
    check_unit(xi, "xi")?;
    check_unit(eta, "eta")?;
    if xi.len() != d || eta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: xi.len(),
        });
    }
    let cols: Vec<Vec<C64>> = unitaries.iter().map(|u| outer_vec(&mat_vec(u, xi), &mat_vec(u, eta))).collect();
    Ok((0..span.generators)
        .map(|j| {
            let mut m = DMatrix::zeros(d * d, span.dim());
            for (w, c) in cols.iter().enumerate() {
                m.set_column(span.label(w, j), &nalgebra::DVector::from_column_slice(c));
            }
            LinearMapMatrix::new(m, Codomain::Schatten { dim: d }, p, p).expect("shape")
        })
        .collect())
}

/// Multiplication-mode witnesses `T_A(f) = Σ_s f(s,j) U_s A`, one per generator `j`.
pub fn witness_family_schatten_multiply(
    span: &LocalSpan,
    unitaries: &[DMatrix<C64>],
    a: &DMatrix<C64>,
    p: Exponent,
) -> Result<Vec<LinearMapMatrix>> {
    let d = check_unitaries(span, unitaries)?;
    if a.nrows() != d || a.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: a.nrows(),
        });
    }
    let cols: Vec<DMatrix<C64>> = unitaries.iter().map(|u| u * a).collect();
    Ok((0..span.generators)
        .map(|j| {
            let mut m = DMatrix::zeros(d * d, span.dim());
            for (w, c) in cols.iter().enumerate() {
                m.set_column(span.label(w, j), &nalgebra::DVector::from_column_slice(c.as_slice()));
            }
            LinearMapMatrix::new(m, Codomain::Schatten { dim: d }, p, p)
                .expect("shape")
                .with_mode(SchattenMode::Multiply)
        })
        .collect())
}

/// Conjugation-mode witness for permutation-unitary levels, evaluated without
/// forming the `d² × dim X` matrix.
#[derive(Debug, Clone)]
pub struct SchattenWitness {
    pub xi: Vec<C64>,
    pub eta: Vec<C64>,
    pub j: usize,
}

fn inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Singular values squared of `x y* − z w*` from the 2×2 Gram product.
fn rank_two_singular_sq(x: &[C64], y: &[C64], z: &[C64], w: &[C64]) -> (f64, f64) {
    // M = X Y* with X = [x, z], Y = [y, −w]
    let gx = [[inner(x, x), inner(x, z)], [inner(z, x), inner(z, z)]];
    let gy = [[inner(y, y), -inner(y, w)], [-inner(w, y), inner(w, w)]];
    let p = [
        [gx[0][0] * gy[0][0] + gx[0][1] * gy[1][0], gx[0][0] * gy[0][1] + gx[0][1] * gy[1][1]],
        [gx[1][0] * gy[0][0] + gx[1][1] * gy[1][0], gx[1][0] * gy[0][1] + gx[1][1] * gy[1][1]],
    ];
    let tr = (p[0][0] + p[1][1]).re;
    let det = (p[0][0] * p[1][1] - p[0][1] * p[1][0]).re;
    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
    (((tr + disc) / 2.0).max(0.0), ((tr - disc) / 2.0).max(0.0))
}

fn schatten_from_sq(l1: f64, l2: f64, p: Exponent) -> f64 {
    match p {
        Exponent::Infinity => l1.sqrt(),
        Exponent::Finite(q) => (l1.powf(q / 2.0) + l2.powf(q / 2.0)).powf(1.0 / q),
    }
}

impl SchattenWitness {
    pub fn new(xi: Vec<C64>, eta: Vec<C64>, j: usize) -> Result<Self> {
        check_unit(&xi, "xi")?;
        check_unit(&eta, "eta")?;
        if xi.len() != eta.len() {
            return Err(Error::DimensionMismatch {
                expected: xi.len(),
                actual: eta.len(),
            });
        }
        Ok(SchattenWitness { xi, eta, j })
    }

    /// Dense matrix through [`witness_family_schatten`].
    pub fn to_matrix(&self, span: &LocalSpan, plan: &DefectPlan, p: Exponent) -> Result<LinearMapMatrix> {
        let us: Vec<DMatrix<C64>> = plan.word_images.iter().map(crate::banach::permutation_unitary).collect();
        let fam = witness_family_schatten(span, &us, &self.xi, &self.eta, p)?;
        Ok(fam.into_iter().nth(self.j).unwrap_or_else(|| {
            LinearMapMatrix::zeros(span, Codomain::Schatten { dim: plan.degree }, p)
        }))
    }

    fn translates(&self, plan: &DefectPlan) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
        let xs = plan.word_images.iter().map(|u| permute(u, &self.xi).expect("degree")).collect();
        let ys = plan.word_images.iter().map(|u| permute(u, &self.eta).expect("degree")).collect();
        (xs, ys)
    }

    /// Norm bracket; `p = 1` is the largest column norm `‖ξ‖‖η‖ = 1`, `p = 2`
    /// is `sqrt(λ_max(G_ξ ∘ \overline{G_η}))`, other exponents use the dense route.
    pub fn norm(&self, span: &LocalSpan, plan: &DefectPlan, p: Exponent) -> Result<NormBracket> {
        if self.j >= span.generators {
            return Ok(NormBracket::exact(0.0));
        }
        if p.is(1.0) {
            return Ok(NormBracket::exact(1.0));
        }
        if p.is(2.0) {
            let (xs, ys) = self.translates(plan);
            let k = xs.len();
            let g = DMatrix::from_fn(k, k, |s, t| inner(&xs[s], &xs[t]) * inner(&ys[s], &ys[t]).conj());
            let top = hermitian_eigenvalues(&g).first().copied().unwrap_or(0.0);
            return Ok(NormBracket::exact(top.max(0.0).sqrt()));
        }
        self.to_matrix(span, plan, p)?.norm_bracket(NormMethod::Bracket)
    }

    /// Defects are Schatten norms of rank-two differences.
    pub fn defect(&self, span: &LocalSpan, plan: &DefectPlan, p: Exponent) -> f64 {
        if self.j >= span.generators {
            return 0.0;
        }
        let (xs, ys) = self.translates(plan);
        let e = span.identity_index();
        let mut worst = 0.0f64;
        for (w, pi) in &plan.entries {
            let z = permute(pi, &xs[e]).expect("degree");
            let v = permute(pi, &ys[e]).expect("degree");
            let (l1, l2) = rank_two_singular_sq(&xs[*w], &ys[*w], &z, &v);
            worst = worst.max(schatten_from_sq(l1, l2, p));
        }
        worst
    }

    pub fn check(&self, span: &LocalSpan, plan: &DefectPlan, p: Exponent) -> Result<HomCheck> {
        Ok(HomCheck {
            norm: self.norm(span, plan, p)?,
            defect: self.defect(span, plan, p),
        })
    }

    /// `α_S(T)`: `σ(e)ξ ⊗ \overline{σ(e)η}` in block `j`, as a `d × d` matrix.
    pub fn alpha(&self, span: &LocalSpan, plan: &DefectPlan) -> Vec<DMatrix<C64>> {
        let d = plan.degree;
        let e = plan.word_image(span.identity_index());
        (0..span.sequence.len())
            .map(|k| {
                if k == self.j && k < span.generators {
                    let x = permute(e, &self.xi).expect("degree");
                    let y = permute(e, &self.eta).expect("degree");
                    DMatrix::from_column_slice(d, d, &outer_vec(&x, &y))
                } else {
                    DMatrix::zeros(d, d)
                }
            })
            .collect()
    }
}

/// `α_S(T)(k) = T(x_k)` for `k < min(m, |S|)`, zero for the remaining generators.
pub fn alpha_s(t: &LinearMapMatrix, span: &LocalSpan) -> Result<Vec<Vec<C64>>> {
    if t.matrix.ncols() != span.dim() {
        return Err(Error::SpanMismatch(format!(
            "map has {} columns, span has dimension {}",
            t.matrix.ncols(),
            span.dim()
        )));
    }
    let e = span.identity_index();
    Ok((0..span.sequence.len())
        .map(|k| {
            if k < span.generators {
                t.column(span.label(e, k))
            } else {
                vec![zero(); t.codomain.rows()]
            }
        })
        .collect())
}

/// How `s^{-1}` acts on the domain basis: `s^{-1}·b_c = Σ coeff · b_idx` in
/// the basis on which `T` is defined.
pub trait DomainAction {
    /// Number of output columns.
    fn dim(&self) -> usize;
    /// Number of input columns `T` must have.
    fn source_dim(&self) -> usize;
    fn translate_inverse(&self, s: &GroupWord, c: usize) -> Result<Vec<(usize, C64)>>;
}

impl DomainAction for LocalSpan {
    fn dim(&self) -> usize {
        LocalSpan::dim(self)
    }

    fn source_dim(&self) -> usize {
        LocalSpan::dim(self)
    }

    fn translate_inverse(&self, s: &GroupWord, c: usize) -> Result<Vec<(usize, C64)>> {
        SpanRestriction { source: self, target: self }.translate_inverse(s, c)
    }
}

/// `T` known on `source`, averaged map wanted on the smaller `target`.
pub struct SpanRestriction<'a> {
    pub source: &'a LocalSpan,
    pub target: &'a LocalSpan,
}

impl DomainAction for SpanRestriction<'_> {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn source_dim(&self) -> usize {
        self.source.dim()
    }

    fn translate_inverse(&self, s: &GroupWord, c: usize) -> Result<Vec<(usize, C64)>> {
        let (w, k) = self.target.unlabel(c);
        let moved = s.inverse().multiply(w)?;
        match self.source.label_of(&moved, k) {
            Some(i) => Ok(vec![(i, one())]),
            None => Err(Error::DomainTooSmall(format!("{moved} (from {s}^-1 * {w}) is outside the span"))),
        }
    }
}

/// `X = C^{|characters|}` for `Z/k`, with `s·e_c = χ_c(s) e_c`,
/// `χ_c(s) = exp(2πi c s / k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteRep {
    pub order: u64,
    pub characters: Vec<i64>,
}

impl FiniteRep {
    pub fn new(order: u64, characters: Vec<i64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("order must be >= 1".into()));
        }
        if characters.is_empty() {
            return Err(Error::InvalidArgument("representation needs at least one character".into()));
        }
        Ok(FiniteRep { order, characters })
    }

    pub fn group(&self) -> GroupDescriptor {
        GroupDescriptor::Cyclic { order: self.order }
    }

    pub fn character(&self, c: usize, s: i64) -> C64 {
        let k = self.order as i64;
        let t = (self.characters[c] * s).rem_euclid(k) as f64 / k as f64;
        C64::from_polar(1.0, 2.0 * std::f64::consts::PI * t)
    }

    /// All group elements `0, …, k−1`.
    pub fn elements(&self) -> Result<Vec<GroupWord>> {
        (0..self.order as i64).map(|s| GroupWord::abelian(self.group(), vec![s])).collect()
    }
}

fn word_exponent(s: &GroupWord) -> Result<i64> {
    s.coords()
        .and_then(|c| c.first().copied())
        .ok_or_else(|| Error::InvalidArgument(format!("{s} is not an element of a cyclic group")))
}

impl DomainAction for FiniteRep {
    fn dim(&self) -> usize {
        self.characters.len()
    }

    fn source_dim(&self) -> usize {
        self.characters.len()
    }

    fn translate_inverse(&self, s: &GroupWord, c: usize) -> Result<Vec<(usize, C64)>> {
        Ok(vec![(c, self.character(c, word_exponent(s)?).conj())])
    }
}

/// `P^{(E)}(T) = (1/|E|) Σ_{s ∈ E} σ(s) ∘ T ∘ s^{-1}`.
pub fn averaging_projection(
    t: &LinearMapMatrix,
    e: &[GroupWord],
    sigma: &SoficLevel,
    domain: &dyn DomainAction,
) -> Result<LinearMapMatrix> {
    if e.is_empty() {
        return Err(Error::InvalidArgument("averaging set is empty".into()));
    }
    if t.matrix.ncols() != domain.source_dim() {
        return Err(Error::SpanMismatch(format!(
            "map has {} columns, domain needs {}",
            t.matrix.ncols(),
            domain.source_dim()
        )));
    }
    if codomain_degree(t.codomain) != sigma.degree() {
        return Err(Error::DegreeMismatch {
            left: codomain_degree(t.codomain),
            right: sigma.degree(),
        });
    }
    let rows = t.codomain.rows();
    let w = C64::new(1.0 / e.len() as f64, 0.0);
    let mut out = DMatrix::zeros(rows, domain.dim());
    for s in e {
        let pi = sigma.evaluate(s)?;
        for c in 0..domain.dim() {
            let mut col = vec![zero(); rows];
            for (i, coeff) in domain.translate_inverse(s, c)? {
                for (r, z) in t.matrix.column(i).iter().enumerate() {
                    col[r] += z * coeff;
                }
            }
            let moved = act(t.codomain, t.mode, &pi, &col)?;
            for (r, z) in moved.into_iter().enumerate() {
                out[(r, c)] += z * w;
            }
        }
    }
    let cap = t.norm_bracket(NormMethod::Bracket)?.upper;
    Ok(LinearMapMatrix {
        matrix: out,
        codomain: t.codomain,
        p_in: t.p_in,
        p_out: t.p_out,
        mode: t.mode,
        norm_cap: Some(cap),
    })
}

/// Dimension of the equivariant maps `X → C^d` for a `Z/k` level, as the rank
/// of the averaging projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FixedSpace {
    /// Sum over characters of the SVD rank of `P_c = (1/k) Σ_s \overline{χ_c(s)} U_{σ(s)}`.
    pub rank: usize,
    /// `Σ_c (1/k) Σ_s \overline{χ_c(s)} fix(σ(s))`, rounded.
    pub trace: usize,
    pub degree: usize,
}

pub fn fixed_space_dimension(sigma: &SoficLevel, rep: &FiniteRep) -> Result<FixedSpace> {
    if sigma.group() != rep.group() {
        return Err(Error::GroupMismatch {
            left: rep.group().to_string(),
            right: sigma.group().to_string(),
        });
    }
    let d = sigma.degree();
    let k = rep.order as usize;
    let perms: Vec<Permutation> = rep.elements()?.iter().map(|s| sigma.evaluate(s)).collect::<Result<_>>()?;
    let per_char: Vec<(usize, f64)> = (0..rep.characters.len())
        .into_par_iter()
        .map(|c| {
            let mut pc = DMatrix::<C64>::zeros(d, d);
            let mut tr = zero();
            for (s, pi) in perms.iter().enumerate() {
                let chi = rep.character(c, s as i64).conj() / k as f64;
                for j in 0..d {
                    pc[(pi.apply(j), j)] += chi;
                }
                tr += chi * pi.fixed_points() as f64;
            }
            let sv = singular_values(&pc);
            let rank = sv.iter().filter(|&&x| x > RANK_TOL).count();
            (rank, tr.re)
        })
        .collect();
    let rank = per_char.iter().map(|x| x.0).sum();
    let trace: f64 = per_char.iter().map(|x| x.1).sum();
    Ok(FixedSpace {
        rank,
        trace: trace.round().max(0.0) as usize,
        degree: d,
    })
}

/// Schatten norm of a stored column; convenience for callers holding `d²` vectors.
pub fn schatten_column_norm(v: &[C64], dim: usize, p: Exponent) -> f64 {
    schatten_norm_of(&DMatrix::from_column_slice(dim, dim, v), p)
}
