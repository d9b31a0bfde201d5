//! Finite-dimensional l^p and Schatten-p spaces, their isometric actions,
//! weighted product norms and operator-norm brackets.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::sofic::Permutation;

pub type C64 = Complex64;

/// Tolerance for the unitarity check `‖U*U − I‖_F`.
pub const UNITARY_TOL: f64 = 1e-10;

/// An exponent `p ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        Ok(if p.is_infinite() {
            Exponent::Infinity
        } else {
            Exponent::Finite(p)
        })
    }

    pub const ONE: Exponent = Exponent::Finite(1.0);
    pub const TWO: Exponent = Exponent::Finite(2.0);

    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// `1/p`, zero for `p = ∞`.
    pub fn recip(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    pub fn is(self, p: f64) -> bool {
        self.value() == p
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let p = match Raw::deserialize(d)? {
            Raw::Num(p) => p,
            Raw::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => f64::INFINITY,
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom)?,
        };
        Exponent::new(p).map_err(serde::de::Error::custom)
    }
}

/// `(Σ |v_j|^p)^{1/p}`, or `max |v_j|` for `p = ∞`.
pub fn lp_norm(v: &[C64], p: Exponent) -> f64 {
    match p {
        Exponent::Infinity => v.iter().map(|z| z.norm()).fold(0.0, f64::max),
        Exponent::Finite(p) if p == 1.0 => v.iter().map(|z| z.norm()).sum(),
        Exponent::Finite(p) if p == 2.0 => v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
        Exponent::Finite(p) => {
            // scale by the max entry to avoid overflow for large p
            let m = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if m == 0.0 {
                return 0.0;
            }
            m * v.iter().map(|z| (z.norm() / m).powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }
}

/// Same as [`lp_norm`] for real nonnegative magnitudes.
pub fn lp_norm_real(v: &[f64], p: Exponent) -> f64 {
    match p {
        Exponent::Infinity => v.iter().map(|x| x.abs()).fold(0.0, f64::max),
        Exponent::Finite(p) => {
            let m = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
            if m == 0.0 {
                return 0.0;
            }
            m * v.iter().map(|x| (x.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PVector {
    pub entries: Vec<C64>,
    pub p: Exponent,
}

impl PVector {
    pub fn new(entries: Vec<C64>, p: Exponent) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("vector dimension must be >= 1".into()));
        }
        Ok(PVector { entries, p })
    }

    pub fn basis(d: usize, j: usize, p: Exponent) -> Self {
        let mut entries = vec![C64::new(0.0, 0.0); d];
        entries[j] = C64::new(1.0, 0.0);
        PVector { entries, p }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn norm(&self) -> f64 {
        lp_norm(&self.entries, self.p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PMatrix {
    pub entries: DMatrix<C64>,
    pub p: Exponent,
}

impl PMatrix {
    pub fn new(entries: DMatrix<C64>, p: Exponent) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidArgument("Schatten matrices must be square and nonempty".into()));
        }
        Ok(PMatrix { entries, p })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn norm(&self) -> f64 {
        schatten_norm_of(&self.entries, self.p)
    }
}

/// Singular values of a dense complex matrix.
pub fn singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    m.singular_values().iter().copied().collect()
}

/// `(Tr |M|^p)^{1/p}`: the l^p norm of the singular values.
pub fn schatten_norm(m: &PMatrix) -> f64 {
    m.norm()
}

pub fn schatten_norm_of(m: &DMatrix<C64>, p: Exponent) -> f64 {
    if p.is(2.0) {
        return m.norm();
    }
    lp_norm_real(&singular_values(m), p)
}

/// `(σ·v)(σ(j)) = v(j)`, so `δ_j ↦ δ_{σ(j)}`.
pub fn permutation_action(sigma: &Permutation, v: &PVector) -> Result<PVector> {
    Ok(PVector {
        entries: permute(sigma, &v.entries)?,
        p: v.p,
    })
}

pub fn permute(sigma: &Permutation, v: &[C64]) -> Result<Vec<C64>> {
    if sigma.degree() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: sigma.degree(),
            actual: v.len(),
        });
    }
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    for (j, &x) in v.iter().enumerate() {
        out[sigma.apply(j)] = x;
    }
    Ok(out)
}

/// The unitary `U e_j = e_{σ(j)}`.
pub fn permutation_unitary(sigma: &Permutation) -> DMatrix<C64> {
    let d = sigma.degree();
    let mut u = DMatrix::zeros(d, d);
    for j in 0..d {
        u[(sigma.apply(j), j)] = C64::new(1.0, 0.0);
    }
    u
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchattenMode {
    /// `M ↦ U M U*`.
    Conjugate,
    /// `M ↦ U M`.
    Multiply,
}

/// `‖U*U − I‖_F`.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let d = u.nrows();
    (u.adjoint() * u - DMatrix::<C64>::identity(d, d)).norm()
}

pub fn schatten_actions(u: &DMatrix<C64>, m: &PMatrix, mode: SchattenMode) -> Result<PMatrix> {
    if !u.is_square() || u.nrows() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            actual: u.nrows(),
        });
    }
    let defect = unitarity_defect(u);
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary(defect));
    }
    let entries = match mode {
        SchattenMode::Conjugate => u * &m.entries * u.adjoint(),
        SchattenMode::Multiply => u * &m.entries,
    };
    Ok(PMatrix { entries, p: m.p })
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases of
/// `diag(R)` folded back into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<C64> {
    let g = DMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Uniform unit vector in `C^d` (normalised complex Gaussian).
pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<C64> {
    let v: Vec<C64> = (0..d)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let n = lp_norm(&v, Exponent::TWO);
    v.into_iter().map(|z| z / n).collect()
}

/// `ρ(f)^q = Σ_{j ≥ 1} 2^{-j} |f(j)|^q`, optionally truncated to `j ≤ N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductNormSpec {
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
}

impl Default for ProductNormSpec {
    fn default() -> Self {
        ProductNormSpec { q: 2.0, truncation: None }
    }
}

impl ProductNormSpec {
    pub fn new(q: f64, truncation: Option<usize>) -> Result<Self> {
        let s = ProductNormSpec { q, truncation };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return Err(Error::InvalidExponent(self.q));
        }
        if self.truncation == Some(0) {
            return Err(Error::InvalidArgument("truncation N must be >= 1".into()));
        }
        Ok(())
    }

    /// Weight `2^{-j}` of coordinate `j` (1-based), zero past the truncation.
    pub fn weight(&self, j: usize) -> f64 {
        match self.truncation {
            Some(n) if j > n => 0.0,
            _ => 0.5f64.powi(j as i32),
        }
    }

    /// `entry_norms[j-1] = ‖f(j)‖`; entries beyond the slice are zero.
    pub fn product_norm(&self, entry_norms: &[f64]) -> Result<f64> {
        self.validate()?;
        let mut acc = 0.0;
        for (i, &x) in entry_norms.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "entry {} has invalid norm {x}",
                    i + 1
                )));
            }
            acc += self.weight(i + 1) * x.powf(self.q);
        }
        Ok(acc.powf(1.0 / self.q))
    }
}

pub fn product_norm(rho: &ProductNormSpec, entry_norms: &[f64]) -> Result<f64> {
    rho.product_norm(entry_norms)
}

/// Codomain of a linear map stored as a dense matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Codomain {
    /// `l^p(dim)`; matrix has `dim` rows.
    Lp { dim: usize },
    /// `S^p(dim)`; matrix has `dim²` rows, each column a column-major `dim × dim` matrix.
    Schatten { dim: usize },
}

impl Codomain {
    pub fn rows(&self) -> usize {
        match *self {
            Codomain::Lp { dim } => dim,
            Codomain::Schatten { dim } => dim * dim,
        }
    }

    /// Norm of one image vector.
    pub fn norm(&self, v: &[C64], p: Exponent) -> f64 {
        match *self {
            Codomain::Lp { .. } => lp_norm(v, p),
            Codomain::Schatten { dim } => {
                schatten_norm_of(&DMatrix::from_column_slice(dim, dim, v), p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMethod {
    /// Fail unless the pair admits a closed form.
    Exact,
    /// Closed form where available, certified bracket otherwise.
    Bracket,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBracket {
    pub lower: f64,
    pub upper: f64,
}

impl NormBracket {
    pub fn exact(x: f64) -> Self {
        NormBracket { lower: x, upper: x }
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn columns(t: &DMatrix<C64>) -> impl Iterator<Item = Vec<C64>> + '_ {
    t.column_iter().map(|c| c.iter().copied().collect())
}

/// Exact closed forms: `1 → anything` (max column norm), `∞ → ∞` on l^p
/// codomains (max row sum), `2 → 2` and `2 → S²` (top singular value).
fn exact_norm(t: &DMatrix<C64>, p_in: Exponent, p_out: Exponent, cod: Codomain) -> Option<f64> {
    if t.ncols() == 0 || t.nrows() == 0 {
        return Some(0.0);
    }
    if p_in.is(1.0) {
        return Some(columns(t).map(|c| cod.norm(&c, p_out)).fold(0.0, f64::max));
    }
    if p_in.is(2.0) && p_out.is(2.0) {
        return Some(singular_values(t).into_iter().fold(0.0, f64::max));
    }
    if matches!(cod, Codomain::Lp { .. }) && p_in == Exponent::Infinity && p_out == Exponent::Infinity {
        return Some(
            t.row_iter()
                .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
                .fold(0.0, f64::max),
        );
    }
    None
}

/// `‖x‖_b ≤ n^{max(0, 1/b − 1/a)} ‖x‖_a` in dimension `n`.
fn comparison(n: usize, from: Exponent, to: Exponent) -> f64 {
    (n as f64).powf((to.recip() - from.recip()).max(0.0))
}

/// Operator norm `‖T‖_{p_in → p_out}` as a bracket.
///
/// Exact pairs return a degenerate bracket. Otherwise the lower end is the best
/// ratio over probe vectors (basis vectors, top right singular vector, its phase
/// vector, the all-ones vector) and the upper end is the least of the
/// Riesz–Thorin interpolations between exact endpoints and the norm-comparison
/// factorisations through `l^1`, `l^2`, `l^∞`.
pub fn operator_pnorm(
    t: &DMatrix<C64>,
    p_in: Exponent,
    p_out: Exponent,
    cod: Codomain,
    method: NormMethod,
) -> Result<NormBracket> {
    if t.nrows() != cod.rows() {
        return Err(Error::DimensionMismatch {
            expected: cod.rows(),
            actual: t.nrows(),
        });
    }
    if let Some(x) = exact_norm(t, p_in, p_out, cod) {
        return Ok(NormBracket::exact(x));
    }
    if method == NormMethod::Exact {
        return Err(Error::Unsupported(format!(
            "no closed form for {p_in} -> {p_out} into {cod:?}"
        )));
    }
    let n = t.ncols();
    let rows_dim = match cod {
        Codomain::Lp { dim } => dim,
        Codomain::Schatten { dim } => dim,
    };
    let one = Exponent::ONE;
    let two = Exponent::TWO;
    let inf = Exponent::Infinity;

    // upper bounds
    let n1 = exact_norm(t, one, p_out, cod).unwrap();
    let n2 = singular_values(t).into_iter().fold(0.0, f64::max);
    // ‖Tx‖_{p_out} ≤ c(2 → p_out) ‖Tx‖_2 in the codomain
    let out_from_2 = comparison(rows_dim, two, p_out);
    let mut upper = n1 * comparison(n, p_in, one);
    upper = upper.min(comparison(n, p_in, two) * n2 * out_from_2);
    if let Codomain::Lp { .. } = cod {
        let n_inf_inf = exact_norm(t, inf, inf, cod).unwrap();
        let n11 = exact_norm(t, one, one, cod).unwrap();
        upper = upper.min(n_inf_inf * comparison(rows_dim, inf, p_out));
        if p_in == p_out {
            let r = p_in.recip();
            // 1 ↔ ∞
            upper = upper.min(n11.powf(r) * n_inf_inf.powf(1.0 - r));
            if r >= 0.5 {
                let theta = 2.0 - 2.0 * r;
                upper = upper.min(n11.powf(1.0 - theta) * n2.powf(theta));
            } else {
                let theta = 1.0 - 2.0 * r;
                upper = upper.min(n2.powf(1.0 - theta) * n_inf_inf.powf(theta));
            }
        }
    }

    // lower bounds from probes
    let ratio = |x: &DVector<C64>| {
        let nx = lp_norm(x.as_slice(), p_in);
        if nx == 0.0 {
            return 0.0;
        }
        let y = t * x;
        cod.norm(y.as_slice(), p_out) / nx
    };
    let mut lower = 0.0f64;
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = C64::new(1.0, 0.0);
        lower = lower.max(ratio(&e));
    }
    lower = lower.max(ratio(&DVector::from_element(n, C64::new(1.0, 0.0))));
    if let Some(v_t) = t.clone().svd(false, true).v_t {
        let v: DVector<C64> = v_t.row(0).adjoint();
        lower = lower.max(ratio(&v));
        let phases = v.map(|z| if z.norm() > 0.0 { z / z.norm() } else { C64::new(0.0, 0.0) });
        lower = lower.max(ratio(&phases));
    }
    Ok(NormBracket {
        lower: lower.min(upper),
        upper: upper.max(lower),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sofic::seeded_rng;
    use rand::Rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn p(x: f64) -> Exponent {
        Exponent::new(x).unwrap()
    }

    fn random_vec(seed: u64, d: usize) -> Vec<C64> {
        let mut rng = seeded_rng(seed);
        (0..d).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn random_mat(seed: u64, r: usize, k: usize) -> DMatrix<C64> {
        let v = random_vec(seed, r * k);
        DMatrix::from_vec(r, k, v)
    }

    #[test]
    fn lp_examples() {
        for q in [1.0, 1.5, 2.0, 3.0] {
            assert_eq!(lp_norm(&[c(1.0), c(0.0), c(0.0)], p(q)), 1.0);
        }
        assert_eq!(lp_norm(&[c(1.0); 4], p(2.0)), 2.0);
        assert_eq!(lp_norm(&[c(1.0); 2], p(1.0)), 2.0);
        assert_eq!(lp_norm(&[c(1.0); 2], Exponent::Infinity), 1.0);
        assert!(matches!(Exponent::new(0.5), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn schatten_examples() {
        let xi = random_vec(1, 4);
        let eta = random_vec(2, 4);
        let x = DVector::from_vec(xi.clone());
        let y = DVector::from_vec(eta.clone());
        let rank_one = &x * y.adjoint();
        let expect = lp_norm(&xi, p(2.0)) * lp_norm(&eta, p(2.0));
        for q in [1.0, 1.5, 2.0, 4.0] {
            assert_relative_eq!(schatten_norm_of(&rank_one, p(q)), expect, max_relative = 1e-10);
        }
        assert_relative_eq!(schatten_norm_of(&rank_one, Exponent::Infinity), expect, max_relative = 1e-10);
        let id = DMatrix::<C64>::identity(5, 5);
        assert_relative_eq!(schatten_norm_of(&id, p(3.0)), 5f64.powf(1.0 / 3.0), max_relative = 1e-12);
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![c(3.0), c(4.0)]));
        assert_relative_eq!(schatten_norm(&PMatrix::new(diag, p(2.0)).unwrap()), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn permutation_action_examples() {
        let v = PVector::basis(3, 0, p(2.0));
        let s = Permutation::new(vec![1, 2, 0]).unwrap();
        assert_eq!(permutation_action(&s, &v).unwrap(), PVector::basis(3, 1, p(2.0)));
        let w = PVector::new(random_vec(3, 3), p(1.5)).unwrap();
        assert_eq!(permutation_action(&Permutation::identity(3), &w).unwrap(), w);
        assert!(permutation_action(&Permutation::identity(4), &w).is_err());
        // permutation unitary agrees with the vector action
        let u = permutation_unitary(&s);
        let uv = &u * DVector::from_vec(w.entries.clone());
        assert_eq!(uv.as_slice(), permute(&s, &w.entries).unwrap().as_slice());
    }

    #[test]
    fn schatten_action_examples() {
        let m = PMatrix::new(random_mat(4, 3, 3), p(1.5)).unwrap();
        let id = DMatrix::<C64>::identity(3, 3);
        assert_eq!(schatten_actions(&id, &m, SchattenMode::Conjugate).unwrap(), m);
        let s = Permutation::new(vec![2, 0, 1]).unwrap();
        let u = permutation_unitary(&s);
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(2.0), c(3.0)]));
        let out = schatten_actions(&u, &PMatrix::new(diag, p(2.0)).unwrap(), SchattenMode::Conjugate).unwrap();
        for j in 0..3 {
            assert_eq!(out.entries[(s.apply(j), s.apply(j))], c(j as f64 + 1.0));
        }
        let bad = DMatrix::from_element(3, 3, c(1.0));
        assert!(matches!(schatten_actions(&bad, &m, SchattenMode::Multiply), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = seeded_rng(9);
        for d in [1, 2, 5, 12] {
            assert!(unitarity_defect(&random_unitary(d, &mut rng)) < 1e-12);
        }
    }

    #[test]
    fn product_norm_examples() {
        let q1 = ProductNormSpec::new(1.0, None).unwrap();
        assert_eq!(q1.product_norm(&[1.0]).unwrap(), 0.5);
        assert_eq!(q1.product_norm(&[1.0, 1.0, 1.0]).unwrap(), 0.875);
        let trunc = ProductNormSpec::new(2.0, Some(2)).unwrap();
        assert_eq!(trunc.product_norm(&[0.0, 0.0, 5.0, 1.0]).unwrap(), 0.0);
        assert!(q1.product_norm(&[f64::NAN]).is_err());
        assert!(ProductNormSpec::new(0.5, None).is_err());
        assert!(ProductNormSpec::new(2.0, Some(0)).is_err());
    }

    #[test]
    fn operator_norm_examples() {
        let cod = Codomain::Lp { dim: 4 };
        let id = DMatrix::<C64>::identity(4, 4);
        for q in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let b = operator_pnorm(&id, p(q), p(q), cod, NormMethod::Bracket).unwrap();
            assert_relative_eq!(b.lower, 1.0, max_relative = 1e-12);
            assert_relative_eq!(b.upper, 1.0, max_relative = 1e-12);
        }
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(1.0)]);
        let b = operator_pnorm(&m, p(1.0), p(1.0), Codomain::Lp { dim: 2 }, NormMethod::Exact).unwrap();
        assert_eq!(b, NormBracket::exact(2.0));

        let r = random_mat(7, 10, 10);
        let top = singular_values(&r)[0];
        let b = operator_pnorm(&r, p(2.0), p(2.0), Codomain::Lp { dim: 10 }, NormMethod::Exact).unwrap();
        assert!((b.upper - top).abs() < 1e-8 && b.is_exact());
        assert!(matches!(
            operator_pnorm(&r, p(1.5), p(1.5), Codomain::Lp { dim: 10 }, NormMethod::Exact),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn schatten_codomain_norms() {
        // rank-one image e0 ⊗ e0*: norm 1 for every exponent
        let mut t = DMatrix::<C64>::zeros(9, 1);
        t[(0, 0)] = c(1.0);
        for q in [1.0, 1.5, 2.0] {
            let b = operator_pnorm(&t, p(2.0), p(q), Codomain::Schatten { dim: 3 }, NormMethod::Bracket).unwrap();
            assert_relative_eq!(b.lower, 1.0, max_relative = 1e-12);
            assert_relative_eq!(b.upper, 1.0, max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn norm_ordering(seed in 0u64..1000, q in 1.0f64..6.0) {
            let v = random_vec(seed, 7);
            let l2 = lp_norm(&v, p(2.0));
            let lq = lp_norm(&v, p(q));
            if q <= 2.0 { prop_assert!(lq >= l2 * (1.0 - 1e-12)); }
            else { prop_assert!(lq <= l2 * (1.0 + 1e-12)); }
        }

        #[test]
        fn schatten_two_is_frobenius(seed in 0u64..1000) {
            let m = random_mat(seed, 5, 5);
            let sv = lp_norm_real(&singular_values(&m), p(2.0));
            prop_assert!((sv - m.norm()).abs() <= 1e-10 * m.norm().max(1.0));
        }

        #[test]
        fn actions_are_isometries(seed in 0u64..500, q in 1.0f64..4.0) {
            let mut rng = seeded_rng(seed);
            let d = 5;
            let v = random_vec(seed, d);
            let mut images: Vec<usize> = (0..d).collect();
            rand::seq::SliceRandom::shuffle(images.as_mut_slice(), &mut rng);
            let s = Permutation::new(images).unwrap();
            let pv = permute(&s, &v).unwrap();
            let key = |z: &C64| (z.re.to_bits(), z.im.to_bits());
            let mut a: Vec<_> = pv.iter().map(key).collect();
            let mut b: Vec<_> = v.iter().map(key).collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
            let (n0, n1) = (lp_norm(&v, p(q)), lp_norm(&pv, p(q)));
            prop_assert!((n0 - n1).abs() <= 1e-14 * n0);
            let u = random_unitary(d, &mut rng);
            let m = PMatrix::new(random_mat(seed + 1, d, d), p(q)).unwrap();
            let n0 = m.norm();
            for mode in [SchattenMode::Conjugate, SchattenMode::Multiply] {
                let n1 = schatten_actions(&u, &m, mode).unwrap().norm();
                prop_assert!((n1 - n0).abs() <= 1e-8 * n0);
            }
        }

        #[test]
        fn product_norm_monotone(f in prop::collection::vec(0.0f64..10.0, 1..12), bump in prop::collection::vec(0.0f64..3.0, 12), q in 1.0f64..4.0) {
            let g: Vec<f64> = f.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let rho = ProductNormSpec::new(q, None).unwrap();
            prop_assert!(rho.product_norm(&f).unwrap() <= rho.product_norm(&g).unwrap() + 1e-12);
            let trunc = ProductNormSpec::new(q, Some(3)).unwrap();
            prop_assert!(trunc.product_norm(&f).unwrap() <= rho.product_norm(&f).unwrap() + 1e-12);
        }

        #[test]
        fn bracket_sound(seed in 0u64..300, a in 1.0f64..4.0, b in 1.0f64..4.0) {
            let t = random_mat(seed, 6, 4);
            let br = operator_pnorm(&t, p(a), p(b), Codomain::Lp { dim: 6 }, NormMethod::Bracket).unwrap();
            prop_assert!(br.lower <= br.upper);
            // random probes never exceed the upper end
            let mut rng = seeded_rng(seed ^ 0xabc);
            for _ in 0..20 {
                let x = DVector::from_fn(4, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                let r = lp_norm((&t * &x).as_slice(), p(b)) / lp_norm(x.as_slice(), p(a));
                prop_assert!(r <= br.upper * (1.0 + 1e-10));
            }
        }
    }
}
