//! Brute-force ε-dimension oracle for tiny l² families.
//!
//! Candidates are the span of every subset of `A` and, for every subset, each
//! of its principal subspaces (top eigenvectors of `Σ a a*`). The oracle is the
//! least dimension among candidates whose residuals are all below ε. It is an
//! upper bound on `d_ε(A)`, so every sound lower bound must sit below it.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

fn norm(v: &[C64]) -> f64 {
    dot(v, v).re.sqrt()
}

/// Modified Gram–Schmidt; drops directions below `1e-10`.
pub fn orthonormalize(vs: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let mut q: Vec<Vec<C64>> = Vec::new();
    for v in vs {
        let mut r = v.clone();
        for b in &q {
            let c = dot(b, &r);
            for (x, y) in r.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        let n = norm(&r);
        if n > 1e-10 {
            q.push(r.into_iter().map(|x| x / n).collect());
        }
    }
    q
}

/// `max_a ‖a − P_Q a‖₂` for an orthonormal `Q`.
pub fn max_residual(q: &[Vec<C64>], a: &[Vec<C64>]) -> f64 {
    a.iter()
        .map(|v| {
            let mut r = v.clone();
            for b in q {
                let c = dot(b, v);
                for (x, y) in r.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
            norm(&r)
        })
        .fold(0.0, f64::max)
}

fn principal(vs: &[Vec<C64>], d: usize) -> Vec<Vec<C64>> {
    let mut c = DMatrix::<C64>::zeros(d, d);
    for v in vs {
        for i in 0..d {
            for j in 0..d {
                c[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    let e = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| e.eigenvalues[j].total_cmp(&e.eigenvalues[i]));
    order
        .into_iter()
        .filter(|&i| e.eigenvalues[i] > 1e-12)
        .map(|i| e.eigenvectors.column(i).iter().copied().collect())
        .collect()
}

/// Least candidate dimension that ε-contains `a` in l².
pub fn brute_force_eps_dim(a: &[Vec<C64>], eps: f64) -> usize {
    let d = a[0].len();
    let mut best = d;
    if max_residual(&[], a) < eps {
        return 0;
    }
    for mask in 1u32..(1 << a.len()) {
        let sub: Vec<Vec<C64>> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| a[i].clone()).collect();
        let q = orthonormalize(&sub);
        if q.len() < best && max_residual(&q, a) < eps {
            best = q.len();
        }
        let pcs = principal(&sub, d);
        for t in 1..=pcs.len().min(best.saturating_sub(1)) {
            if max_residual(&pcs[..t], a) < eps {
                best = t;
                break;
            }
        }
    }
    best
}

/// Seeded family in dimension `≤ 4` with `≤ 5` members, near a random
/// low-dimensional subspace, plus an ε.
pub fn random_instance(seed: u64) -> (Vec<Vec<C64>>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(1..=4);
    let k = rng.gen_range(1..=5);
    let r = rng.gen_range(1..=d);
    let noise = [0.0, 0.05, 0.2, 0.5][rng.gen_range(0..4)];
    let mut g = |s: f64| C64::new(rng.gen_range(-s..s), rng.gen_range(-s..s));
    let basis: Vec<Vec<C64>> = (0..r).map(|_| (0..d).map(|_| g(1.0)).collect()).collect();
    let a = (0..k)
        .map(|_| {
            let coef: Vec<C64> = (0..r).map(|_| g(1.0)).collect();
            (0..d)
                .map(|i| (0..r).map(|j| coef[j] * basis[j][i]).sum::<C64>() + if noise > 0.0 { g(noise) } else { C64::new(0.0, 0.0) })
                .collect()
        })
        .collect();
    let eps = rng.gen_range(0.05..0.9);
    (a, eps)
}
