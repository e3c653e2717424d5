//! Independent reference computations for tests.
//!
//! Nothing here calls into the calculus, semigroup or curvature modules: the
//! operators are rebuilt from the dense generator through the product rule,
//! the heat kernel through a scaled Taylor series, and the curvature by
//! direct minimization of the Rayleigh quotient.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `Γ(f,g) = ½(L(fg) − fLg − gLf)` from a dense generator.
pub fn dense_gamma(l: &DMatrix<f64>, f: &[f64], g: &[f64]) -> Vec<f64> {
    let n = f.len();
    let fv = DVector::from_column_slice(f);
    let gv = DVector::from_column_slice(g);
    let fg = fv.component_mul(&gv);
    let lfg = l * fg;
    let lf = l * &fv;
    let lg = l * &gv;
    (0..n).map(|x| 0.5 * (lfg[x] - f[x] * lg[x] - g[x] * lf[x])).collect()
}

/// `Γ₂(f) = ½LΓ(f) − Γ(f, Lf)` from a dense generator.
pub fn dense_gamma2(l: &DMatrix<f64>, f: &[f64]) -> Vec<f64> {
    let g = DVector::from_vec(dense_gamma(l, f, f));
    let lg = l * g;
    let lf: Vec<f64> = (l * DVector::from_column_slice(f)).iter().copied().collect();
    let cross = dense_gamma(l, f, &lf);
    (0..f.len()).map(|x| 0.5 * lg[x] - cross[x]).collect()
}

/// `exp(tL)` by scaling and squaring of a truncated Taylor series.
pub fn expm_kernel(l: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = l.nrows();
    let norm = l.iter().fold(0.0f64, |a, v| a.max(v.abs())) * n as f64 * t;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let a = l * (t / 2f64.powi(squarings as i32));
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

fn ratio(l: &DMatrix<f64>, x: usize, f: &[f64]) -> (f64, f64) {
    (dense_gamma2(l, f)[x], dense_gamma(l, f, f)[x])
}

/// `min_f Γ₂(f)(x)/Γ(f)(x)` by exact coordinate-wise minimization with random restarts.
///
/// Along `f + s eᵢ` numerator and denominator are quadratics in `s`; their
/// coefficients are recovered from values at `s ∈ {−1, 0, 1}` and the ratio
/// is minimized in closed form, including the limit `s → ∞`.
pub fn brute_force_curvature_at(l: &DMatrix<f64>, x: usize, restarts: usize, seed: u64) -> f64 {
    let n = l.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut best = f64::INFINITY;
    for _ in 0..restarts {
        let mut f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (mut num, mut den) = ratio(l, x, &f);
        if den <= 0.0 {
            continue;
        }
        let mut q = num / den;
        for _sweep in 0..5000 {
            let before = q;
            for i in 0..n {
                let mut probe = f.clone();
                probe[i] = f[i] + 1.0;
                let (np, dp) = ratio(l, x, &probe);
                probe[i] = f[i] - 1.0;
                let (nm, dm) = ratio(l, x, &probe);
                let (a0, a1, a2) = (num, 0.5 * (np - nm), 0.5 * (np + nm) - num);
                let (b0, b1, b2) = (den, 0.5 * (dp - dm), 0.5 * (dp + dm) - den);

                let mut cands: Vec<f64> = Vec::new();
                let (c2, c1, c0) = (a2 * b1 - a1 * b2, 2.0 * (a2 * b0 - a0 * b2), a1 * b0 - a0 * b1);
                if c2.abs() > 1e-300 {
                    let disc = c1 * c1 - 4.0 * c2 * c0;
                    if disc >= 0.0 {
                        let r = disc.sqrt();
                        cands.push((-c1 + r) / (2.0 * c2));
                        cands.push((-c1 - r) / (2.0 * c2));
                    }
                } else if c1.abs() > 1e-300 {
                    cands.push(-c0 / c1);
                }
                let mut best_s = None;
                let mut best_q = q;
                for s in cands {
                    let d = b0 + b1 * s + b2 * s * s;
                    if !s.is_finite() || d <= 1e-14 * (b0.abs() + b2.abs() * s * s) {
                        continue;
                    }
                    let v = (a0 + a1 * s + a2 * s * s) / d;
                    if v < best_q {
                        best_q = v;
                        best_s = Some(s);
                    }
                }
                let limit_better = b2 > 0.0 && a2 / b2 < best_q;
                if limit_better {
                    f.iter_mut().for_each(|v| *v = 0.0);
                    f[i] = 1.0;
                } else if let Some(s) = best_s {
                    f[i] += s;
                } else {
                    continue;
                }
                let scale = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                f.iter_mut().for_each(|v| *v /= scale);
                (num, den) = ratio(l, x, &f);
                q = num / den;
            }
            if (before - q).abs() <= 1e-15 * q.abs().max(1.0) {
                break;
            }
        }
        best = best.min(q);
    }
    best
}

/// Smallest local brute-force curvature over all states.
pub fn brute_force_curvature(l: &DMatrix<f64>, restarts: usize, seed: u64) -> f64 {
    (0..l.nrows()).map(|x| brute_force_curvature_at(l, x, restarts, seed)).fold(f64::INFINITY, f64::min)
}
