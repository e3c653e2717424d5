//! Heat semigroup `H_t = exp(tL)` through a one-time spectral decomposition.
//!
//! The generator is similar to the symmetric matrix `S = M^{1/2} L M^{-1/2}`
//! (`M = diag(m)`), so `H_t = M^{-1/2} Q e^{tΛ} Qᵀ M^{1/2}` with `S = QΛQᵀ`.
//! The decomposition is computed once per triple and reused for every time.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{domain, Error, Result};
use crate::field::ScalarField;
use crate::gauss;
use crate::triple::MarkovTriple;

/// Spectral tolerance for the reconstruction and zero-eigenvalue checks.
pub const SPECTRAL_TOL: f64 = 1e-10;

/// Negative heat-kernel entries at or above this value are rounding and get clipped to zero.
pub const KERNEL_CLIP_FLOOR: f64 = -1e-12;

const EIGEN_MAX_ITER: usize = 100_000;

/// Uniformized step `q·s` of the kernel series before squaring.
const BASE_STEP: f64 = 8.0;
const MAX_POISSON_TERMS: usize = 80;

#[derive(Debug, Clone)]
pub struct SpectralCache<'a> {
    triple: &'a MarkovTriple,
    sqrt_measure: Vec<f64>,
    /// Descending: `λ₁ = 0 > λ₂ ≥ …`.
    eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors of `S`, one per column.
    basis: DMatrix<f64>,
}

fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

impl<'a> SpectralCache<'a> {
    pub fn build(triple: &'a MarkovTriple) -> Result<Self> {
        let n = triple.n();
        let sqrt_measure: Vec<f64> = triple.measure().iter().map(|m| m.sqrt()).collect();
        let mut sym = DMatrix::zeros(n, n);
        for x in 0..n {
            sym[(x, x)] = triple.diagonal(x);
            for nb in triple.neighbors(x) {
                // Average both orientations so S is exactly symmetric.
                let forward = sqrt_measure[x] * nb.rate / sqrt_measure[nb.state];
                let backward = sqrt_measure[nb.state] * triple.rate(nb.state, x) / sqrt_measure[x];
                sym[(x, nb.state)] = 0.5 * (forward + backward);
            }
        }

        let eig = SymmetricEigen::try_new(sym.clone(), f64::EPSILON, EIGEN_MAX_ITER).ok_or_else(|| {
            Error::EigenNonConvergence(format!("symmetric generator of size {n} after {EIGEN_MAX_ITER} sweeps"))
        })?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let mut basis = DMatrix::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            let mut v = eig.eigenvectors.column(k).clone_owned();
            let scale = v.amax();
            if let Some(first) = v.iter().find(|c| c.abs() > 1e-12 * scale) {
                if *first < 0.0 {
                    v.neg_mut();
                }
            }
            basis.set_column(col, &v);
        }

        // The stationary eigenvector is known in closed form: √m.
        if n > 0 {
            let norm = sqrt_measure.iter().map(|s| s * s).sum::<f64>().sqrt();
            basis.set_column(0, &DVector::from_iterator(n, sqrt_measure.iter().map(|s| s / norm)));
        }
        let cache = Self { triple, sqrt_measure, eigenvalues, basis };
        cache.verify(&sym)?;
        Ok(cache)
    }

    fn verify(&self, sym: &DMatrix<f64>) -> Result<()> {
        let recon = &self.basis * DMatrix::from_diagonal(&self.eigenvalues) * self.basis.transpose();
        let err = inf_norm(&(sym - recon));
        let norm = inf_norm(sym);
        if err > SPECTRAL_TOL * norm {
            return Err(Error::Spectral(format!("reconstruction error {err:e} exceeds {SPECTRAL_TOL:e}·{norm:e}")));
        }
        if let Some(&top) = self.eigenvalues.iter().next() {
            if top > SPECTRAL_TOL {
                return Err(Error::Spectral(format!("positive eigenvalue {top:e}")));
            }
        }
        let zeros = self.eigenvalues.iter().filter(|l| l.abs() <= SPECTRAL_TOL).count();
        if zeros != 1 {
            return Err(Error::Spectral(format!(
                "{zeros} eigenvalues within {SPECTRAL_TOL:e} of zero; support is disconnected or degenerate"
            )));
        }
        Ok(())
    }

    pub fn triple(&self) -> &'a MarkovTriple {
        self.triple
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.eigenvalues.as_slice()
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `−λ₂`; zero for a single-state triple.
    pub fn spectral_gap(&self) -> f64 {
        self.eigenvalues.get(1).map_or(0.0, |l| -l)
    }

    /// `H_t f`. `H_0` is the identity exactly.
    pub fn heat(&self, f: &ScalarField, t: f64) -> Result<ScalarField> {
        self.triple.check(f)?;
        check_time(t)?;
        if t == 0.0 {
            return Ok(f.clone());
        }
        if f.iter().all(|&v| v == f[0]) {
            return Ok(f.clone());
        }
        // The stationary component is handled exactly; only the centered part is propagated.
        let mean = self.triple.integrate(f)?;
        let n = self.triple.n();
        let scaled = DVector::from_iterator(n, f.iter().zip(&self.sqrt_measure).map(|(v, s)| (v - mean) * s));
        let mut coeffs = self.basis.tr_mul(&scaled);
        coeffs[0] = 0.0;
        for (c, l) in coeffs.iter_mut().zip(self.eigenvalues.iter()).skip(1) {
            *c *= (l * t).exp();
        }
        let out = &self.basis * coeffs;
        Ok(ScalarField::from_vec(out.iter().zip(&self.sqrt_measure).map(|(v, s)| mean + v / s).collect()))
    }

    /// Transition matrix `P_t` with `H_t f(x) = Σ_y P_t(x,y) f(y)`.
    ///
    /// Built by uniformization and repeated squaring: with `q ≥ maxₓ |L(x,x)|`,
    /// `P_s = e^{−qs} Σ_j (qs)ʲ/j! (I + L/q)ʲ` for a short step `s`, then
    /// `P_t = P_s^{2^k}`. Every term is entrywise nonnegative, so tail rows keep
    /// full relative accuracy where the spectral form `M^{−1/2}Qe^{tΛ}QᵀM^{1/2}`
    /// would amplify rounding by `√(m(y)/m(x))`. Entries in `[−1e−12, 0)` are
    /// clipped to zero and counted; anything more negative is an error.
    pub fn heat_kernel(&self, t: f64) -> Result<HeatKernel> {
        if !(t > 0.0 && t.is_finite()) {
            return domain(format!("heat kernel needs t > 0, got {t}"));
        }
        let n = self.triple.n();
        let q = (0..n).map(|x| -self.triple.diagonal(x)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        // A long base step keeps the number of squarings, and with it the rounding growth, small.
        let squarings = (q * t / BASE_STEP).log2().ceil().max(0.0) as i32;
        let qs = q * t / 2f64.powi(squarings);

        let mut jump = DMatrix::identity(n, n);
        for x in 0..n {
            jump[(x, x)] += self.triple.diagonal(x) / q;
            for nb in self.triple.neighbors(x) {
                jump[(x, nb.state)] = nb.rate / q;
            }
        }
        let mut term = DMatrix::identity(n, n);
        let mut matrix = DMatrix::identity(n, n);
        let mut weight = 1.0;
        for j in 1..=MAX_POISSON_TERMS {
            weight *= qs / j as f64;
            term = &term * &jump;
            matrix += &term * weight;
            if j as f64 > qs && weight * (-qs).exp() < 1e-18 {
                break;
            }
        }
        matrix *= (-qs).exp();
        for _ in 0..squarings {
            matrix = &matrix * &matrix;
        }

        let mut clipped = 0;
        for x in 0..n {
            for y in 0..n {
                let v = matrix[(x, y)];
                if v < 0.0 {
                    if v < KERNEL_CLIP_FLOOR {
                        return Err(Error::NegativeKernelEntry { row: x, col: y, value: v });
                    }
                    clipped += 1;
                    matrix[(x, y)] = 0.0;
                }
            }
        }
        Ok(HeatKernel { t, matrix, clipped })
    }

    /// `‖H_t f − ∫f dm‖_{L²(m)}`.
    pub fn ergodic_defect(&self, f: &ScalarField, t: f64) -> Result<f64> {
        let mean = self.triple.integrate(f)?;
        let centered = self.heat(f, t)?.map(|v| v - mean);
        self.triple.l2_norm(&centered)
    }

    /// Pointwise sides of `Γ(H_t f) ≤ e^{−2Kt} H_t(Γ(f))`.
    pub fn gradient_estimate(&self, f: &ScalarField, t: f64, k: f64) -> Result<MarginField> {
        check_curvature(k)?;
        let ht = self.heat(f, t)?;
        let lhs = self.triple.carre_du_champ(&ht)?;
        let rhs = &self.heat(&self.triple.carre_du_champ(f)?, t)? * (-2.0 * k * t).exp();
        Ok(MarginField { lhs, rhs })
    }

    /// `maxₓ [Γ(H_t f) − e^{−2Kt} H_t(Γ(f))](x)`.
    pub fn gradient_estimate_margin(&self, f: &ScalarField, t: f64, k: f64) -> Result<f64> {
        Ok(self.gradient_estimate(f, t, k)?.worst().1)
    }

    /// Pointwise sides of `2ι_{2K}(t) Γ(H_t f) ≤ H_t(f²) − (H_t f)²`.
    pub fn variance_regularization(&self, f: &ScalarField, t: f64, k: f64) -> Result<MarginField> {
        if !(t > 0.0) {
            return domain(format!("variance bound needs t > 0, got {t}"));
        }
        check_curvature(k)?;
        let weight = 2.0 * gauss::iota(k, t)?;
        let ht = self.heat(f, t)?;
        let lhs = &self.triple.carre_du_champ(&ht)? * weight;
        let rhs = self.heat(&(f * f), t)?.zip_map(&ht, |a, b| a - b * b);
        Ok(MarginField { lhs, rhs })
    }

    /// Worst violation of the variance bound; the right side is also checked against `‖f‖²_∞`.
    pub fn variance_regularization_margin(&self, f: &ScalarField, t: f64, k: f64) -> Result<f64> {
        let field = self.variance_regularization(f, t, k)?;
        let cap = f.sup_norm().powi(2);
        let upper = field.rhs.max() - cap;
        Ok(field.worst().1.max(upper))
    }

    /// Sides of the slope form `lip H_t f ≤ e^{−2Kt} H_t(Γ(f))`; reported only, no inequality
    /// between them is implied on a graph.
    pub fn slope_gradient_diagnostic(&self, f: &ScalarField, t: f64, k: f64) -> Result<MarginField> {
        check_curvature(k)?;
        let lhs = self.triple.lip_slope(&self.heat(f, t)?)?;
        let rhs = &self.heat(&self.triple.carre_du_champ(f)?, t)? * (-2.0 * k * t).exp();
        Ok(MarginField { lhs, rhs })
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("time must be nonnegative and finite, got {t}"));
    }
    Ok(())
}

pub(crate) fn check_curvature(k: f64) -> Result<()> {
    if k == f64::NEG_INFINITY {
        return Err(Error::UnboundedCurvature);
    }
    if !k.is_finite() {
        return domain(format!("curvature constant must be finite, got {k}"));
    }
    Ok(())
}

/// Row-stochastic heat kernel at a fixed time.
#[derive(Debug, Clone)]
pub struct HeatKernel {
    pub t: f64,
    pub matrix: DMatrix<f64>,
    /// Number of rounding-level negative entries set to zero.
    pub clipped: usize,
}

/// Left and right sides of a pointwise inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginField {
    pub lhs: ScalarField,
    pub rhs: ScalarField,
}

impl MarginField {
    pub fn margins(&self) -> ScalarField {
        &self.lhs - &self.rhs
    }

    /// State and value of the largest `lhs − rhs`.
    pub fn worst(&self) -> (usize, f64) {
        self.margins().argmax().unwrap_or((0, f64::NEG_INFINITY))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces;

    fn field(v: &[f64]) -> ScalarField {
        ScalarField::new(v.to_vec()).unwrap()
    }

    #[test]
    fn two_point_spectrum_and_flow() {
        let t = spaces::two_point(1.0).unwrap();
        let cache = SpectralCache::build(&t).unwrap();
        assert!(cache.eigenvalues()[0].abs() < 1e-15);
        assert!((cache.eigenvalues()[1] + 2.0).abs() < 1e-14);
        assert!((cache.spectral_gap() - 2.0).abs() < 1e-14);
        let f = field(&[0.0, 1.0]);
        for time in [0.1, 0.5, 1.0, 3.0] {
            let h = cache.heat(&f, time).unwrap();
            let e = (-2.0 * time).exp();
            assert!((h[0] - (0.5 - 0.5 * e)).abs() < 1e-15);
            assert!((h[1] - (0.5 + 0.5 * e)).abs() < 1e-15);
            let p = cache.heat_kernel(time).unwrap();
            assert!((p.matrix[(0, 0)] - (0.5 + 0.5 * e)).abs() < 1e-15);
            assert!((p.matrix[(0, 1)] - (0.5 - 0.5 * e)).abs() < 1e-15);
        }
        assert_eq!(cache.heat(&f, 0.0).unwrap(), f);
        let defect = cache.ergodic_defect(&f, 1.0).unwrap();
        assert!((defect - 0.5 * (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn complete_graph_spectrum() {
        let t = spaces::complete(3).unwrap();
        let cache = SpectralCache::build(&t).unwrap();
        let ev = cache.eigenvalues();
        assert!(ev[0].abs() < 1e-14);
        assert!((ev[1] + 3.0).abs() < 1e-14 && (ev[2] + 3.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvector_sign_convention() {
        let t = spaces::cycle(6).unwrap();
        let cache = SpectralCache::build(&t).unwrap();
        for col in cache.eigenvectors().column_iter() {
            let first = col.iter().find(|c| c.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn errors_on_bad_times() {
        let t = spaces::two_point(1.0).unwrap();
        let cache = SpectralCache::build(&t).unwrap();
        let f = field(&[0.0, 1.0]);
        assert!(cache.heat(&f, -1.0).is_err());
        assert!(cache.heat_kernel(0.0).is_err());
        assert!(cache.variance_regularization(&f, 0.0, 2.0).is_err());
        assert!(matches!(cache.gradient_estimate(&f, 1.0, f64::NEG_INFINITY), Err(Error::UnboundedCurvature)));
    }

    #[test]
    fn two_point_gradient_estimate_is_equality() {
        let t = spaces::two_point(1.0).unwrap();
        let cache = SpectralCache::build(&t).unwrap();
        let f = field(&[0.0, 1.0]);
        for time in [0.0, 0.1, 0.5, 1.0, 2.0] {
            let m = cache.gradient_estimate_margin(&f, time, 2.0).unwrap();
            assert!(m.abs() <= 1e-12, "t={time}: {m:e}");
        }
    }

    #[test]
    fn constant_field_is_stationary() {
        let t = spaces::ou_chain(50, 5.0).unwrap();
        let cache = SpectralCache::build(&t).unwrap();
        let c = ScalarField::constant(50, 0.3);
        for time in [0.01, 1.0, 10.0] {
            let h = cache.heat(&c, time).unwrap();
            assert!(h.iter().all(|v| (v - 0.3).abs() < 1e-12));
        }
        let vr = cache.variance_regularization_margin(&c, 1.0, 1.0).unwrap();
        assert!(vr.abs() < 1e-12);
    }
}
