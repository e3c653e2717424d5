//! The interpolating functional of the local Bobkov proof.
//!
//! `Ψ(t,u,v) = √(𝓘²(u) + c_α(t) v)` is evaluated along `g = H_{T−t} f`,
//! `Φ(t) = ∫ H_t(Ψ(t, g, Γ(g))) φ dm`, and `ζ` is the density bounding
//! `Φ′` from below in the diffusion setting.

use crate::error::{domain, Result};
use crate::field::ScalarField;
use crate::gauss::{c_alpha, c_alpha_derivative, isoperimetric_profile, profile};
use crate::semigroup::{check_curvature, SpectralCache};
use crate::triple::MarkovTriple;

/// `Ψ` and its partial derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiPartials {
    pub value: f64,
    pub dt: f64,
    pub du: f64,
    pub dv: f64,
    pub duu: f64,
    pub duv: f64,
    pub dvv: f64,
}

/// `Ψ(t,u,v)` for `u ∈ [0,1]`, given `c = c_α(t)`.
pub fn psi_value(c: f64, u: f64, v: f64) -> Result<f64> {
    let i = isoperimetric_profile(u)?;
    let sq = i * i + c * v;
    if !(sq >= 0.0) {
        return domain(format!("Ψ² = {sq} is negative"));
    }
    Ok(sq.sqrt())
}

/// `Ψ` and its closed-form partials; needs `u ∈ (0,1)`, `v ≥ 0`.
pub fn psi(t: f64, u: f64, v: f64, k: f64, alpha: f64) -> Result<PsiPartials> {
    if !(u > 0.0 && u < 1.0) {
        return domain(format!("Ψ partials need u in (0, 1), got {u}"));
    }
    if !(v >= 0.0 && v.is_finite()) {
        return domain(format!("Ψ needs v >= 0, got {v}"));
    }
    let c = c_alpha(k, alpha, t)?;
    let dc = c_alpha_derivative(k, alpha, t)?;
    let p = profile(u)?;
    let (i, ip) = (p.value, p.derivative.expect("interior point"));
    let sq = i * i + c * v;
    if !(sq > 0.0) {
        return domain(format!("Ψ vanishes at (t, u, v) = ({t}, {u}, {v})"));
    }
    let value = sq.sqrt();
    let cube = value * sq;
    Ok(PsiPartials {
        value,
        dt: 0.5 * dc * v / value,
        du: i * ip / value,
        dv: 0.5 * c / value,
        duu: (-i * i * ip * ip + sq * (ip * ip - 1.0)) / cube,
        duv: -0.5 * c * i * ip / cube,
        dvv: -0.25 * c * c / cube,
    })
}

/// `ζ` along `g = H_{T−t} f` evaluated two ways.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaField {
    /// `ζ` from the `Ψ³ζ` closed form.
    pub values: ScalarField,
    /// `ζ` from the six-term definition.
    pub six_term: ScalarField,
    /// Sum of absolute values of the six terms, the scale for comparing the two.
    pub scale: ScalarField,
    /// States with `Γ(g) = 0` but `Γ(Γ(g)) > 0`; the closed form drops `Γ(Γ(g))` there.
    pub degenerate_states: Vec<usize>,
}

impl ZetaField {
    /// Largest `|values − six_term| / scale` over the nondegenerate states.
    pub fn agreement(&self) -> f64 {
        (0..self.values.len())
            .filter(|x| !self.degenerate_states.contains(x))
            .map(|x| {
                let s = self.scale[x];
                let d = (self.values[x] - self.six_term[x]).abs();
                if s > 0.0 {
                    d / s
                } else {
                    d
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn zeta_field(
    cache: &SpectralCache<'_>,
    f: &ScalarField,
    big_t: f64,
    t: f64,
    alpha: f64,
    k: f64,
) -> Result<ZetaField> {
    check_curvature(k)?;
    if !(t > 0.0 && t < big_t) {
        return domain(format!("ζ needs 0 < t < T, got t = {t}, T = {big_t}"));
    }
    if let Some(v) = f.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return domain(format!("ζ needs f with values in (0, 1), found {v}"));
    }
    let triple = cache.triple();
    let g = cache.heat(f, big_t - t)?;
    let gamma_g = triple.carre_du_champ(&g)?;
    let gamma_gamma = triple.carre_du_champ(&gamma_g)?;
    let cross = triple.gamma(&g, &gamma_g)?;
    let gamma2k = triple.gamma2(&g)?.zip_map(&gamma_g, |a, b| a - k * b);
    let c = c_alpha(k, alpha, t)?;

    let n = triple.n();
    let mut values = Vec::with_capacity(n);
    let mut six = Vec::with_capacity(n);
    let mut scale = Vec::with_capacity(n);
    let mut degenerate_states = Vec::new();
    for x in 0..n {
        let (v, gg, cr, gk) = (gamma_g[x], gamma_gamma[x], cross[x], gamma2k[x]);
        let ps = psi(t, g[x], v, k, alpha)?;
        let terms = [ps.dt, ps.duu * v, 2.0 * ps.duv * cr, ps.dvv * gg, 2.0 * k * ps.dv * v, 2.0 * ps.dv * gk];
        six.push(terms.iter().sum::<f64>());
        scale.push(terms.iter().map(|t| t.abs()).sum::<f64>());

        let p = profile(g[x])?;
        let (i, ip) = (p.value, p.derivative.expect("interior point"));
        let gg_term = if v == 0.0 {
            if gg > 0.0 {
                degenerate_states.push(x);
            }
            0.0
        } else {
            -0.25 * gg
        };
        let cube = ps.value.powi(3);
        let closed = c * c * (gg_term + v * gk) + c * (-ip * i * cr + ip * ip * v * v + i * i * gk);
        values.push(closed / cube);
    }
    Ok(ZetaField {
        values: ScalarField::from_vec(values),
        six_term: ScalarField::from_vec(six),
        scale: ScalarField::from_vec(scale),
        degenerate_states,
    })
}

/// `maxₓ [Γ(g,Γ(g))² − Γ(g)Γ(Γ(g))] / max(1, Γ(g)Γ(Γ(g)))`; nonpositive by Cauchy-Schwarz.
pub fn discriminant_margin(triple: &MarkovTriple, g: &ScalarField) -> Result<f64> {
    let gamma_g = triple.carre_du_champ(g)?;
    let gamma_gamma = triple.carre_du_champ(&gamma_g)?;
    let cross = triple.gamma(g, &gamma_g)?;
    Ok((0..triple.n())
        .map(|x| {
            let prod = gamma_g[x] * gamma_gamma[x];
            (cross[x] * cross[x] - prod) / prod.max(1.0)
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `Φ` sampled on a time grid, with the derivative bound and endpoint identity checked.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Central-difference `Φ′` at each grid time.
    pub derivative: Vec<f64>,
    /// `∫ ζ H_t φ dm` at each grid time.
    pub derivative_bound: Vec<f64>,
    pub phi_start: f64,
    pub phi_end: f64,
    /// `|Φ(T) − Φ(0) − ∫[H_T(√(𝓘²(f) + c_α(T)Γ(f))) − √(𝓘²(H_T f) + αΓ(H_T f))] φ dm|`.
    pub endpoint_residual: f64,
}

impl PhiTrace {
    /// Largest `bound − Φ′` over the grid; positive means the bound fails.
    pub fn worst_derivative_gap(&self) -> f64 {
        self.derivative_bound.iter().zip(&self.derivative).map(|(b, d)| b - d).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn phi_at(cache: &SpectralCache<'_>, f: &ScalarField, phi: &ScalarField, big_t: f64, t: f64, alpha: f64, k: f64) -> Result<f64> {
    let triple = cache.triple();
    let g = cache.heat(f, big_t - t)?;
    let gamma_g = triple.carre_du_champ(&g)?;
    let c = c_alpha(k, alpha, t)?;
    let inner: Vec<f64> =
        g.iter().zip(gamma_g.iter()).map(|(&u, &v)| psi_value(c, u.clamp(0.0, 1.0), v)).collect::<Result<_>>()?;
    let lifted = cache.heat(&ScalarField::new(inner)?, t)?;
    triple.inner(&lifted, phi)
}

#[allow(clippy::too_many_arguments)]
pub fn phi_trace(
    cache: &SpectralCache<'_>,
    f: &ScalarField,
    phi: &ScalarField,
    big_t: f64,
    alpha: f64,
    k: f64,
    time_grid: &[f64],
) -> Result<PhiTrace> {
    check_curvature(k)?;
    if time_grid.is_empty() {
        return domain("Φ trace needs a nonempty time grid");
    }
    if !(big_t > 0.0 && big_t.is_finite()) {
        return domain(format!("Φ trace needs T > 0, got {big_t}"));
    }
    if let Some(&t) = time_grid.iter().find(|&&t| !(t > 0.0 && t < big_t)) {
        return domain(format!("grid time {t} outside (0, {big_t})"));
    }
    if let Some(v) = phi.iter().find(|v| **v < 0.0) {
        return domain(format!("φ must be nonnegative, found {v}"));
    }
    super::check_unit_range(f, "Φ trace")?;
    let triple = cache.triple();
    triple.check(phi)?;

    let mut values = Vec::with_capacity(time_grid.len());
    let mut derivative = Vec::with_capacity(time_grid.len());
    let mut derivative_bound = Vec::with_capacity(time_grid.len());
    for &t in time_grid {
        values.push(phi_at(cache, f, phi, big_t, t, alpha, k)?);
        let h = 1e-4 * big_t.min(t).min(big_t - t);
        let up = phi_at(cache, f, phi, big_t, t + h, alpha, k)?;
        let down = phi_at(cache, f, phi, big_t, t - h, alpha, k)?;
        derivative.push((up - down) / (2.0 * h));
        let zeta = zeta_field(cache, f, big_t, t, alpha, k)?;
        derivative_bound.push(triple.inner(&zeta.values, &cache.heat(phi, t)?)?);
    }

    let phi_start = phi_at(cache, f, phi, big_t, 0.0, alpha, k)?;
    let phi_end = phi_at(cache, f, phi, big_t, big_t, alpha, k)?;

    let c_end = c_alpha(k, alpha, big_t)?;
    let gamma_f = triple.carre_du_champ(f)?;
    let start: Vec<f64> = f.iter().zip(gamma_f.iter()).map(|(&u, &v)| psi_value(c_end, u, v)).collect::<Result<_>>()?;
    let rhs = cache.heat(&ScalarField::new(start)?, big_t)?;
    let hf = cache.heat(f, big_t)?;
    let gamma_hf = triple.carre_du_champ(&hf)?;
    let lhs: Vec<f64> =
        hf.iter().zip(gamma_hf.iter()).map(|(&u, &v)| psi_value(alpha, u.clamp(0.0, 1.0), v)).collect::<Result<_>>()?;
    let gap = triple.inner(&(&rhs - &ScalarField::new(lhs)?), phi)?;

    Ok(PhiTrace {
        times: time_grid.to_vec(),
        values,
        derivative,
        derivative_bound,
        phi_start,
        phi_end,
        endpoint_residual: (phi_end - phi_start - gap).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces;

    #[test]
    fn partials_match_finite_differences() {
        let (t, u, v, k, alpha) = (0.5, 0.3, 0.2, 1.0, 0.5);
        let p = psi(t, u, v, k, alpha).unwrap();
        let val = |t: f64, u: f64, v: f64| psi(t, u, v, k, alpha).unwrap().value;
        let h = 1e-4;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-3);
        assert!(rel((val(t + h, u, v) - val(t - h, u, v)) / (2.0 * h), p.dt) < 1e-6);
        assert!(rel((val(t, u + h, v) - val(t, u - h, v)) / (2.0 * h), p.du) < 1e-6);
        assert!(rel((val(t, u, v + h) - val(t, u, v - h)) / (2.0 * h), p.dv) < 1e-6);
        let h2 = 1e-3;
        let duu = (val(t, u + h2, v) - 2.0 * p.value + val(t, u - h2, v)) / (h2 * h2);
        assert!(rel(duu, p.duu) < 1e-5, "{duu} {}", p.duu);
        let dvv = (val(t, u, v + h2) - 2.0 * p.value + val(t, u, v - h2)) / (h2 * h2);
        assert!(rel(dvv, p.dvv) < 1e-5);
        let duv = (val(t, u + h2, v + h2) - val(t, u + h2, v - h2) - val(t, u - h2, v + h2) + val(t, u - h2, v - h2))
            / (4.0 * h2 * h2);
        assert!(rel(duv, p.duv) < 1e-5);
    }

    #[test]
    fn psi_special_cases() {
        let p = psi(0.7, 0.4, 0.0, 1.0, 1.0).unwrap();
        let i = isoperimetric_profile(0.4).unwrap();
        assert!((p.value - i).abs() < 1e-15);
        assert!((p.dv - 1.0 / (2.0 * i)).abs() < 1e-14);
        assert_eq!(psi(0.7, 0.4, 0.3, 1.0, 1.0).unwrap().dt, 0.0);
        assert!(psi(0.7, 0.0, 0.3, 1.0, 1.0).is_err());
        assert!(psi(0.7, 0.4, -0.3, 1.0, 1.0).is_err());
    }

    #[test]
    fn zeta_vanishes_on_constants() {
        let t = spaces::cycle(5).unwrap();
        let cache = SpectralCache::build(&t).unwrap();
        let f = ScalarField::constant(5, 0.3);
        let z = zeta_field(&cache, &f, 1.0, 0.5, 0.5, 0.5).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        assert!(z.degenerate_states.is_empty());
        assert!(zeta_field(&cache, &f, 1.0, 1.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn phi_constant_in_time_for_constant_f() {
        let t = spaces::cycle(5).unwrap();
        let cache = SpectralCache::build(&t).unwrap();
        let f = ScalarField::constant(5, 0.3);
        let phi = ScalarField::new(vec![1.0, 0.0, 2.0, 0.5, 0.0]).unwrap();
        let tr = phi_trace(&cache, &f, &phi, 1.0, 0.5, 0.5, &[0.25, 0.5, 0.75]).unwrap();
        let expected = isoperimetric_profile(0.3).unwrap() * t.integrate(&phi).unwrap();
        for v in tr.values.iter().chain([&tr.phi_start, &tr.phi_end]) {
            assert!((v - expected).abs() < 1e-12);
        }
        assert!(tr.endpoint_residual < 1e-12);
        assert!(phi_trace(&cache, &f, &phi, 1.0, 0.5, 0.5, &[]).is_err());
        let neg = ScalarField::new(vec![-1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(phi_trace(&cache, &f, &neg, 1.0, 0.5, 0.5, &[0.5]).is_err());
    }
}
