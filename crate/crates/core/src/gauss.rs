//! Standard Gaussian special functions and the Gaussian isoperimetric profile.
//!
//! `H` is the standard normal distribution function, `h = H′` its density
//! and `𝓘 = h ∘ H⁻¹` the isoperimetric profile on `[0, 1]`. The profile
//! solves `𝓘 𝓘″ = −1` with `𝓘′ = −H⁻¹`.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{domain, Result};

/// `1/√(2π)`, the maximum of the profile (at `p = ½`).
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Below this `|K|` the curvature-dependent coefficients switch to their Taylor expansion.
pub const SMALL_CURVATURE: f64 = 1e-8;

/// Standard normal distribution function `H(r)`.
pub fn normal_cdf(r: f64) -> f64 {
    0.5 * libm::erfc(-r * FRAC_1_SQRT_2)
}

/// Standard normal density `h(r)`.
pub fn normal_pdf(r: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * r * r).exp()
}

/// Acklam's rational approximation to the normal quantile, relative error ~1e-9.
fn quantile_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Quantile for `0 < q ≤ ½` by bracketed Newton iteration on [`normal_cdf`].
fn lower_quantile(q: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0_f64, 0.0_f64);
    let mut r = quantile_guess(q).clamp(lo, hi);
    for _ in 0..100 {
        let residual = normal_cdf(r) - q;
        if residual == 0.0 {
            break;
        }
        if residual < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let mut next = r - residual / normal_pdf(r);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - r).abs();
        r = next;
        if step <= 4.0 * f64::EPSILON * r.abs().max(1.0) {
            break;
        }
    }
    r
}

/// Standard normal quantile `H⁻¹(p)` for `p ∈ (0, 1)`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("normal quantile needs p in (0, 1), got {p}"));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // 1 − p is exact for p ≥ ½.
    Ok(if p < 0.5 { lower_quantile(p) } else { -lower_quantile(1.0 - p) })
}

/// The profile and its first two derivatives at a probability level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub p: f64,
    pub value: f64,
    /// `𝓘′(p) = −H⁻¹(p)`; `None` at the endpoints.
    pub derivative: Option<f64>,
    /// `𝓘″(p) = −1/𝓘(p)`; `None` at the endpoints.
    pub second_derivative: Option<f64>,
}

/// Evaluates `𝓘(p)`, `𝓘′(p)` and `𝓘″(p)`.
pub fn profile(p: f64) -> Result<ProfilePoint> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("profile needs p in [0, 1], got {p}"));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(ProfilePoint { p, value: 0.0, derivative: None, second_derivative: None });
    }
    let r = normal_quantile(p)?;
    let value = normal_pdf(r);
    Ok(ProfilePoint { p, value, derivative: Some(-r), second_derivative: Some(-1.0 / value) })
}

/// `𝓘(p)` alone.
pub fn isoperimetric_profile(p: f64) -> Result<f64> {
    Ok(profile(p)?.value)
}

/// `c_α(t) = (1 − e^{−2Kt})/K + α e^{−2Kt}`, with the limit `2t + α` at `K = 0`.
pub fn c_alpha(k: f64, alpha: f64, t: f64) -> Result<f64> {
    check_coefficient_args(k, alpha, t)?;
    if k.abs() < SMALL_CURVATURE {
        let (kt, kk) = (k * t, k * k);
        return Ok(2.0 * t + alpha - 2.0 * kt * (t + alpha) + kk * t * t * (4.0 / 3.0 * t + 2.0 * alpha));
    }
    let decay = (-2.0 * k * t).exp();
    Ok(-(-2.0 * k * t).exp_m1() / k + alpha * decay)
}

/// `c′_α(t) = 2e^{−2Kt}(1 − Kα)`.
pub fn c_alpha_derivative(k: f64, alpha: f64, t: f64) -> Result<f64> {
    check_coefficient_args(k, alpha, t)?;
    Ok(2.0 * (-2.0 * k * t).exp() * (1.0 - k * alpha))
}

/// `ι_{2K}(t) = (e^{2Kt} − 1)/(2K)`, with the limit `t` at `K = 0`.
pub fn iota(k: f64, t: f64) -> Result<f64> {
    if !k.is_finite() {
        return domain(format!("curvature constant must be finite, got {k}"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("time must be nonnegative, got {t}"));
    }
    if k.abs() < SMALL_CURVATURE {
        return Ok(t + k * t * t + 2.0 / 3.0 * k * k * t * t * t);
    }
    Ok((2.0 * k * t).exp_m1() / (2.0 * k))
}

fn check_coefficient_args(k: f64, alpha: f64, t: f64) -> Result<()> {
    if !k.is_finite() {
        return domain(format!("curvature constant must be finite, got {k}"));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return domain(format!("alpha must be nonnegative, got {alpha}"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("time must be nonnegative, got {t}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    // 25-digit references from an arbitrary-precision evaluation (mpmath, 40 digits).
    const CDF_REF: [(f64, f64, f64); 13] = [
        (-30.0, 4.906713927148187059533809e-198, 1.473646134878547519049493e-196),
        (-10.0, 7.619853024160526065973343e-24, 7.694598626706419346339034e-23),
        (-6.0, 9.865876450376981407008641e-10, 6.075882849823285486996308e-9),
        (-3.0, 0.001349898031630094526651815, 0.004431848411938007175602353),
        (-1.5, 0.06680720126885806600449404, 0.1295175956658917276140996),
        (-1.0, 0.1586552539314570514147675, 0.2419707245191433497978302),
        (-0.5, 0.3085375387259868963622954, 0.3520653267642994777746804),
        (0.25, 0.5987063256829237242408538, 0.3866681168028492069412258),
        (1.0, 0.8413447460685429485852325, 0.2419707245191433497978302),
        (2.0, 0.9772498680518207927997174, 0.0539909665131880519505642),
        (3.0, 0.9986501019683699054733482, 0.004431848411938007175602353),
        (5.0, 0.9999997133484281208060883, 0.00000148671951473429770790824),
        (8.0, 0.9999999999999993779039426, 5.052271083536892287950185e-15),
    ];

    #[test]
    fn cdf_and_pdf_match_high_precision_references() {
        for &(r, cdf, pdf) in &CDF_REF {
            let rel = (normal_cdf(r) - cdf).abs() / cdf;
            assert!(rel <= 1e-13, "H({r}): rel err {rel:e}");
            let rel = (normal_pdf(r) - pdf).abs() / pdf;
            assert!(rel <= 1e-13, "h({r}): rel err {rel:e}");
        }
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_pdf(0.0) - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-16);
    }

    #[test]
    fn pdf_is_derivative_of_cdf() {
        let step = 1e-5;
        for i in -60..=60 {
            let r = i as f64 * 0.1;
            let fd = (normal_cdf(r + step) - normal_cdf(r - step)) / (2.0 * step);
            assert!((fd - normal_pdf(r)).abs() < 1e-6, "r={r}");
        }
    }

    #[test]
    fn quantile_references() {
        let cases = [
            (1e-300, -37.04709629936119923722296),
            (1e-20, -9.262340089798407573717357),
            (1e-6, -4.753424308822898948193988),
            (0.01, -2.326347874040841100885606),
            (0.3, -0.5244005127080407840382893),
            (0.975, 1.959963984540054235524594),
        ];
        for (p, r) in cases {
            let got = normal_quantile(p).unwrap();
            assert!((got - r).abs() <= 1e-13 * r.abs().max(1.0), "p={p}: {got} vs {r}");
            assert!((normal_cdf(got) - p).abs() <= 1e-13);
        }
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(normal_quantile(bad).is_err());
        }
    }

    #[test]
    fn profile_endpoints_and_center() {
        let mid = profile(0.5).unwrap();
        assert!((mid.value - INV_SQRT_2PI).abs() <= 1e-15);
        assert_eq!(mid.derivative, Some(0.0));
        for p in [0.0, 1.0] {
            let e = profile(p).unwrap();
            assert_eq!(e.value, 0.0);
            assert!(e.derivative.is_none() && e.second_derivative.is_none());
        }
        let at = profile(0.8413447460685429485852325).unwrap();
        assert!((at.value - 0.2419707245191433497978302).abs() < 1e-12);
        assert!(profile(-1e-9).is_err());
        assert!(profile(1.0 + 1e-9).is_err());
    }

    #[test]
    fn c_alpha_values() {
        assert_eq!(c_alpha(0.0, 1.0, 2.0).unwrap(), 5.0);
        for t in [0.0, 0.3, 1.0, 7.0] {
            assert!((c_alpha(1.0, 1.0, t).unwrap() - 1.0).abs() < 1e-15);
            assert_eq!(c_alpha_derivative(1.0, 1.0, t).unwrap(), 0.0);
        }
        assert!((c_alpha(1e-9, 0.3, 1.7).unwrap() - 3.7).abs() <= 1e-6);
        assert_eq!(c_alpha(2.5, 0.7, 0.0).unwrap(), 0.7);
        assert!(c_alpha(1.0, -0.1, 1.0).is_err());
        assert!(c_alpha(1.0, 0.1, -1.0).is_err());
    }

    #[test]
    fn iota_values() {
        assert!((iota(1.0, 1.0).unwrap() - 3.1945280494653251136).abs() < 1e-14);
        assert!((iota(1e-8, 1.0).unwrap() - 1.0).abs() <= 1e-6);
        assert_eq!(iota(0.0, 2.5).unwrap(), 2.5);
        assert!(iota(1.0, -1.0).is_err());
    }

    #[test]
    fn small_curvature_branch_is_continuous() {
        for &(alpha, t) in &[(0.0, 0.5), (0.3, 1.7), (2.0, 4.0)] {
            let below = c_alpha(SMALL_CURVATURE * 0.999_999, alpha, t).unwrap();
            let above = c_alpha(SMALL_CURVATURE * 1.000_001, alpha, t).unwrap();
            assert!((below - above).abs() < 1e-12, "{below} {above}");
            let below = iota(-SMALL_CURVATURE * 0.999_999, t).unwrap();
            let above = iota(-SMALL_CURVATURE * 1.000_001, t).unwrap();
            assert!((below - above).abs() < 1e-12);
        }
    }
}
