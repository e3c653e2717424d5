use crate::error::{domain, Result};
use crate::field::ScalarField;
use crate::gauss::{c_alpha, isoperimetric_profile};
use crate::semigroup::{check_curvature, SpectralCache};
use crate::spaces::is_diffusion_chain;
use crate::triple::MarkovTriple;

use super::perimeter::total_variation;
use super::{check_unit_range, params, tolerance, truncate, MarginRow, VerifierReport};

fn profile_field(f: &ScalarField) -> Result<ScalarField> {
    // Heat flow can leave [0, 1] by one ulp.
    ScalarField::new(f.iter().map(|&v| isoperimetric_profile(v.clamp(0.0, 1.0))).collect::<Result<_>>()?)
}

fn sqrt_combination(i: &ScalarField, c: f64, gamma: &ScalarField) -> ScalarField {
    i.zip_map(gamma, |a, g| (a * a + c * g).sqrt())
}

/// Local inequality `√(𝓘²(H_t f) + αΓ(H_t f)) ≤ H_t(√(𝓘²(f) + c_α(t)Γ(f)))` on a time grid,
/// after truncating `f` to `[ε, 1 − ε]`.
///
/// Asserted on diffusion chains with the default chain tolerance, reported elsewhere.
pub fn bobkov_local(
    cache: &SpectralCache<'_>,
    f: &ScalarField,
    alpha: f64,
    k: f64,
    time_grid: &[f64],
    epsilon: f64,
) -> Result<VerifierReport> {
    check_curvature(k)?;
    if time_grid.is_empty() {
        return domain("local Bobkov needs a nonempty time grid");
    }
    let triple = cache.triple();
    triple.check(f)?;
    check_unit_range(f, "local Bobkov")?;
    let fe = truncate(f, epsilon)?;
    let i_f = profile_field(&fe)?;
    let gamma_f = triple.carre_du_champ(&fe)?;

    let mut rows = Vec::with_capacity(time_grid.len() * triple.n());
    for &t in time_grid {
        let c = c_alpha(k, alpha, t)?;
        let ht = cache.heat(&fe, t)?;
        let lhs = sqrt_combination(&profile_field(&ht)?, alpha, &triple.carre_du_champ(&ht)?);
        let rhs = cache.heat(&sqrt_combination(&i_f, c, &gamma_f), t)?;
        rows.extend((0..triple.n()).map(|x| MarginRow { state: Some(x), time: Some(t), lhs: lhs[x], rhs: rhs[x] }));
    }
    VerifierReport::new(
        "bobkov-local",
        params(&[("alpha", &[alpha]), ("K", &[k]), ("epsilon", &[epsilon]), ("t", time_grid)]),
        rows,
        tolerance::LOCAL_BOBKOV,
        is_diffusion_chain(triple),
    )
}

fn check_positive_curvature(k: f64) -> Result<()> {
    check_curvature(k)?;
    if !(k > 0.0) {
        return domain(format!("needs K > 0, got {k}"));
    }
    Ok(())
}

fn is_two_point(triple: &MarkovTriple) -> bool {
    triple.meta().is_some_and(|m| m.model == "two_point")
}

/// `√K 𝓘(∫f dm) ≤ ∫ √(K𝓘²(f) + Γ(f)) dm`.
///
/// Asserted at `1e−12` on the two-point space and at the chain tolerance on
/// diffusion chains; reported elsewhere.
pub fn bobkov_global(triple: &MarkovTriple, f: &ScalarField, k: f64) -> Result<VerifierReport> {
    check_positive_curvature(k)?;
    triple.check(f)?;
    check_unit_range(f, "global Bobkov")?;
    let lhs = k.sqrt() * isoperimetric_profile(triple.integrate(f)?.clamp(0.0, 1.0))?;
    let rhs = triple.integrate(&sqrt_combination(&profile_field(f)?, 1.0 / k, &triple.carre_du_champ(f)?))? * k.sqrt();
    let (tol, asserted) = if is_two_point(triple) {
        (tolerance::TIGHT, true)
    } else if is_diffusion_chain(triple) {
        (tolerance::GLOBAL_BOBKOV_CHAIN, true)
    } else {
        (tolerance::TIGHT, false)
    };
    VerifierReport::new(
        "bobkov-global",
        params(&[("K", &[k])]),
        vec![MarginRow { state: None, time: None, lhs, rhs }],
        tol,
        asserted,
    )
}

/// Two-point form `𝓘((a+b)/2) − ½√(𝓘²(a) + (a−b)²/4) − ½√(𝓘²(b) + (a−b)²/4)`.
pub fn two_point_bobkov_margin(a: f64, b: f64) -> Result<f64> {
    if !((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)) {
        return domain(format!("two-point Bobkov needs a, b in [0, 1], got ({a}, {b})"));
    }
    let d2 = 0.25 * (a - b) * (a - b);
    let ia = isoperimetric_profile(a)?;
    let ib = isoperimetric_profile(b)?;
    Ok(isoperimetric_profile(0.5 * (a + b))? - 0.5 * (ia * ia + d2).sqrt() - 0.5 * (ib * ib + d2).sqrt())
}

/// `√K 𝓘(∫f dm) − √K ∫𝓘(f) dm − TV(f)`.
pub fn bv_corollary_margin(triple: &MarkovTriple, f: &ScalarField, k: f64) -> Result<f64> {
    check_positive_curvature(k)?;
    triple.check(f)?;
    check_unit_range(f, "BV corollary")?;
    let lhs = k.sqrt() * isoperimetric_profile(triple.integrate(f)?.clamp(0.0, 1.0))?;
    let rhs = k.sqrt() * triple.integrate(&profile_field(f)?)? + total_variation(triple, f)?;
    Ok(lhs - rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces;

    #[test]
    fn two_point_closed_form_values() {
        assert_eq!(two_point_bobkov_margin(0.3, 0.3).unwrap(), 0.0);
        let m = two_point_bobkov_margin(0.0, 1.0).unwrap();
        assert!((m - (1.0 / (2.0 * std::f64::consts::PI).sqrt() - 0.5)).abs() < 1e-15);
        assert!(two_point_bobkov_margin(-0.1, 0.5).is_err());
    }

    #[test]
    fn global_matches_two_point_form() {
        let t = spaces::two_point(1.0).unwrap();
        for (a, b) in [(0.0, 1.0), (0.2, 0.7), (0.9, 0.05)] {
            let f = ScalarField::new(vec![a, b]).unwrap();
            let r = bobkov_global(&t, &f, 2.0).unwrap();
            let m = two_point_bobkov_margin(a, b).unwrap();
            assert!((r.worst_margin - 2f64.sqrt() * m).abs() < 1e-12);
            assert!(r.pass && r.asserted);
        }
        let f = ScalarField::new(vec![0.0, 1.0]).unwrap();
        assert!(bobkov_global(&t, &f, 0.0).is_err());
        assert!(bobkov_global(&t, &f, f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn local_at_time_zero_is_tight() {
        let t = spaces::cycle(5).unwrap();
        let cache = SpectralCache::build(&t).unwrap();
        let f = ScalarField::new(vec![0.0, 0.2, 0.9, 1.0, 0.5]).unwrap();
        let r = bobkov_local(&cache, &f, 0.7, 0.5, &[0.0], 1e-4).unwrap();
        assert!(r.worst_margin.abs() <= 1e-12);
        assert!(!r.asserted);
        let c = ScalarField::constant(5, 0.4);
        let r = bobkov_local(&cache, &c, 0.7, 0.5, &[0.1, 1.0], 1e-4).unwrap();
        assert!(r.worst_margin.abs() <= 1e-15);
    }

    #[test]
    fn bv_corollary_on_constants() {
        let t = spaces::cycle(5).unwrap();
        let c = ScalarField::constant(5, 0.4);
        assert!(bv_corollary_margin(&t, &c, 1.0).unwrap().abs() < 1e-15);
    }
}
