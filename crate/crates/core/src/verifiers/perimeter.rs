//! Discrete total variation and perimeter.
//!
//! `TV(f) = Σ_{x<y} ω(x,y) |f(y) − f(x)|` with `ω(x,y) = √(m(x)L(x,y) m(y)L(y,x)) d(x,y)`
//! and `P(E) = TV(χ_E)`. On the diffusion chain the perimeter of a half-line
//! converges to the Gaussian density at its endpoint.

use crate::error::{domain, Result};
use crate::field::ScalarField;
use crate::gauss::isoperimetric_profile;
use crate::semigroup::check_curvature;
use crate::spaces::is_diffusion_chain;
use crate::triple::MarkovTriple;

use super::{params, tolerance, MarginRow, VerifierReport};

/// `ω(x,y)` for a neighbor pair; `d` is the path metric.
pub fn edge_weight(triple: &MarkovTriple, x: usize, y: usize) -> f64 {
    let m = triple.measure();
    triple
        .neighbors(x)
        .iter()
        .find(|nb| nb.state == y)
        .map_or(0.0, |nb| (m[x] * nb.rate * m[y] * triple.rate(y, x)).sqrt() * nb.distance)
}

pub fn total_variation(triple: &MarkovTriple, f: &ScalarField) -> Result<f64> {
    triple.check(f)?;
    let m = triple.measure();
    let mut tv = 0.0;
    for x in 0..triple.n() {
        for nb in triple.neighbors(x).iter().filter(|nb| nb.state > x) {
            let y = nb.state;
            let w = (m[x] * nb.rate * m[y] * triple.rate(y, x)).sqrt() * nb.distance;
            tv += w * (f[y] - f[x]).abs();
        }
    }
    Ok(tv)
}

pub fn perimeter(triple: &MarkovTriple, set: &[usize]) -> Result<f64> {
    total_variation(triple, &ScalarField::indicator(triple.n(), set)?)
}

/// `√K 𝓘(m(E)) ≤ P(E)`, asserted on diffusion chains with a relative tolerance.
pub fn isoperimetric_margin(triple: &MarkovTriple, set: &[usize], k: f64) -> Result<VerifierReport> {
    check_curvature(k)?;
    if !(k > 0.0) {
        return domain(format!("isoperimetry needs K > 0, got {k}"));
    }
    let chi = ScalarField::indicator(triple.n(), set)?;
    let mass = triple.integrate(&chi)?.clamp(0.0, 1.0);
    let lhs = k.sqrt() * isoperimetric_profile(mass)?;
    let rhs = perimeter(triple, set)?;
    VerifierReport::new(
        "isoperimetry",
        params(&[("K", &[k]), ("mass", &[mass])]),
        vec![MarginRow { state: None, time: None, lhs, rhs }],
        tolerance::ISOPERIMETRY_RELATIVE * lhs.abs().max(rhs.abs()),
        is_diffusion_chain(triple),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces;

    #[test]
    fn two_point_perimeter() {
        let t = spaces::two_point(1.0).unwrap();
        assert_eq!(perimeter(&t, &[0]).unwrap(), 0.5);
        assert_eq!(perimeter(&t, &[]).unwrap(), 0.0);
        assert_eq!(perimeter(&t, &[0, 1]).unwrap(), 0.0);
        let r = isoperimetric_margin(&t, &[0], 2.0).unwrap();
        assert!(!r.asserted);
        assert!((r.worst_margin - (2f64.sqrt() / (2.0 * std::f64::consts::PI).sqrt() - 0.5)).abs() < 1e-15);
        assert!(isoperimetric_margin(&t, &[0], 0.0).is_err());
    }

    #[test]
    fn empty_set_has_zero_margin() {
        let t = spaces::cycle(5).unwrap();
        let r = isoperimetric_margin(&t, &[], 1.0).unwrap();
        assert_eq!(r.worst_margin, 0.0);
    }
}
