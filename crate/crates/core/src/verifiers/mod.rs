//! Inequality checks with self-describing reports.
//!
//! Every check produces rows `(state, time, lhs, rhs)` with signed margin
//! `lhs − rhs`, so a positive margin is a violation. A report passes when its
//! worst margin is at most its tolerance. Reports flagged `asserted = false`
//! are evidence only: the inequality is not a theorem on that space.

mod bobkov;
mod intervals;
mod perimeter;
mod psi;

use std::collections::BTreeMap;

pub use bobkov::{bobkov_global, bobkov_local, bv_corollary_margin, two_point_bobkov_margin};
pub use intervals::{gaussian_interval_oracle, IntervalUnion};
pub use perimeter::{edge_weight, isoperimetric_margin, perimeter, total_variation};
pub use psi::{
    discriminant_margin, phi_trace, psi, psi_value, zeta_field, PhiTrace, PsiPartials, ZetaField,
};

use crate::error::{domain, Result};
use crate::field::ScalarField;

/// Default truncation applied before any profile derivative is evaluated.
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Assertion policy defaults.
pub mod tolerance {
    /// Inequalities that are theorems on every finite chain with the computed curvature.
    pub const EXACT: f64 = 1e-9;
    /// Exact two-point Bobkov and the local inequality at `t = 0`.
    pub const TIGHT: f64 = 1e-12;
    /// Local Bobkov on the diffusion chain with 200 states.
    pub const LOCAL_BOBKOV: f64 = 5e-3;
    /// Global Bobkov on the diffusion chain.
    pub const GLOBAL_BOBKOV_CHAIN: f64 = 1e-3;
    /// Relative slack of the isoperimetric inequality on chain half-lines.
    pub const ISOPERIMETRY_RELATIVE: f64 = 2e-2;
    /// `ζ ≥ −ZETA` on the diffusion chain.
    pub const ZETA: f64 = 5e-3;
    /// Slack of the derivative bound along the `Φ` trace.
    pub const PHI_DERIVATIVE: f64 = 1e-4;
    /// Algebraic identities (endpoint identity, two-formula agreement).
    pub const IDENTITY: f64 = 1e-10;
    /// Self-improvement on the diffusion chain, relative to `‖Γ(f)‖∞²`.
    pub const SELF_IMPROVEMENT_RELATIVE: f64 = 2e-2;
}

/// One evaluated point of an inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginRow {
    pub state: Option<usize>,
    pub time: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

impl MarginRow {
    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub min_margin: f64,
    pub mean_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifierReport {
    pub name: String,
    /// Every parameter that determines the rows; scalars are one-element lists.
    pub parameters: BTreeMap<String, Vec<f64>>,
    pub rows: Vec<MarginRow>,
    pub worst_margin: f64,
    pub worst: MarginRow,
    pub summary: Summary,
    pub tolerance: f64,
    /// Whether failing this report is a failure of the run.
    pub asserted: bool,
    pub pass: bool,
}

impl VerifierReport {
    /// Builds a report; `rows` must be nonempty and is kept in the given order.
    pub fn new(
        name: &str,
        parameters: BTreeMap<String, Vec<f64>>,
        rows: Vec<MarginRow>,
        tolerance: f64,
        asserted: bool,
    ) -> Result<Self> {
        let Some(&first) = rows.first() else {
            return domain(format!("{name}: no rows to report"));
        };
        let mut worst = first;
        let mut min_margin = f64::INFINITY;
        let mut total = 0.0;
        for r in &rows {
            let m = r.margin();
            if m > worst.margin() {
                worst = *r;
            }
            min_margin = min_margin.min(m);
            total += m;
        }
        let worst_margin = worst.margin();
        let summary = Summary { count: rows.len(), min_margin, mean_margin: total / rows.len() as f64 };
        Ok(Self {
            name: name.to_string(),
            parameters,
            rows,
            worst_margin,
            worst,
            summary,
            tolerance,
            asserted,
            pass: worst_margin <= tolerance,
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.pass = self.worst_margin <= tolerance;
        self
    }

    pub fn with_asserted(mut self, asserted: bool) -> Self {
        self.asserted = asserted;
        self
    }

    /// `true` unless the report is asserted and fails.
    pub fn ok(&self) -> bool {
        self.pass || !self.asserted
    }
}

pub(crate) fn params(entries: &[(&str, &[f64])]) -> BTreeMap<String, Vec<f64>> {
    entries.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect()
}

pub(crate) fn check_unit_range(f: &ScalarField, what: &str) -> Result<()> {
    if let Some((x, v)) = f.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return domain(format!("{what}: value {v} at state {x} outside [0, 1]"));
    }
    Ok(())
}

/// `f_ε = max(min(f, 1 − ε), ε)`.
pub fn truncate(f: &ScalarField, epsilon: f64) -> Result<ScalarField> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return domain(format!("truncation needs 0 < ε < 1/2, got {epsilon}"));
    }
    check_unit_range(f, "truncate")?;
    Ok(f.map(|v| v.clamp(epsilon, 1.0 - epsilon)))
}

/// `count` times from `t_min` to `t_max`, equally spaced in `log t`.
pub fn geometric_grid(t_min: f64, t_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max >= t_min && t_max.is_finite()) || count == 0 {
        return domain(format!("bad geometric grid [{t_min}, {t_max}] x {count}"));
    }
    if count == 1 {
        return Ok(vec![t_min]);
    }
    let ratio = (t_max / t_min).ln() / (count - 1) as f64;
    Ok((0..count).map(|i| if i + 1 == count { t_max } else { t_min * (ratio * i as f64).exp() }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_picks_first_worst_row() {
        let rows = vec![
            MarginRow { state: Some(0), time: Some(0.1), lhs: 1.0, rhs: 2.0 },
            MarginRow { state: Some(1), time: Some(0.1), lhs: 1.0, rhs: 1.5 },
            MarginRow { state: Some(2), time: Some(0.1), lhs: 1.0, rhs: 1.5 },
        ];
        let r = VerifierReport::new("x", params(&[("alpha", &[1.0])]), rows, 0.0, true).unwrap();
        assert_eq!(r.worst.state, Some(1));
        assert_eq!(r.worst_margin, -0.5);
        assert!(r.pass && r.ok());
        let r = r.with_tolerance(-0.6);
        assert!(!r.pass && !r.ok());
        assert!(r.with_asserted(false).ok());
        assert!(VerifierReport::new("x", BTreeMap::new(), vec![], 0.0, true).is_err());
    }

    #[test]
    fn truncation() {
        let f = ScalarField::new(vec![0.0, 1.0, 0.5]).unwrap();
        assert_eq!(truncate(&f, 0.1).unwrap().values(), &[0.1, 0.9, 0.5]);
        assert!(truncate(&f, 0.5).is_err());
        assert!(truncate(&f, 0.0).is_err());
        assert!(truncate(&ScalarField::new(vec![1.5]).unwrap(), 0.1).is_err());
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric_grid(0.01, 1.0, 3).unwrap();
        assert_eq!(g[0], 0.01);
        assert!((g[1] - 0.1).abs() < 1e-15);
        assert_eq!(g[2], 1.0);
        assert!(geometric_grid(0.0, 1.0, 3).is_err());
    }
}
