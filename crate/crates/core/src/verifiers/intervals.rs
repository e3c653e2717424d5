//! Finite unions of closed intervals on the extended line, with their
//! Gaussian measure and Gaussian perimeter.

use crate::error::{domain, Result};
use crate::gauss::{normal_cdf, normal_pdf};

/// Sorted, pairwise disjoint, nondegenerate closed intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    /// Normalizes `intervals`: sorts them, merges overlapping or touching ones
    /// and drops single points, which carry no mass and no perimeter.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &intervals {
            if a.is_nan() || b.is_nan() || a > b || a == f64::INFINITY || b == f64::NEG_INFINITY {
                return domain(format!("malformed interval [{a}, {b}]"));
            }
        }
        intervals.retain(|(a, b)| a < b);
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(Self { intervals: merged })
    }

    /// `(−∞, r]`.
    pub fn half_line(r: f64) -> Result<Self> {
        Self::new(vec![(f64::NEG_INFINITY, r)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }
}

impl std::str::FromStr for IntervalUnion {
    type Err = crate::Error;

    /// Parses `"[a,b]"` or `"[a,b] u [c,d]"`; `inf`/`-inf` are accepted as endpoints.
    fn from_str(s: &str) -> Result<Self> {
        let mut out = Vec::new();
        for part in s.split(['u', 'U', ';']).map(str::trim).filter(|p| !p.is_empty()) {
            let inner = part
                .strip_prefix('[')
                .and_then(|p| p.strip_suffix(']'))
                .ok_or_else(|| crate::Error::Domain(format!("interval {part:?} must look like [a,b]")))?;
            let (a, b) = inner
                .split_once(',')
                .ok_or_else(|| crate::Error::Domain(format!("interval {part:?} needs two endpoints")))?;
            let parse = |v: &str| {
                v.trim().parse::<f64>().map_err(|e| crate::Error::Domain(format!("endpoint {v:?}: {e}")))
            };
            out.push((parse(a)?, parse(b)?));
        }
        Self::new(out)
    }
}

/// Gaussian mass `Σ[H(b) − H(a)]` and perimeter `Σ h(e)` over finite endpoints.
pub fn gaussian_interval_oracle(set: &IntervalUnion) -> (f64, f64) {
    let mut mass = 0.0;
    let mut per = 0.0;
    for &(a, b) in set.intervals() {
        // Use the tail that keeps precision.
        mass += if a >= 0.0 { normal_cdf(-a) - normal_cdf(-b) } else { normal_cdf(b) - normal_cdf(a) };
        for e in [a, b] {
            if e.is_finite() {
                per += normal_pdf(e);
            }
        }
    }
    (mass, per)
}
