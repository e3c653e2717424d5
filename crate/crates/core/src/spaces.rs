//! Model spaces.
//!
//! Every builder returns a fully validated [`MarkovTriple`] tagged with its
//! model name and parameters, so that saved files record their provenance.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::triple::{Edge, MarkovTriple, SpaceMeta, TripleOptions};

/// Largest hypercube dimension accepted (2¹⁴ states).
pub const MAX_HYPERCUBE_DIM: usize = 14;

/// Declarative description of a space, as found in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    TwoPoint {
        rho: f64,
    },
    OuChain {
        n: usize,
        #[serde(rename = "R", alias = "half_width")]
        half_width: f64,
    },
    Cycle {
        n: usize,
    },
    Complete {
        n: usize,
    },
    Hypercube {
        #[serde(rename = "d", alias = "dim")]
        dim: usize,
        #[serde(default = "unit_rate")]
        rho: f64,
    },
    File {
        path: PathBuf,
        #[serde(default)]
        normalize: bool,
    },
}

fn unit_rate() -> f64 {
    1.0
}

impl SpaceSpec {
    pub fn model_name(&self) -> &'static str {
        match self {
            SpaceSpec::TwoPoint { .. } => "two_point",
            SpaceSpec::OuChain { .. } => "ou_chain",
            SpaceSpec::Cycle { .. } => "cycle",
            SpaceSpec::Complete { .. } => "complete",
            SpaceSpec::Hypercube { .. } => "hypercube",
            SpaceSpec::File { .. } => "file",
        }
    }

    pub fn build(&self) -> Result<MarkovTriple> {
        match self {
            SpaceSpec::TwoPoint { rho } => two_point(*rho),
            SpaceSpec::OuChain { n, half_width } => ou_chain(*n, *half_width),
            SpaceSpec::Cycle { n } => cycle(*n),
            SpaceSpec::Complete { n } => complete(*n),
            SpaceSpec::Hypercube { dim, rho } => hypercube(*dim, *rho),
            SpaceSpec::File { path, normalize } => {
                crate::io::load_triple(path, TripleOptions { normalize_measure: *normalize })
            }
        }
    }
}

fn meta(model: &str, params: &[(&str, f64)]) -> SpaceMeta {
    SpaceMeta {
        model: model.to_string(),
        parameters: params.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>(),
    }
}

fn positive_rate(rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::Space(format!("rate rho must be positive, got {rho}")));
    }
    Ok(())
}

/// Two states, uniform measure, jump rate `rho` both ways, unit distance.
pub fn two_point(rho: f64) -> Result<MarkovTriple> {
    positive_rate(rho)?;
    Ok(MarkovTriple::from_edges(vec![0.5, 0.5], &[Edge::symmetric(0, 1, rho)], TripleOptions::default())?
        .with_meta(meta("two_point", &[("rho", rho)])))
}

/// Grid points `x_i = −R + i·h`, `h = 2R/(n−1)`, of the Ornstein-Uhlenbeck chain.
pub fn ou_grid(n: usize, half_width: f64) -> Vec<f64> {
    let h = 2.0 * half_width / (n - 1) as f64;
    (0..n).map(|i| -half_width + i as f64 * h).collect()
}

/// Birth-death discretization of the Ornstein-Uhlenbeck diffusion on `[−R, R]`.
///
/// `m(i) ∝ exp(−x_i²/2)` and nearest-neighbor rates
/// `L(i,j) = h⁻² √(m(j)/m(i))`, so that `m(i)L(i,j) = h⁻² √(m(i)m(j))` is
/// symmetric at every grid size. Edge lengths are `h`.
pub fn ou_chain(n: usize, half_width: f64) -> Result<MarkovTriple> {
    if n < 3 {
        return Err(Error::Space(format!("ou_chain needs n >= 3, got {n}")));
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::Space(format!("ou_chain needs R > 0, got {half_width}")));
    }
    let x = ou_grid(n, half_width);
    let h = 2.0 * half_width / (n - 1) as f64;
    let weights: Vec<f64> = x.iter().map(|&xi| (-0.5 * xi * xi).exp()).collect();
    let total: f64 = weights.iter().sum();
    let measure: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let inv_h2 = 1.0 / (h * h);
    let edges: Vec<Edge> = (0..n - 1)
        .map(|i| {
            let (a, b) = (x[i], x[i + 1]);
            // √(m(i+1)/m(i)) = exp((a² − b²)/4)
            let ratio = (0.25 * (a * a - b * b)).exp();
            Edge { i, j: i + 1, rate_ij: inv_h2 * ratio, rate_ji: inv_h2 / ratio, length: Some(h) }
        })
        .collect();
    Ok(MarkovTriple::from_edges(measure, &edges, TripleOptions::default())?
        .with_meta(meta("ou_chain", &[("n", n as f64), ("R", half_width)])))
}

/// Cycle on `n ≥ 3` states with unit rates and uniform measure.
pub fn cycle(n: usize) -> Result<MarkovTriple> {
    if n < 3 {
        return Err(Error::Space(format!("cycle needs n >= 3, got {n}")));
    }
    let edges: Vec<Edge> = (0..n).map(|i| Edge::symmetric(i.min((i + 1) % n), i.max((i + 1) % n), 1.0)).collect();
    Ok(MarkovTriple::from_edges(uniform(n), &edges, TripleOptions::default())?
        .with_meta(meta("cycle", &[("n", n as f64)])))
}

/// Complete graph on `n ≥ 2` states with unit rates and uniform measure.
pub fn complete(n: usize) -> Result<MarkovTriple> {
    if n < 2 {
        return Err(Error::Space(format!("complete graph needs n >= 2, got {n}")));
    }
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            edges.push(Edge::symmetric(i, j, 1.0));
        }
    }
    Ok(MarkovTriple::from_edges(uniform(n), &edges, TripleOptions::default())?
        .with_meta(meta("complete", &[("n", n as f64)])))
}

/// `{0,1}^d` with each coordinate flipping at rate `rho`: the `d`-fold product of the two-point space.
pub fn hypercube(dim: usize, rho: f64) -> Result<MarkovTriple> {
    if dim == 0 || dim > MAX_HYPERCUBE_DIM {
        return Err(Error::Space(format!("hypercube needs 1 <= d <= {MAX_HYPERCUBE_DIM}, got {dim}")));
    }
    positive_rate(rho)?;
    let n = 1usize << dim;
    let mut edges = Vec::with_capacity(n * dim / 2);
    for s in 0..n {
        for k in 0..dim {
            let t = s ^ (1 << k);
            if t > s {
                edges.push(Edge::symmetric(s, t, rho));
            }
        }
    }
    let labels = (0..n).map(|s| format!("{s:0dim$b}")).collect();
    MarkovTriple::from_edges(uniform(n), &edges, TripleOptions::default())?
        .with_meta(meta("hypercube", &[("d", dim as f64), ("rho", rho)]))
        .with_labels(labels)
}

fn uniform(n: usize) -> Vec<f64> {
    renormalize(vec![1.0 / n as f64; n])
}

/// Pushes the last entry so that the (left-to-right) sum is as close to 1 as possible.
fn renormalize(mut measure: Vec<f64>) -> Vec<f64> {
    let n = measure.len();
    let head: f64 = measure[..n - 1].iter().sum();
    measure[n - 1] = 1.0 - head;
    measure
}

/// A real coordinate per state: the grid for OU chains, `0, 1, …` otherwise.
pub fn coordinates(triple: &MarkovTriple) -> Vec<f64> {
    if let Some(meta) = triple.meta() {
        if meta.model == "ou_chain" {
            if let (Some(&n), Some(&r)) = (meta.parameters.get("n"), meta.parameters.get("R")) {
                if n as usize == triple.n() {
                    return ou_grid(triple.n(), r);
                }
            }
        }
    }
    (0..triple.n()).map(|i| i as f64).collect()
}

/// Whether the triple is a one-dimensional diffusion discretization (OU chain).
pub fn is_diffusion_chain(triple: &MarkovTriple) -> bool {
    triple.meta().is_some_and(|m| m.model == "ou_chain")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_layout() {
        let t = two_point(1.0).unwrap();
        assert_eq!(t.measure(), &[0.5, 0.5]);
        assert_eq!(t.rate(0, 1), 1.0);
        assert_eq!(t.rate(0, 0), -1.0);
        assert_eq!(t.neighbors(0)[0].length, 1.0);
        assert!(two_point(0.0).is_err());
        assert!(two_point(-1.0).is_err());
    }

    #[test]
    fn ou_chain_is_exactly_balanced() {
        let t = ou_chain(200, 6.0).unwrap();
        let m = t.measure();
        for e in t.edges() {
            let lhs = m[e.i] * e.rate_ij;
            let rhs = m[e.j] * e.rate_ji;
            assert!((lhs - rhs).abs() <= 1e-15 * lhs.abs().max(1.0), "{lhs} {rhs}");
        }
        assert!(m[0] < 1e-8 && m[199] < 1e-8);
        assert!((m.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
        assert!(ou_chain(2, 6.0).is_err());
        assert!(ou_chain(10, 0.0).is_err());
    }

    #[test]
    fn hypercube_of_dim_one_is_two_point() {
        let h = hypercube(1, 1.0).unwrap();
        let t = two_point(1.0).unwrap();
        assert_eq!(h.measure(), t.measure());
        assert_eq!(h.edges(), t.edges());
        assert!(hypercube(0, 1.0).is_err());
        assert!(hypercube(15, 1.0).is_err());
        let h3 = hypercube(3, 1.0).unwrap();
        assert_eq!(h3.n(), 8);
        assert_eq!(h3.edge_count(), 12);
        assert_eq!(h3.labels().unwrap()[5], "101");
    }

    #[test]
    fn cycle_and_complete() {
        let c = cycle(5).unwrap();
        assert_eq!(c.edge_count(), 5);
        assert!(c.neighbors(0).iter().map(|nb| nb.state).eq([1, 4]));
        assert!(cycle(2).is_err());
        let k = complete(4).unwrap();
        assert_eq!(k.edge_count(), 6);
        assert_eq!(k.rate(2, 2), -3.0);
        assert!(complete(1).is_err());
    }

    #[test]
    fn spec_deserializes() {
        let spec: SpaceSpec = toml::from_str("model = \"ou_chain\"\nn = 50\nR = 4.0\n").unwrap();
        assert_eq!(spec, SpaceSpec::OuChain { n: 50, half_width: 4.0 });
        let t = spec.build().unwrap();
        assert!(is_diffusion_chain(&t));
        assert_eq!(coordinates(&t)[0], -4.0);
        let spec: SpaceSpec = toml::from_str("model = \"hypercube\"\nd = 2\n").unwrap();
        assert_eq!(spec, SpaceSpec::Hypercube { dim: 2, rho: 1.0 });
    }
}
