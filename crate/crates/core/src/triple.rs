//! Finite reversible Markov triples.
//!
//! A triple is a finite state space with a fully supported probability
//! measure `m`, a conservative generator `L` that is self-adjoint in
//! `L²(m)` (detailed balance), and edge lengths inducing a path metric.
//! The generator doubles as the Laplacian: the heat flow is `exp(tL)` and
//! the spectrum of `L` is nonpositive.
//!
//! Construction validates every invariant and fails loudly; nothing is
//! repaired except the measure normalization, and only when explicitly
//! requested through [`TripleOptions::normalize_measure`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use nalgebra::DMatrix;

use crate::error::{Error, Invariant, Result};
use crate::field::ScalarField;

/// Tolerance shared by all triple invariants.
pub const TRIPLE_TOL: f64 = 1e-12;

/// An outgoing transition from a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub state: usize,
    pub rate: f64,
    /// Length of the edge as given (default 1).
    pub length: f64,
    /// Path-metric distance to the neighbor; at most `length`.
    pub distance: f64,
}

/// An undirected edge with its two directed rates, as stored in files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub rate_ij: f64,
    pub rate_ji: f64,
    pub length: Option<f64>,
}

impl Edge {
    pub fn symmetric(i: usize, j: usize, rate: f64) -> Self {
        Self { i, j, rate_ij: rate, rate_ji: rate, length: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TripleOptions {
    /// Rescale the measure to unit mass instead of rejecting it.
    pub normalize_measure: bool,
}

/// Provenance of a triple: model name and its numeric parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpaceMeta {
    pub model: String,
    pub parameters: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct MarkovTriple {
    measure: Vec<f64>,
    neighbors: Vec<Vec<Neighbor>>,
    diagonal: Vec<f64>,
    labels: Option<Vec<String>>,
    meta: Option<SpaceMeta>,
}

fn invalid<T>(invariant: Invariant, context: impl Into<String>) -> Result<T> {
    Err(Error::InvalidTriple { invariant, context: context.into() })
}

impl MarkovTriple {
    /// Builds a triple from a measure and a list of undirected edges.
    ///
    /// Edges whose two rates are both zero are ignored. The diagonal of the
    /// generator is set to minus the off-diagonal row sum.
    pub fn from_edges(measure: Vec<f64>, edges: &[Edge], options: TripleOptions) -> Result<Self> {
        let measure = validate_measure(measure, options)?;
        let n = measure.len();
        let mut neighbors: Vec<Vec<Neighbor>> = vec![Vec::new(); n];

        for (k, e) in edges.iter().enumerate() {
            let ctx = |what: &str| format!("edge {k} ({}, {}): {what}", e.i, e.j);
            if e.i >= n || e.j >= n {
                return Err(Error::InvalidState { index: e.i.max(e.j), n });
            }
            if e.i == e.j {
                return invalid(Invariant::GeneratorPositivity, ctx("self-loop"));
            }
            if !e.rate_ij.is_finite() || !e.rate_ji.is_finite() {
                return invalid(Invariant::Finiteness, ctx("non-finite rate"));
            }
            if e.rate_ij < 0.0 {
                return invalid(Invariant::GeneratorPositivity, ctx(&format!("rate_ij = {}", e.rate_ij)));
            }
            if e.rate_ji < 0.0 {
                return invalid(Invariant::GeneratorPositivity, ctx(&format!("rate_ji = {}", e.rate_ji)));
            }
            let length = e.length.unwrap_or(1.0);
            if !(length.is_finite() && length > 0.0) {
                return invalid(Invariant::EdgeLength, ctx(&format!("length = {length}")));
            }
            let flux_ij = measure[e.i] * e.rate_ij;
            let flux_ji = measure[e.j] * e.rate_ji;
            if (flux_ij - flux_ji).abs() > TRIPLE_TOL * flux_ij.abs().max(1.0) {
                return invalid(
                    Invariant::DetailedBalance,
                    ctx(&format!("m(i)L(i,j) = {flux_ij:e} but m(j)L(j,i) = {flux_ji:e}")),
                );
            }
            if e.rate_ij == 0.0 && e.rate_ji == 0.0 {
                continue;
            }
            if neighbors[e.i].iter().any(|nb| nb.state == e.j) {
                return invalid(Invariant::GeneratorPositivity, ctx("duplicate edge"));
            }
            neighbors[e.i].push(Neighbor { state: e.j, rate: e.rate_ij, length, distance: length });
            neighbors[e.j].push(Neighbor { state: e.i, rate: e.rate_ji, length, distance: length });
        }

        Self::assemble(measure, neighbors)
    }

    /// Builds a triple from a dense generator matrix; edge lengths default to 1.
    pub fn from_generator(measure: Vec<f64>, generator: &DMatrix<f64>, options: TripleOptions) -> Result<Self> {
        let measure = validate_measure(measure, options)?;
        let n = measure.len();
        if generator.nrows() != n || generator.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: generator.nrows().max(generator.ncols()) });
        }
        let mut neighbors: Vec<Vec<Neighbor>> = vec![Vec::new(); n];
        for x in 0..n {
            let mut row_sum = 0.0;
            let mut row_scale: f64 = 0.0;
            for y in 0..n {
                let l = generator[(x, y)];
                if !l.is_finite() {
                    return invalid(Invariant::Finiteness, format!("row {x}, column {y}: L = {l}"));
                }
                row_sum += l;
                row_scale = row_scale.max(l.abs());
                if x == y {
                    continue;
                }
                if l < 0.0 {
                    return invalid(Invariant::GeneratorPositivity, format!("row {x}, column {y}: L = {l}"));
                }
                let flux_xy = measure[x] * l;
                let flux_yx = measure[y] * generator[(y, x)];
                if (flux_xy - flux_yx).abs() > TRIPLE_TOL * flux_xy.abs().max(1.0) {
                    return invalid(
                        Invariant::DetailedBalance,
                        format!("row {x}, column {y}: m(x)L(x,y) = {flux_xy:e} but m(y)L(y,x) = {flux_yx:e}"),
                    );
                }
                if l > 0.0 {
                    neighbors[x].push(Neighbor { state: y, rate: l, length: 1.0, distance: 1.0 });
                }
            }
            if row_sum.abs() > TRIPLE_TOL * row_scale.max(1.0) {
                return invalid(Invariant::RowSum, format!("row {x}: sum = {row_sum:e}"));
            }
        }
        Self::assemble(measure, neighbors)
    }

    fn assemble(measure: Vec<f64>, mut neighbors: Vec<Vec<Neighbor>>) -> Result<Self> {
        for row in &mut neighbors {
            row.sort_by_key(|nb| nb.state);
        }
        let diagonal = neighbors.iter().map(|row| -row.iter().map(|nb| nb.rate).sum::<f64>()).collect();
        let mut triple = Self { measure, neighbors, diagonal, labels: None, meta: None };
        if let Some(state) = triple.first_unreachable() {
            return invalid(
                Invariant::Connectivity,
                format!("state {state} is not reachable from state 0 in the support graph"),
            );
        }
        triple.resolve_neighbor_distances();
        Ok(triple)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_meta(mut self, meta: SpaceMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn n(&self) -> usize {
        self.measure.len()
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn meta(&self) -> Option<&SpaceMeta> {
        self.meta.as_ref()
    }

    /// Outgoing transitions of `x`, sorted by target state.
    pub fn neighbors(&self, x: usize) -> &[Neighbor] {
        &self.neighbors[x]
    }

    pub fn diagonal(&self, x: usize) -> f64 {
        self.diagonal[x]
    }

    /// Generator entry `L(x, y)`.
    pub fn rate(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return self.diagonal[x];
        }
        self.neighbors[x]
            .binary_search_by_key(&y, |nb| nb.state)
            .map(|k| self.neighbors[x][k].rate)
            .unwrap_or(0.0)
    }

    pub fn generator_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |x, y| self.rate(x, y))
    }

    /// Undirected edges in canonical order (`i < j`, lexicographic).
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for i in 0..self.n() {
            for nb in &self.neighbors[i] {
                if nb.state > i {
                    out.push(Edge {
                        i,
                        j: nb.state,
                        rate_ij: nb.rate,
                        rate_ji: self.rate(nb.state, i),
                        length: Some(nb.length),
                    });
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub(crate) fn check(&self, f: &ScalarField) -> Result<()> {
        if f.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: f.len() });
        }
        Ok(())
    }

    pub(crate) fn check_state(&self, x: usize) -> Result<()> {
        if x >= self.n() {
            return Err(Error::InvalidState { index: x, n: self.n() });
        }
        Ok(())
    }

    /// States within `radius` hops of `x`, `x` first, then ascending.
    pub fn ball(&self, x: usize, radius: usize) -> Vec<usize> {
        let mut depth = vec![usize::MAX; self.n()];
        let mut queue = VecDeque::from([x]);
        depth[x] = 0;
        while let Some(u) = queue.pop_front() {
            if depth[u] == radius {
                continue;
            }
            for nb in &self.neighbors[u] {
                if depth[nb.state] == usize::MAX {
                    depth[nb.state] = depth[u] + 1;
                    queue.push_back(nb.state);
                }
            }
        }
        let mut out: Vec<usize> = (0..self.n()).filter(|&s| s != x && depth[s] != usize::MAX).collect();
        out.insert(0, x);
        out
    }

    fn first_unreachable(&self) -> Option<usize> {
        let reach = self.ball(0, usize::MAX);
        if reach.len() == self.n() {
            return None;
        }
        let mut seen = vec![false; self.n()];
        for s in reach {
            seen[s] = true;
        }
        seen.iter().position(|&s| !s)
    }

    /// Shortest-path distances from `x` over edge lengths.
    pub fn path_distances_from(&self, x: usize) -> Vec<f64> {
        self.dijkstra(x, f64::INFINITY)
    }

    fn dijkstra(&self, source: usize, radius: f64) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Item {
            fn cmp(&self, other: &Self) -> Ordering {
                other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
            }
        }

        let mut dist = vec![f64::INFINITY; self.n()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Item(0.0, source));
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] || d > radius {
                continue;
            }
            for nb in &self.neighbors[u] {
                let nd = d + nb.length;
                if nd < dist[nb.state] && nd <= radius {
                    dist[nb.state] = nd;
                    heap.push(Item(nd, nb.state));
                }
            }
        }
        dist
    }

    fn resolve_neighbor_distances(&mut self) {
        for x in 0..self.n() {
            let radius = self.neighbors[x].iter().map(|nb| nb.length).fold(0.0, f64::max);
            let dist = self.dijkstra(x, radius);
            for nb in &mut self.neighbors[x] {
                nb.distance = dist[nb.state].min(nb.length);
            }
        }
    }
}

fn validate_measure(mut measure: Vec<f64>, options: TripleOptions) -> Result<Vec<f64>> {
    if measure.is_empty() {
        return invalid(Invariant::MeasurePositivity, "no states");
    }
    for (x, &w) in measure.iter().enumerate() {
        if !w.is_finite() {
            return invalid(Invariant::Finiteness, format!("state {x}: m = {w}"));
        }
        if w <= 0.0 {
            return invalid(Invariant::MeasurePositivity, format!("state {x}: m = {w}"));
        }
    }
    let total: f64 = measure.iter().sum();
    if (total - 1.0).abs() > TRIPLE_TOL {
        if !options.normalize_measure {
            return invalid(Invariant::MeasureNormalization, format!("total mass {total} differs from 1"));
        }
        for w in &mut measure {
            *w /= total;
        }
    }
    Ok(measure)
}
