//! Weighted graph with a distinguished boundary.
//!
//! Vertex ids are dense `usize` indices. Interior vertices always come first
//! (`0..n_interior`), boundary vertices follow.

mod families;
mod format;
mod levels;
mod two_points;

pub use families::{
    gateway_graph, generate_hex, generate_rect, generate_tri, pendant_pair_graph, random_foliated_graph,
    random_graph, stalled_foliation_graph, symmetric_star_graph, EdgeRule, RandomGraphParams, VertexRule,
};
pub use format::{read_graph, write_graph};
pub use levels::{check_foliation, compute_levels, FoliationCheck, FoliationWitness, LevelDecomposition, LevelParts};
pub use two_points::{check_two_points, default_subset_cap, extreme_vertices, TwoPointsReport, TwoPointsVerdict};

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexKind {
    Interior,
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawVertex {
    pub kind: VertexKind,
    pub mu: f64,
    pub coords: Option<[f64; 2]>,
}

impl RawVertex {
    pub fn interior(mu: f64) -> Self {
        Self { kind: VertexKind::Interior, mu, coords: None }
    }

    pub fn boundary(mu: f64) -> Self {
        Self { kind: VertexKind::Boundary, mu, coords: None }
    }

    pub fn at(mut self, x: f64, y: f64) -> Self {
        self.coords = Some([x, y]);
        self
    }
}

/// Unvalidated graph description. Vertex ids are positions in `vertices`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawGraph {
    pub vertices: Vec<RawVertex>,
    pub edges: Vec<(usize, usize, f64)>,
}

impl RawGraph {
    pub fn add_vertex(&mut self, v: RawVertex) -> usize {
        self.vertices.push(v);
        self.vertices.len() - 1
    }

    pub fn add_edge(&mut self, a: usize, b: usize, w: f64) {
        self.edges.push((a, b, w));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n_interior: usize,
    mu: Vec<f64>,
    coords: Vec<Option<[f64; 2]>>,
    // sorted by (a, b) with a < b
    edges: Vec<Edge>,
    adj: Vec<Vec<(usize, f64)>>,
}

/// Per boundary vertex: its unique interior neighbour and the data the
/// reconstruction is allowed to know about it.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryInfo {
    pub n_interior: usize,
    pub mu: Vec<f64>,
    pub neighbor: Vec<usize>,
    pub weight: Vec<f64>,
}

impl BoundaryInfo {
    pub fn n_boundary(&self) -> usize {
        self.mu.len()
    }

    /// Stable fingerprint of the boundary ordering and its known data.
    pub fn ordering_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_interior as u64).to_le_bytes());
        for z in 0..self.mu.len() {
            h.update((self.neighbor[z] as u64).to_le_bytes());
            h.update(self.mu[z].to_bits().to_le_bytes());
            h.update(self.weight[z].to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Validate a raw description and renumber it so interior ids come first
/// (relative order within each class is kept).
pub fn build_graph(raw: &RawGraph) -> Result<WeightedGraph> {
    let n = raw.vertices.len();
    let n_interior = raw.vertices.iter().filter(|v| v.kind == VertexKind::Interior).count();
    if n_interior == n {
        return Err(Error::EmptyBoundary);
    }
    if n_interior == 0 {
        return Err(Error::EmptyInterior);
    }
    for (i, v) in raw.vertices.iter().enumerate() {
        if !(v.mu > 0.0 && v.mu.is_finite()) {
            return Err(Error::NonpositiveWeight { what: format!("vertex {i}"), value: v.mu });
        }
    }

    let mut new_id = vec![0usize; n];
    let (mut next_i, mut next_b) = (0, n_interior);
    for (i, v) in raw.vertices.iter().enumerate() {
        let slot = if v.kind == VertexKind::Interior { &mut next_i } else { &mut next_b };
        new_id[i] = *slot;
        *slot += 1;
    }

    let mut seen = HashSet::new();
    let mut edges = Vec::with_capacity(raw.edges.len());
    for &(a, b, w) in &raw.edges {
        if a >= n || b >= n {
            return Err(Error::UnknownVertex(a, b));
        }
        if a == b {
            return Err(Error::SelfLoop(a));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(Error::DuplicateEdge(a.min(b), a.max(b)));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::NonpositiveWeight { what: format!("edge {a}-{b}"), value: w });
        }
        if raw.vertices[a].kind == VertexKind::Boundary && raw.vertices[b].kind == VertexKind::Boundary {
            return Err(Error::BoundaryBoundaryEdge(a, b));
        }
        let (a, b) = (new_id[a], new_id[b]);
        edges.push(Edge { a: a.min(b), b: a.max(b), w });
    }
    edges.sort_by_key(|e| (e.a, e.b));

    let mut mu = vec![0.0; n];
    let mut coords = vec![None; n];
    for (i, v) in raw.vertices.iter().enumerate() {
        mu[new_id[i]] = v.mu;
        coords[new_id[i]] = v.coords;
    }
    let mut adj = vec![Vec::new(); n];
    for e in &edges {
        adj[e.a].push((e.b, e.w));
        adj[e.b].push((e.a, e.w));
    }
    for list in &mut adj {
        list.sort_by_key(|&(v, _)| v);
    }

    let g = WeightedGraph { n_interior, mu, coords, edges, adj };
    let dist = g.bfs(&[0]);
    if let Some(v) = dist.iter().position(|d| d.is_none()) {
        // report the id the caller used
        let raw_id = new_id.iter().position(|&c| c == v).unwrap_or(v);
        return Err(Error::DisconnectedGraph(raw_id));
    }
    Ok(g)
}

impl WeightedGraph {
    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_boundary(&self) -> usize {
        self.mu.len() - self.n_interior
    }

    pub fn n_vertices(&self) -> usize {
        self.mu.len()
    }

    pub fn is_interior(&self, v: usize) -> bool {
        v < self.n_interior
    }

    pub fn interior(&self) -> std::ops::Range<usize> {
        0..self.n_interior
    }

    pub fn boundary(&self) -> std::ops::Range<usize> {
        self.n_interior..self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn mu_interior(&self) -> &[f64] {
        &self.mu[..self.n_interior]
    }

    pub fn mu_boundary(&self) -> &[f64] {
        &self.mu[self.n_interior..]
    }

    pub fn coords(&self, v: usize) -> Option<[f64; 2]> {
        self.coords[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adj[a]
            .binary_search_by_key(&b, |&(v, _)| v)
            .ok()
            .map(|i| self.adj[a][i].1)
    }

    /// Vertex whose coordinates match `p` to 1e-9.
    pub fn vertex_at(&self, p: [f64; 2]) -> Option<usize> {
        self.coords.iter().position(|c| {
            c.map(|c| (c[0] - p[0]).abs() < 1e-9 && (c[1] - p[1]).abs() < 1e-9)
                .unwrap_or(false)
        })
    }

    /// Same topology and weights with the interior vertex weights replaced.
    pub fn with_interior_mu(&self, mu_int: &[f64]) -> Result<WeightedGraph> {
        if mu_int.len() != self.n_interior {
            return Err(Error::DimensionMismatch(format!(
                "expected {} interior weights, got {}",
                self.n_interior,
                mu_int.len()
            )));
        }
        if let Some((i, &m)) = mu_int.iter().enumerate().find(|(_, m)| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::NonpositiveWeight { what: format!("vertex {i}"), value: m });
        }
        let mut g = self.clone();
        g.mu[..self.n_interior].copy_from_slice(mu_int);
        Ok(g)
    }

    /// Copy with every interior weight set to 1: the graph as seen by the
    /// reconstruction, which must not depend on the unknown interior weights.
    pub fn blinded(&self) -> WeightedGraph {
        let mut g = self.clone();
        g.mu[..self.n_interior].iter_mut().for_each(|m| *m = 1.0);
        g
    }

    pub fn to_raw(&self) -> RawGraph {
        RawGraph {
            vertices: (0..self.n_vertices())
                .map(|v| RawVertex {
                    kind: if self.is_interior(v) { VertexKind::Interior } else { VertexKind::Boundary },
                    mu: self.mu[v],
                    coords: self.coords[v],
                })
                .collect(),
            edges: self.edges.iter().map(|e| (e.a, e.b, e.w)).collect(),
        }
    }

    /// Interior neighbours of a boundary vertex.
    pub fn interior_neighbors(&self, z: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adj[z].iter().copied().filter(|&(v, _)| self.is_interior(v))
    }

    /// The unique interior neighbour of each boundary vertex, or the first
    /// boundary vertex for which it is not unique.
    pub fn boundary_info(&self) -> Result<BoundaryInfo> {
        let nb = self.n_boundary();
        let mut info = BoundaryInfo {
            n_interior: self.n_interior,
            mu: self.mu_boundary().to_vec(),
            neighbor: Vec::with_capacity(nb),
            weight: Vec::with_capacity(nb),
        };
        for z in self.boundary() {
            let nbrs: Vec<_> = self.interior_neighbors(z).collect();
            if nbrs.len() != 1 || self.degree(z) != 1 {
                return Err(Error::NonuniqueBoundaryNeighbor { vertex: z, count: nbrs.len() });
            }
            info.neighbor.push(nbrs[0].0);
            info.weight.push(nbrs[0].1);
        }
        Ok(info)
    }

    /// Hop distances from a set of sources; `None` for unreachable vertices.
    pub fn bfs(&self, sources: &[usize]) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_vertices()];
        let mut queue = VecDeque::new();
        for &s in sources {
            dist[s] = Some(0);
            queue.push_back(s);
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &(v, _) in &self.adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// SHA-256 of the canonical text serialization.
    pub fn content_hash(&self) -> String {
        let mut buf = Vec::new();
        write_graph(self, &mut buf).expect("writing to a Vec cannot fail");
        hex::encode(Sha256::digest(&buf))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn path3(w: f64) -> RawGraph {
        let mut raw = RawGraph::default();
        let z1 = raw.add_vertex(RawVertex::boundary(1.0));
        let x1 = raw.add_vertex(RawVertex::interior(1.0));
        let z2 = raw.add_vertex(RawVertex::boundary(1.0));
        raw.add_edge(z1, x1, w);
        raw.add_edge(x1, z2, w);
        raw
    }

    #[test]
    fn smallest_graph_is_valid_and_renumbered() {
        let g = build_graph(&path3(1.0)).unwrap();
        assert_eq!(g.n_interior(), 1);
        assert_eq!(g.n_boundary(), 2);
        assert_eq!(g.neighbors(0), &[(1, 1.0), (2, 1.0)]);
        let info = g.boundary_info().unwrap();
        assert_eq!(info.neighbor, vec![0, 0]);
    }

    #[test]
    fn zero_weight_rejected() {
        let err = build_graph(&path3(0.0)).unwrap_err();
        assert!(matches!(err, Error::NonpositiveWeight { .. }));
    }

    #[test]
    fn disjoint_edges_rejected() {
        let mut raw = RawGraph::default();
        for _ in 0..2 {
            let x = raw.add_vertex(RawVertex::interior(1.0));
            let z = raw.add_vertex(RawVertex::boundary(1.0));
            raw.add_edge(x, z, 1.0);
        }
        assert!(matches!(build_graph(&raw), Err(Error::DisconnectedGraph(_))));
    }

    #[test]
    fn structural_errors() {
        let mut raw = path3(1.0);
        raw.add_edge(1, 1, 1.0);
        assert_eq!(build_graph(&raw), Err(Error::SelfLoop(1)));

        let mut raw = path3(1.0);
        raw.add_edge(1, 0, 2.0);
        assert_eq!(build_graph(&raw), Err(Error::DuplicateEdge(0, 1)));

        let mut raw = path3(1.0);
        raw.add_edge(0, 2, 1.0);
        assert_eq!(build_graph(&raw), Err(Error::BoundaryBoundaryEdge(0, 2)));

        let mut raw = path3(1.0);
        raw.vertices.iter_mut().for_each(|v| v.kind = VertexKind::Interior);
        assert_eq!(build_graph(&raw), Err(Error::EmptyBoundary));

        let mut raw = path3(1.0);
        raw.vertices[1].mu = -1.0;
        assert!(matches!(build_graph(&raw), Err(Error::NonpositiveWeight { .. })));
    }

    #[test]
    fn boundary_with_two_interior_neighbors() {
        let mut raw = path3(1.0);
        let x2 = raw.add_vertex(RawVertex::interior(1.0));
        raw.add_edge(0, x2, 1.0);
        let g = build_graph(&raw).unwrap();
        assert!(matches!(g.boundary_info(), Err(Error::NonuniqueBoundaryNeighbor { count: 2, .. })));
    }

    #[test]
    fn blinded_keeps_boundary_mu() {
        let mut raw = path3(1.0);
        raw.vertices[0].mu = 3.0;
        raw.vertices[1].mu = 7.0;
        let g = build_graph(&raw).unwrap().blinded();
        assert_eq!(g.mu(), &[1.0, 3.0, 1.0]);
    }
}
