use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{build_graph, check_foliation, compute_levels, RawGraph, RawVertex, WeightedGraph};
use crate::error::{Error, Result};

/// Edge weight rule for the generated families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EdgeRule {
    Constant(f64),
    /// ½(deg x + deg y), degrees taken in the whole graph.
    MeanDegree,
}

/// Vertex weight rule for the generated families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VertexRule {
    Constant(f64),
    Degree,
    /// 1 + 0.5 sin(i) + 0.5 cos(i) with i the 1-based vertex id.
    Trig,
}

impl EdgeRule {
    fn eval(self, deg_a: usize, deg_b: usize) -> f64 {
        match self {
            EdgeRule::Constant(c) => c,
            EdgeRule::MeanDegree => 0.5 * (deg_a + deg_b) as f64,
        }
    }
}

impl VertexRule {
    fn eval(self, deg: usize, id: usize) -> f64 {
        match self {
            VertexRule::Constant(c) => c,
            VertexRule::Degree => deg as f64,
            VertexRule::Trig => {
                let i = (id + 1) as f64;
                1.0 + 0.5 * i.sin() + 0.5 * i.cos()
            }
        }
    }
}

fn parse_const(s: &str) -> Option<f64> {
    s.strip_prefix("const:").and_then(|v| v.parse().ok())
}

impl FromStr for EdgeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean-degree" => Ok(EdgeRule::MeanDegree),
            _ => parse_const(s)
                .map(EdgeRule::Constant)
                .ok_or_else(|| Error::InvalidParameter(format!("edge rule `{s}` (want const:<w> or mean-degree)"))),
        }
    }
}

impl FromStr for VertexRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degree" => Ok(VertexRule::Degree),
            "trig" => Ok(VertexRule::Trig),
            _ => parse_const(s)
                .map(VertexRule::Constant)
                .ok_or_else(|| Error::InvalidParameter(format!("vertex rule `{s}` (want const:<mu>, degree or trig)"))),
        }
    }
}

impl fmt::Display for EdgeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeRule::Constant(c) => write!(f, "const:{c}"),
            EdgeRule::MeanDegree => f.write_str("mean-degree"),
        }
    }
}

impl fmt::Display for VertexRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexRule::Constant(c) => write!(f, "const:{c}"),
            VertexRule::Degree => f.write_str("degree"),
            VertexRule::Trig => f.write_str("trig"),
        }
    }
}

fn assemble(
    interior: &[[f64; 2]],
    boundary: &[[f64; 2]],
    edges: &[(usize, usize)],
    w_rule: EdgeRule,
    mu_rule: VertexRule,
) -> Result<WeightedGraph> {
    let n = interior.len() + boundary.len();
    let mut deg = vec![0usize; n];
    for &(a, b) in edges {
        deg[a] += 1;
        deg[b] += 1;
    }
    let mut raw = RawGraph::default();
    for (i, p) in interior.iter().enumerate() {
        raw.add_vertex(RawVertex::interior(mu_rule.eval(deg[i], i)).at(p[0], p[1]));
    }
    for (k, p) in boundary.iter().enumerate() {
        let i = interior.len() + k;
        raw.add_vertex(RawVertex::boundary(mu_rule.eval(deg[i], i)).at(p[0], p[1]));
    }
    for &(a, b) in edges {
        raw.add_edge(a, b, w_rule.eval(deg[a], deg[b]));
    }
    build_graph(&raw)
}

/// Interior lattice points row by row, then the side boundary points in the
/// order left, right, bottom, top. Corners are not included.
fn lattice_sites(m: usize, n: usize) -> (Vec<(i64, i64)>, Vec<(i64, i64)>) {
    let (mi, ni) = (m as i64, n as i64);
    let interior = (1..=ni).flat_map(|k| (1..=mi).map(move |j| (j, k))).collect();
    let boundary = (1..=ni)
        .map(|k| (0, k))
        .chain((1..=ni).map(|k| (mi + 1, k)))
        .chain((1..=mi).map(|j| (j, 0)))
        .chain((1..=mi).map(|j| (j, ni + 1)))
        .collect();
    (interior, boundary)
}

fn lattice_edges(
    interior: &[(i64, i64)],
    boundary: &[(i64, i64)],
    interior_steps: &[(i64, i64)],
) -> Vec<(usize, usize)> {
    let n_int = interior.len();
    let index: HashMap<(i64, i64), usize> =
        interior.iter().chain(boundary).enumerate().map(|(i, &p)| (p, i)).collect();
    let axis = [(1, 0), (-1, 0), (0, 1), (0, -1)];
    let mut edges = BTreeSet::new();
    for (a, &(j, k)) in interior.iter().enumerate() {
        for &(dj, dk) in interior_steps {
            if let Some(&b) = index.get(&(j + dj, k + dk)) {
                // boundary sites only attach along the lattice axes
                if b >= n_int && !axis.contains(&(dj, dk)) {
                    continue;
                }
                edges.insert((a.min(b), a.max(b)));
            }
        }
    }
    edges.into_iter().collect()
}

fn check_dims(m: usize, n: usize, min: usize) -> Result<()> {
    if m < min || n < min {
        return Err(Error::InvalidDimension(format!("need m, n >= {min}, got ({m}, {n})")));
    }
    Ok(())
}

/// Square-lattice family: interior `{1..m} x {1..n}` with one boundary vertex
/// beyond each side site.
pub fn generate_rect(m: usize, n: usize, w_rule: EdgeRule, mu_rule: VertexRule) -> Result<WeightedGraph> {
    check_dims(m, n, 2)?;
    let (interior, boundary) = lattice_sites(m, n);
    let edges = lattice_edges(&interior, &boundary, &[(1, 0), (-1, 0), (0, 1), (0, -1)]);
    let xy = |p: &(i64, i64)| [p.0 as f64, p.1 as f64];
    let pi: Vec<_> = interior.iter().map(xy).collect();
    let pb: Vec<_> = boundary.iter().map(xy).collect();
    assemble(&pi, &pb, &edges, w_rule, mu_rule)
}

/// Triangular-lattice family on the same sites as [`generate_rect`]; site
/// (j, k) sits at j + k·e^{iπ/3}.
pub fn generate_tri(m: usize, n: usize, w_rule: EdgeRule, mu_rule: VertexRule) -> Result<WeightedGraph> {
    check_dims(m, n, 2)?;
    let (interior, boundary) = lattice_sites(m, n);
    let steps = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)];
    let edges = lattice_edges(&interior, &boundary, &steps);
    let h = 3f64.sqrt() / 2.0;
    let xy = |p: &(i64, i64)| [p.0 as f64 + 0.5 * p.1 as f64, h * p.1 as f64];
    let pi: Vec<_> = interior.iter().map(xy).collect();
    let pb: Vec<_> = boundary.iter().map(xy).collect();
    assemble(&pi, &pb, &edges, w_rule, mu_rule)
}

/// Hexagonal family: `(m+1)/2` columns by `n` rows of unit hexagons, with
/// boundary vertices one unit outside the free corners.
pub fn generate_hex(m: usize, n: usize, w_rule: EdgeRule, mu_rule: VertexRule) -> Result<WeightedGraph> {
    if m % 2 == 0 || n < 1 {
        return Err(Error::InvalidDimension(format!("need odd m >= 1 and n >= 1, got ({m}, {n})")));
    }
    let s3 = 3f64.sqrt();
    let omega = |r: f64| {
        let a = r * std::f64::consts::PI / 3.0;
        [a.cos(), a.sin()]
    };
    let cols = (m - 1) / 2 + 1;

    let mut interior: Vec<[f64; 2]> = Vec::new();
    for j in 0..cols {
        for k in 0..n {
            let c = [3.0 * j as f64, s3 * k as f64];
            for r in 0..6 {
                let w = omega(r as f64);
                let p = [c[0] + w[0], c[1] + w[1]];
                if !interior.iter().any(|q| (q[0] - p[0]).hypot(q[1] - p[1]) < 1e-9) {
                    interior.push(p);
                }
            }
        }
    }
    let key = |p: &[f64; 2]| ((p[1] * 1e6).round() as i64, (p[0] * 1e6).round() as i64);
    interior.sort_by_key(key);

    let mut boundary = Vec::new();
    let (w2, w3, w4) = (omega(2.0), omega(3.0), omega(4.0));
    for k in 0..n {
        boundary.push([2.0 * w3[0], s3 * k as f64 + 2.0 * w3[1]]);
    }
    let right = 3.0 * (m - 1) as f64 / 2.0 + 2.0;
    for k in 0..n {
        boundary.push([right, s3 * k as f64]);
    }
    for j in 0..cols {
        let p = [3.0 * j as f64 + 2.0 * w4[0], 2.0 * w4[1]];
        boundary.push(p);
        boundary.push([p[0] + 2.0, p[1]]);
    }
    let top = s3 * (n - 1) as f64;
    for j in 0..cols {
        let p = [3.0 * j as f64 + 2.0 * w2[0], top + 2.0 * w2[1]];
        boundary.push(p);
        boundary.push([p[0] + 2.0, p[1]]);
    }

    let n_int = interior.len();
    let all: Vec<[f64; 2]> = interior.iter().chain(&boundary).copied().collect();
    let mut edges = Vec::new();
    for a in 0..all.len() {
        for b in a + 1..all.len() {
            if a >= n_int && b >= n_int {
                continue;
            }
            let d = (all[a][0] - all[b][0]).hypot(all[a][1] - all[b][1]);
            if (d - 1.0).abs() < 1e-9 {
                edges.push((a, b));
            }
        }
    }
    assemble(&interior, &boundary, &edges, w_rule, mu_rule)
}

/// Two boundary vertices on one interior vertex `x1`, plus a pendant interior
/// vertex `x2` hanging off `x1`. Every harmonic function is constant on
/// `{x1, x2}`, so products of harmonics span only one direction.
pub fn pendant_pair_graph(w_z1: f64, w_z2: f64, w_x: f64, mu_x1: f64, mu_x2: f64) -> Result<WeightedGraph> {
    let mut raw = RawGraph::default();
    let x1 = raw.add_vertex(RawVertex::interior(mu_x1).at(0.0, 0.0));
    let x2 = raw.add_vertex(RawVertex::interior(mu_x2).at(0.0, -1.0));
    let z1 = raw.add_vertex(RawVertex::boundary(1.0).at(-1.0, 0.0));
    let z2 = raw.add_vertex(RawVertex::boundary(1.0).at(1.0, 0.0));
    raw.add_edge(z1, x1, w_z1);
    raw.add_edge(x1, z2, w_z2);
    raw.add_edge(x1, x2, w_x);
    build_graph(&raw)
}

/// Triangle a–b–x with a boundary vertex on each corner and an interior
/// pendant y on x. Satisfies the foliation condition, but {x, y} has only one
/// extreme vertex. Interior ids: a = 0, b = 1, x = 2, y = 3.
pub fn gateway_graph() -> WeightedGraph {
    let mut raw = RawGraph::default();
    let a = raw.add_vertex(RawVertex::interior(1.0).at(0.0, 1.0));
    let b = raw.add_vertex(RawVertex::interior(1.0).at(2.0, 1.0));
    let x = raw.add_vertex(RawVertex::interior(1.0).at(1.0, 0.0));
    let y = raw.add_vertex(RawVertex::interior(1.0).at(1.0, -1.0));
    let za = raw.add_vertex(RawVertex::boundary(1.0).at(-1.0, 1.0));
    let zb = raw.add_vertex(RawVertex::boundary(1.0).at(3.0, 1.0));
    let zx = raw.add_vertex(RawVertex::boundary(1.0).at(0.0, -0.5));
    for (p, q) in [(a, b), (a, x), (b, x), (x, y), (za, a), (zb, b), (zx, x)] {
        raw.add_edge(p, q, 1.0);
    }
    build_graph(&raw).expect("fixed graph is valid")
}

/// 19-site lattice patch (grid `{1..4} x {0..5}` minus five sites) with boundary
/// vertices on ten of its sites. The greedy level split stalls on level 1
/// leaving {(2,3), (4,2)}, yet every interior subset has two extreme vertices.
pub fn stalled_foliation_graph() -> WeightedGraph {
    let removed = [(4, 0), (1, 4), (1, 5), (2, 5), (2, 4)];
    let sites: Vec<(i64, i64)> = (0..=5)
        .flat_map(|k| (1..=4).map(move |j| (j, k)))
        .filter(|p| !removed.contains(p))
        .collect();
    let attached = [(1, 0), (2, 0), (3, 0), (1, 1), (1, 3), (2, 3), (3, 5), (4, 1), (4, 2), (4, 5)];

    let mut raw = RawGraph::default();
    let index: HashMap<(i64, i64), usize> = sites
        .iter()
        .map(|&(j, k)| ((j, k), raw.add_vertex(RawVertex::interior(1.0).at(j as f64, k as f64))))
        .collect();
    for &(j, k) in &sites {
        for (dj, dk) in [(1, 0), (0, 1)] {
            if let Some(&b) = index.get(&(j + dj, k + dk)) {
                raw.add_edge(index[&(j, k)], b, 1.0);
            }
        }
    }
    for &(j, k) in &attached {
        // put the boundary vertex halfway towards a free lattice direction
        let (dj, dk) = [(-1, 0), (1, 0), (0, -1), (0, 1)]
            .into_iter()
            .find(|&(dj, dk)| !index.contains_key(&(j + dj, k + dk)))
            .unwrap_or((0, 0));
        let z = raw.add_vertex(RawVertex::boundary(1.0).at(j as f64 + 0.5 * dj as f64, k as f64 + 0.5 * dk as f64));
        raw.add_edge(index[&(j, k)], z, 1.0);
    }
    build_graph(&raw).expect("fixed graph is valid")
}

/// Star with `arms` identical two-edge arms, each ending in a boundary
/// vertex. The symmetry produces eigenvalues of multiplicity `arms - 1`.
pub fn symmetric_star_graph(arms: usize, w: f64, mu: f64) -> Result<WeightedGraph> {
    if arms < 2 {
        return Err(Error::InvalidDimension(format!("need at least 2 arms, got {arms}")));
    }
    let mut raw = RawGraph::default();
    let c = raw.add_vertex(RawVertex::interior(mu).at(0.0, 0.0));
    for i in 0..arms {
        let a = std::f64::consts::TAU * i as f64 / arms as f64;
        let (s, co) = a.sin_cos();
        let p = raw.add_vertex(RawVertex::interior(mu).at(co, s));
        let q = raw.add_vertex(RawVertex::interior(mu).at(2.0 * co, 2.0 * s));
        let z = raw.add_vertex(RawVertex::boundary(mu).at(3.0 * co, 3.0 * s));
        raw.add_edge(c, p, w);
        raw.add_edge(p, q, w);
        raw.add_edge(q, z, w);
    }
    build_graph(&raw)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomGraphParams {
    pub n_interior: usize,
    pub n_boundary: usize,
    /// Interior edges added on top of a random spanning tree.
    pub extra_edges: usize,
    /// Each boundary vertex gets between 1 and this many interior neighbours.
    pub max_boundary_links: usize,
    pub w_range: (f64, f64),
    pub mu_range: (f64, f64),
}

impl Default for RandomGraphParams {
    fn default() -> Self {
        Self {
            n_interior: 12,
            n_boundary: 5,
            extra_edges: 6,
            max_boundary_links: 1,
            w_range: (0.5, 2.0),
            mu_range: (0.5, 2.0),
        }
    }
}

/// Connected random graph: spanning tree plus extra interior edges, boundary
/// vertices attached only to interior ones.
pub fn random_graph<R: Rng + ?Sized>(p: &RandomGraphParams, rng: &mut R) -> Result<WeightedGraph> {
    if p.n_interior == 0 || p.n_boundary == 0 || p.max_boundary_links == 0 {
        return Err(Error::InvalidParameter("random graph needs interior, boundary and links".into()));
    }
    let mut raw = RawGraph::default();
    for _ in 0..p.n_interior {
        raw.add_vertex(RawVertex::interior(rng.random_range(p.mu_range.0..=p.mu_range.1)));
    }
    let mut used = BTreeSet::new();
    for v in 1..p.n_interior {
        let u = rng.random_range(0..v);
        used.insert((u, v));
    }
    let max_extra = p.n_interior * (p.n_interior - 1) / 2 - used.len();
    for _ in 0..p.extra_edges.min(max_extra) {
        loop {
            let a = rng.random_range(0..p.n_interior);
            let b = rng.random_range(0..p.n_interior);
            if a != b && used.insert((a.min(b), a.max(b))) {
                break;
            }
        }
    }
    for (a, b) in used {
        raw.add_edge(a, b, rng.random_range(p.w_range.0..=p.w_range.1));
    }
    for _ in 0..p.n_boundary {
        let z = raw.add_vertex(RawVertex::boundary(rng.random_range(p.mu_range.0..=p.mu_range.1)));
        let links = rng.random_range(1..=p.max_boundary_links.min(p.n_interior));
        let mut targets = BTreeSet::new();
        while targets.len() < links {
            targets.insert(rng.random_range(0..p.n_interior));
        }
        for x in targets {
            raw.add_edge(x, z, rng.random_range(p.w_range.0..=p.w_range.1));
        }
    }
    build_graph(&raw)
}

/// Rejection-sample [`random_graph`] (one interior link per boundary vertex)
/// until the foliation condition holds and the deepest level is at least
/// `min_depth`.
pub fn random_foliated_graph<R: Rng + ?Sized>(
    p: &RandomGraphParams,
    min_depth: usize,
    rng: &mut R,
) -> Result<WeightedGraph> {
    let p = RandomGraphParams { max_boundary_links: 1, ..p.clone() };
    for _ in 0..10_000 {
        let g = random_graph(&p, rng)?;
        if compute_levels(&g).max_level() >= min_depth && check_foliation(&g).holds {
            return Ok(g);
        }
    }
    Err(Error::InvalidParameter(format!("no foliated graph with depth >= {min_depth} found for {p:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(f: fn(usize, usize, EdgeRule, VertexRule) -> Result<WeightedGraph>, m: usize, n: usize) -> WeightedGraph {
        f(m, n, EdgeRule::Constant(1.0), VertexRule::Constant(1.0)).unwrap()
    }

    #[test]
    fn rect_counts() {
        for (m, n) in [(4, 3), (10, 9), (2, 2), (3, 7)] {
            let g = unit(generate_rect, m, n);
            assert_eq!((g.n_interior(), g.n_boundary()), (m * n, 2 * (m + n)));
        }
    }

    #[test]
    fn rect_2_2_by_enumeration() {
        // sites of {0..3}^2 minus the 4 corners, split by whether 1 <= j,k <= 2
        let mut int = 0;
        let mut bnd = 0;
        for j in 0..4 {
            for k in 0..4 {
                let corner = (j == 0 || j == 3) && (k == 0 || k == 3);
                if corner {
                    continue;
                }
                if (1..=2).contains(&j) && (1..=2).contains(&k) {
                    int += 1;
                } else {
                    bnd += 1;
                }
            }
        }
        let g = unit(generate_rect, 2, 2);
        assert_eq!((g.n_interior(), g.n_boundary()), (int, bnd));
        let t = unit(generate_tri, 2, 2);
        assert_eq!((t.n_interior(), t.n_boundary()), (int, bnd));
    }

    #[test]
    fn tri_counts_and_unit_edges() {
        for (m, n) in [(6, 4), (10, 9), (2, 2)] {
            let g = unit(generate_tri, m, n);
            assert_eq!((g.n_interior(), g.n_boundary()), (m * n, 2 * (m + n)));
            for e in g.edges() {
                let (p, q) = (g.coords(e.a).unwrap(), g.coords(e.b).unwrap());
                assert!(((p[0] - q[0]).hypot(p[1] - q[1]) - 1.0).abs() < 1e-12);
            }
        }
        // corner site (1,1): the diagonal neighbours (2,0) and (0,2) are
        // boundary sites and stay unlinked
        let g = unit(generate_tri, 6, 4);
        let x = g.vertex_at([1.5, 3f64.sqrt() / 2.0]).unwrap();
        assert_eq!(g.degree(x), 4);
        let y = g.vertex_at([2.0 + 1.0, 3f64.sqrt()]).unwrap();
        assert_eq!(g.degree(y), 6);
    }

    #[test]
    fn hex_counts() {
        for (m, n) in [(1, 1), (3, 4), (9, 4), (5, 2), (7, 3)] {
            let g = unit(generate_hex, m, n);
            assert_eq!(g.n_boundary(), 2 * (m + n + 1), "({m},{n})");
            assert_eq!(g.n_interior(), (m + 1) * (2 * n + 1), "({m},{n})");
            for z in g.boundary() {
                assert_eq!(g.degree(z), 1);
            }
        }
        assert!(matches!(generate_hex(4, 2, EdgeRule::MeanDegree, VertexRule::Degree), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn families_are_foliated_with_enough_boundary() {
        let graphs = [
            unit(generate_rect, 10, 9),
            unit(generate_rect, 4, 3),
            unit(generate_tri, 10, 9),
            unit(generate_tri, 6, 4),
            unit(generate_hex, 9, 4),
            unit(generate_hex, 3, 4),
        ];
        for g in &graphs {
            assert!(check_foliation(g).holds);
            let nb = g.n_boundary();
            assert!(nb * (nb + 1) / 2 >= g.n_interior());
        }
    }

    #[test]
    fn bad_dimensions() {
        assert!(matches!(generate_rect(1, 5, EdgeRule::MeanDegree, VertexRule::Degree), Err(Error::InvalidDimension(_))));
        assert!(matches!(generate_tri(3, 1, EdgeRule::MeanDegree, VertexRule::Degree), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn weight_rules() {
        let g = generate_rect(3, 3, EdgeRule::MeanDegree, VertexRule::Degree).unwrap();
        for e in g.edges() {
            assert_eq!(e.w, 0.5 * (g.degree(e.a) + g.degree(e.b)) as f64);
        }
        for v in 0..g.n_vertices() {
            assert_eq!(g.mu()[v], g.degree(v) as f64);
        }
        let g = generate_rect(3, 3, EdgeRule::Constant(0.25), VertexRule::Trig).unwrap();
        assert_eq!(g.mu()[0], 1.0 + 0.5 * 1f64.sin() + 0.5 * 1f64.cos());
        assert!(g.edges().iter().all(|e| e.w == 0.25));
    }

    #[test]
    fn rule_strings_round_trip() {
        for s in ["const:0.25", "mean-degree"] {
            assert_eq!(s.parse::<EdgeRule>().unwrap().to_string(), s);
        }
        for s in ["const:1", "degree", "trig"] {
            assert_eq!(s.parse::<VertexRule>().unwrap().to_string(), s);
        }
        assert!("deg".parse::<VertexRule>().is_err());
    }

    #[test]
    fn random_foliated_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = RandomGraphParams { n_interior: 15, n_boundary: 6, extra_edges: 4, ..Default::default() };
        for _ in 0..5 {
            let g = random_foliated_graph(&p, 2, &mut rng).unwrap();
            assert!(check_foliation(&g).holds);
            assert!(compute_levels(&g).max_level() >= 2);
        }
    }

    #[test]
    fn star_is_symmetric() {
        let g = symmetric_star_graph(4, 1.0, 1.0).unwrap();
        assert_eq!((g.n_interior(), g.n_boundary()), (9, 4));
        assert!(check_foliation(&g).holds);
    }
}
