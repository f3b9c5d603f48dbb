use serde::{Deserialize, Serialize};

use super::WeightedGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoPointsVerdict {
    Holds,
    Fails,
    /// Every enumerated subset passed but the enumeration was capped.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoPointsReport {
    pub verdict: TwoPointsVerdict,
    /// A subset with fewer than two extreme vertices.
    pub witness: Option<Vec<usize>>,
    pub cap: usize,
    pub subsets_checked: u64,
}

/// Largest cap up to `|G|` whose enumeration stays below `budget` subsets
/// (at least 2).
pub fn default_subset_cap(g: &WeightedGraph, budget: u64) -> usize {
    let n = g.n_interior();
    let mut total = 0u64;
    let mut cap = 2;
    for s in 2..=n {
        total = total.saturating_add(binomial(n as u64, s as u64));
        if total > budget && s > 2 {
            break;
        }
        cap = s;
    }
    cap
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Brute-force check that every interior subset X with `2 <= |X| <= cap` has
/// at least two extreme vertices: x is extreme when some boundary vertex is
/// strictly closer to x than to every other member of X.
pub fn check_two_points(g: &WeightedGraph, max_subset_size: usize) -> Result<TwoPointsReport> {
    if max_subset_size < 2 {
        return Err(Error::SubsetCapTooSmall(max_subset_size));
    }
    let n = g.n_interior();
    let cap = max_subset_size.min(n);
    // dist[z][x] for boundary z, interior x
    let dist: Vec<Vec<usize>> = g
        .boundary()
        .map(|z| g.bfs(&[z])[..n].iter().map(|d| d.expect("connected")).collect())
        .collect();

    let mut checked = 0u64;
    let mut idx: Vec<usize> = Vec::with_capacity(cap);
    for size in 2..=cap {
        idx.clear();
        idx.extend(0..size);
        loop {
            checked += 1;
            if !has_two_extreme(&dist, &idx) {
                return Ok(TwoPointsReport {
                    verdict: TwoPointsVerdict::Fails,
                    witness: Some(idx.clone()),
                    cap,
                    subsets_checked: checked,
                });
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
    }
    let verdict = if cap >= n { TwoPointsVerdict::Holds } else { TwoPointsVerdict::Unknown };
    Ok(TwoPointsReport { verdict, witness: None, cap, subsets_checked: checked })
}

/// Members of `subset` that are extreme with respect to the boundary.
pub fn extreme_vertices(g: &WeightedGraph, subset: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = g
        .boundary()
        .filter_map(|z| {
            let d = g.bfs(&[z]);
            let best = subset.iter().map(|&x| d[x].unwrap()).min()?;
            let mut hits = subset.iter().filter(|&&x| d[x].unwrap() == best);
            let x = *hits.next()?;
            hits.next().is_none().then_some(x)
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

fn has_two_extreme(dist: &[Vec<usize>], subset: &[usize]) -> bool {
    let mut first: Option<usize> = None;
    for dz in dist {
        let mut best = usize::MAX;
        let mut arg = None;
        for &x in subset {
            let d = dz[x];
            if d < best {
                best = d;
                arg = Some(x);
            } else if d == best {
                arg = None;
            }
        }
        if let Some(x) = arg {
            match first {
                None => first = Some(x),
                Some(f) if f != x => return true,
                _ => {}
            }
        }
    }
    false
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, gateway_graph, stalled_foliation_graph, RawGraph, RawVertex};

    #[test]
    fn path_of_two_interior_holds() {
        let mut raw = RawGraph::default();
        let z1 = raw.add_vertex(RawVertex::boundary(1.0));
        let x1 = raw.add_vertex(RawVertex::interior(1.0));
        let x2 = raw.add_vertex(RawVertex::interior(1.0));
        let z2 = raw.add_vertex(RawVertex::boundary(1.0));
        raw.add_edge(z1, x1, 1.0);
        raw.add_edge(x1, x2, 1.0);
        raw.add_edge(x2, z2, 1.0);
        let g = build_graph(&raw).unwrap();
        let r = check_two_points(&g, 2).unwrap();
        assert_eq!(r.verdict, TwoPointsVerdict::Holds);
        assert_eq!(r.subsets_checked, 1);
    }

    #[test]
    fn cap_below_two_is_an_error() {
        let g = stalled_foliation_graph();
        assert_eq!(check_two_points(&g, 1), Err(Error::SubsetCapTooSmall(1)));
    }

    #[test]
    fn gateway_fails_with_pendant_pair() {
        let g = gateway_graph();
        let r = check_two_points(&g, g.n_interior()).unwrap();
        assert_eq!(r.verdict, TwoPointsVerdict::Fails);
        let w = r.witness.unwrap();
        assert!(extreme_vertices(&g, &w).len() < 2);
        // x and y are the last two interior vertices; only x is extreme
        assert_eq!(extreme_vertices(&g, &[2, 3]), vec![2]);
    }

    #[test]
    fn stalled_graph_holds_exhaustively() {
        let g = stalled_foliation_graph();
        let r = check_two_points(&g, g.n_interior()).unwrap();
        assert_eq!(r.verdict, TwoPointsVerdict::Holds);
        assert_eq!(r.subsets_checked, (1u64 << 19) - 1 - 19);
    }

    #[test]
    fn capped_enumeration_is_unknown() {
        let g = stalled_foliation_graph();
        let r = check_two_points(&g, 3).unwrap();
        assert_eq!(r.verdict, TwoPointsVerdict::Unknown);
        assert_eq!(r.subsets_checked, binomial(19, 2) + binomial(19, 3));
    }

    #[test]
    fn combinations_enumerate_all() {
        let mut idx = vec![0, 1, 2];
        let mut count = 1;
        while next_combination(&mut idx, 6) {
            count += 1;
        }
        assert_eq!(count, 20);
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(5, 0), 1);
    }

    #[test]
    fn default_cap_respects_budget() {
        let g = stalled_foliation_graph();
        assert_eq!(default_subset_cap(&g, u64::MAX), 19);
        assert_eq!(default_subset_cap(&g, 1 << 19), 19);
        assert_eq!(default_subset_cap(&g, 200), 2);
    }
}
