use std::collections::BTreeSet;

use super::WeightedGraph;

/// Greedy split of one level set. `residual` is empty when the level was
/// exhausted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelParts {
    pub level: usize,
    pub parts: Vec<Vec<usize>>,
    pub residual: Vec<usize>,
}

impl LevelParts {
    pub fn exhausted(&self) -> bool {
        self.residual.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelDecomposition {
    /// Hop distance to the boundary.
    pub level_of: Vec<usize>,
    /// `levels[l]` is the sorted vertex set at distance `l`; `levels[0]` is the boundary.
    pub levels: Vec<Vec<usize>>,
    /// One entry per level `1..=max_level`, up to and including the first
    /// level that could not be exhausted.
    pub foliation: Vec<LevelParts>,
}

impl LevelDecomposition {
    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    /// Parts of level `l >= 1`, or `None` when that level was not exhausted
    /// (or not reached because an earlier level stalled).
    pub fn foliation_parts(&self, l: usize) -> Option<&[Vec<usize>]> {
        let p = self.foliation.get(l.checked_sub(1)?)?;
        p.exhausted().then_some(p.parts.as_slice())
    }

    pub fn stall(&self) -> Option<&LevelParts> {
        self.foliation.iter().find(|p| !p.exhausted())
    }
}

pub fn compute_levels(g: &WeightedGraph) -> LevelDecomposition {
    let sources: Vec<usize> = g.boundary().collect();
    let level_of: Vec<usize> = g
        .bfs(&sources)
        .into_iter()
        .map(|d| d.expect("validated graphs are connected"))
        .collect();
    let max_level = level_of.iter().copied().max().unwrap_or(0);
    let mut levels = vec![Vec::new(); max_level + 1];
    for (v, &l) in level_of.iter().enumerate() {
        levels[l].push(v);
    }

    let mut foliation = Vec::new();
    for l in 1..=max_level {
        let parts = split_level(g, &level_of, &levels[l], l);
        let done = parts.exhausted();
        foliation.push(parts);
        if !done {
            break;
        }
    }
    LevelDecomposition { level_of, levels, foliation }
}

fn split_level(g: &WeightedGraph, level_of: &[usize], level: &[usize], l: usize) -> LevelParts {
    let next = |x: usize| -> BTreeSet<usize> {
        g.neighbors(x).iter().map(|&(v, _)| v).filter(|&v| level_of[v] == l + 1).collect()
    };
    let mut remaining: BTreeSet<usize> = level.iter().copied().collect();
    let mut covered: BTreeSet<usize> = BTreeSet::new();
    let mut parts = Vec::new();

    let first: Vec<usize> = remaining.iter().copied().filter(|&x| next(x).len() <= 1).collect();
    loop {
        let part: Vec<usize> = if parts.is_empty() {
            first.clone()
        } else {
            remaining
                .iter()
                .copied()
                .filter(|&x| {
                    let nx = next(x);
                    nx.len() > 1 && nx.difference(&covered).count() <= 1
                })
                .collect()
        };
        if part.is_empty() && !parts.is_empty() {
            break;
        }
        for &x in &part {
            remaining.remove(&x);
            covered.extend(g.neighbors(x).iter().map(|&(v, _)| v));
        }
        parts.push(part);
        if remaining.is_empty() {
            break;
        }
    }
    // an empty first part carries no information
    if parts.first().is_some_and(|p| p.is_empty()) && parts.len() == 1 {
        parts.clear();
    }
    LevelParts { level: l, parts, residual: remaining.into_iter().collect() }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FoliationWitness {
    /// A boundary vertex without exactly one interior neighbour.
    BoundaryVertex { vertex: usize, interior_neighbors: usize },
    /// Vertices of `level` the greedy split could not place.
    Residual { level: usize, vertices: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoliationCheck {
    pub holds: bool,
    pub witness: Option<FoliationWitness>,
}

pub fn check_foliation(g: &WeightedGraph) -> FoliationCheck {
    for z in g.boundary() {
        let k = g.interior_neighbors(z).count();
        if k != 1 || g.degree(z) != 1 {
            return FoliationCheck {
                holds: false,
                witness: Some(FoliationWitness::BoundaryVertex { vertex: z, interior_neighbors: k }),
            };
        }
    }
    match compute_levels(g).stall() {
        Some(p) => FoliationCheck {
            holds: false,
            witness: Some(FoliationWitness::Residual { level: p.level, vertices: p.residual.clone() }),
        },
        None => FoliationCheck { holds: true, witness: None },
    }
}
