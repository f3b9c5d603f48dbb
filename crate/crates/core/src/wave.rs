//! Explicit graph wave solvers, the simulated Neumann-to-Dirichlet map and
//! the control map W.
//!
//! Space-time boundary fields are vectorized time-major: entry `(t, z)` sits
//! at `t * n_boundary + z`.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{compute_levels, BoundaryInfo, WeightedGraph};

/// Neumann data f(t, z) for t in 0..=2T.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeBoundaryField {
    horizon: usize,
    values: DMatrix<f64>,
}

impl SpaceTimeBoundaryField {
    pub fn zeros(horizon: usize, n_boundary: usize) -> Self {
        Self { horizon, values: DMatrix::zeros(2 * horizon + 1, n_boundary) }
    }

    pub fn from_values(horizon: usize, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != 2 * horizon + 1 {
            return Err(Error::DimensionMismatch(format!(
                "field has {} time rows, horizon {horizon} needs {}",
                values.nrows(),
                2 * horizon + 1
            )));
        }
        Ok(Self { horizon, values })
    }

    pub fn impulse(horizon: usize, n_boundary: usize, t: usize, z: usize) -> Self {
        let mut f = Self::zeros(horizon, n_boundary);
        f.values[(t, z)] = 1.0;
        f
    }

    pub fn from_vector(horizon: usize, n_boundary: usize, v: &DVector<f64>) -> Result<Self> {
        let nt = 2 * horizon + 1;
        if v.len() != nt * n_boundary {
            return Err(Error::DimensionMismatch(format!("vector of length {} for {nt} x {n_boundary}", v.len())));
        }
        Ok(Self { horizon, values: DMatrix::from_fn(nt, n_boundary, |t, z| v[t * n_boundary + z]) })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_boundary(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, t: usize, z: usize) -> f64 {
        self.values[(t, z)]
    }

    pub fn set(&mut self, t: usize, z: usize, v: f64) {
        self.values[(t, z)] = v;
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let (nt, nb) = self.values.shape();
        DVector::from_fn(nt * nb, |i, _| self.values[(i / nb, i % nb)])
    }
}

/// u(t, v) for t = 0.. and every vertex (interior ids first).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub values: DMatrix<f64>,
}

impl WaveField {
    pub fn n_times(&self) -> usize {
        self.values.nrows()
    }

    pub fn at(&self, t: usize) -> Vec<f64> {
        self.values.row(t).iter().copied().collect()
    }

    pub fn interior_at(&self, t: usize, n_interior: usize) -> DVector<f64> {
        DVector::from_iterator(n_interior, self.values.row(t).iter().take(n_interior).copied())
    }

    /// Boundary values for `times`, vectorized time-major.
    pub fn boundary_window(&self, n_interior: usize, times: std::ops::Range<usize>) -> DVector<f64> {
        let nb = self.values.ncols() - n_interior;
        let mut out = DVector::zeros(times.len() * nb);
        for (k, t) in times.enumerate() {
            for z in 0..nb {
                out[k * nb + z] = self.values[(t, n_interior + z)];
            }
        }
        out
    }
}

/// Stepper bound to one graph. Requires every boundary vertex to have a
/// single interior neighbour.
pub struct WaveSolver<'a> {
    g: &'a WeightedGraph,
    info: BoundaryInfo,
}

impl<'a> WaveSolver<'a> {
    pub fn new(g: &'a WeightedGraph) -> Result<Self> {
        Ok(Self { g, info: g.boundary_info()? })
    }

    pub fn boundary_info(&self) -> &BoundaryInfo {
        &self.info
    }

    fn laplacian_at(&self, u: &[f64], x: usize) -> f64 {
        self.g.neighbors(x).iter().map(|&(y, w)| w * (u[y] - u[x])).sum::<f64>() / self.g.mu()[x]
    }

    /// Boundary values from Neumann data: u(z) = u(x_z) - μ_z f(z) / w(x_z, z).
    fn set_boundary(&self, u: &mut [f64], f: Option<nalgebra::DMatrixView<'_, f64>>) {
        let ni = self.g.n_interior();
        for z in 0..self.info.n_boundary() {
            let flux = f.as_ref().map_or(0.0, |f| f[(0, z)]);
            u[ni + z] = u[self.info.neighbor[z]] - self.info.mu[z] * flux / self.info.weight[z];
        }
    }

    /// Forward solve with u(0) = 0 and u(1)|_G = `u1`, driven by `f`.
    pub fn solve_with_initial(&self, u1: &[f64], f: &SpaceTimeBoundaryField) -> Result<WaveField> {
        let (ni, n) = (self.g.n_interior(), self.g.n_vertices());
        if f.n_boundary() != self.info.n_boundary() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} boundary columns, graph has {}",
                f.n_boundary(),
                self.info.n_boundary()
            )));
        }
        if u1.len() != ni {
            return Err(Error::DimensionMismatch(format!("initial data of length {} for {ni} interior vertices", u1.len())));
        }
        let f0 = f.values.row(0).amax();
        if f0 != 0.0 {
            return Err(Error::IncompatibleInitialData(f0));
        }
        let nt = 2 * f.horizon() + 1;
        let mut u = DMatrix::zeros(nt, n);
        let mut prev = vec![0.0; n];
        let mut cur = vec![0.0; n];
        cur[..ni].copy_from_slice(u1);
        self.set_boundary(&mut cur, Some(f.values.rows(1, 1)));
        u.row_mut(1).copy_from_slice(&cur);
        for t in 1..nt - 1 {
            let mut next = vec![0.0; n];
            for x in 0..ni {
                next[x] = 2.0 * cur[x] - prev[x] + self.laplacian_at(&cur, x);
            }
            self.set_boundary(&mut next, Some(f.values.rows(t + 1, 1)));
            u.row_mut(t + 1).copy_from_slice(&next);
            prev = cur;
            cur = next;
        }
        Ok(WaveField { values: u })
    }

    pub fn solve(&self, f: &SpaceTimeBoundaryField) -> Result<WaveField> {
        self.solve_with_initial(&vec![0.0; self.g.n_interior()], f)
    }

    /// Backward solve from v(T) = 0, v(T-1)|_G = -g with zero Neumann data.
    /// Returns rows t = 0..=T.
    pub fn solve_reversed(&self, gfun: &[f64], horizon: usize) -> Result<WaveField> {
        let (ni, n) = (self.g.n_interior(), self.g.n_vertices());
        if gfun.len() != ni {
            return Err(Error::DimensionMismatch(format!("g has {} entries, graph has {ni} interior vertices", gfun.len())));
        }
        if horizon == 0 {
            return Err(Error::HorizonTooSmall(0));
        }
        let mut v = DMatrix::zeros(horizon + 1, n);
        let mut later = vec![0.0; n];
        let mut cur = vec![0.0; n];
        for x in 0..ni {
            cur[x] = -gfun[x];
        }
        self.set_boundary(&mut cur, None);
        v.row_mut(horizon - 1).copy_from_slice(&cur);
        for t in (1..horizon).rev() {
            let mut earlier = vec![0.0; n];
            for x in 0..ni {
                earlier[x] = 2.0 * cur[x] - later[x] + self.laplacian_at(&cur, x);
            }
            self.set_boundary(&mut earlier, None);
            v.row_mut(t - 1).copy_from_slice(&earlier);
            later = cur;
            cur = earlier;
        }
        Ok(WaveField { values: v })
    }
}

pub fn solve_ibvp(g: &WeightedGraph, f: &SpaceTimeBoundaryField, horizon: usize) -> Result<WaveField> {
    if f.horizon() != horizon {
        return Err(Error::DimensionMismatch(format!("field horizon {} but T = {horizon}", f.horizon())));
    }
    WaveSolver::new(g)?.solve(f)
}

pub fn solve_reversed(g: &WeightedGraph, gfun: &[f64], horizon: usize) -> Result<WaveField> {
    WaveSolver::new(g)?.solve_reversed(gfun, horizon)
}

/// Dense ND map on vectorized fields over t = 0..=2T.
#[derive(Debug, Clone, PartialEq)]
pub struct NdMap {
    pub n_boundary: usize,
    pub horizon: usize,
    pub matrix: DMatrix<f64>,
    pub ordering_hash: String,
}

impl NdMap {
    pub fn n_times(&self) -> usize {
        2 * self.horizon + 1
    }

    pub fn apply(&self, f: &SpaceTimeBoundaryField) -> Result<SpaceTimeBoundaryField> {
        if f.horizon() != self.horizon || f.n_boundary() != self.n_boundary {
            return Err(Error::DimensionMismatch("field does not match ND map".into()));
        }
        SpaceTimeBoundaryField::from_vector(self.horizon, self.n_boundary, &(&self.matrix * f.to_vector()))
    }

    /// Entry for output (t, z) and input (s, z2).
    pub fn entry(&self, t: usize, z: usize, s: usize, z2: usize) -> f64 {
        self.matrix[(t * self.n_boundary + z, s * self.n_boundary + z2)]
    }
}

/// Drive the solver with every space-time unit impulse.
pub fn simulate_nd(g: &WeightedGraph, horizon: usize) -> Result<NdMap> {
    let solver = WaveSolver::new(g)?;
    let (ni, nb) = (g.n_interior(), g.n_boundary());
    let nt = 2 * horizon + 1;
    let mut m = DMatrix::zeros(nt * nb, nt * nb);
    // t = 0 impulses are incompatible data; their columns stay zero
    for s in 1..nt {
        for z in 0..nb {
            let u = solver.solve(&SpaceTimeBoundaryField::impulse(horizon, nb, s, z))?;
            m.column_mut(s * nb + z).copy_from(&u.boundary_window(ni, 0..nt));
        }
    }
    Ok(NdMap { n_boundary: nb, horizon, matrix: m, ordering_hash: solver.info.ordering_hash() })
}

/// W: boundary control on the window {1..T-1} to the interior state at T.
/// Column `(t-1) * |∂G| + z` is the response to a unit impulse at (t, z).
pub fn control_map_matrix(g: &WeightedGraph, horizon: usize) -> Result<DMatrix<f64>> {
    let solver = WaveSolver::new(g)?;
    let (ni, nb) = (g.n_interior(), g.n_boundary());
    let window = horizon.saturating_sub(1);
    let mut w = DMatrix::zeros(ni, window * nb);
    for t in 1..horizon {
        for z in 0..nb {
            let u = solver.solve(&SpaceTimeBoundaryField::impulse(horizon, nb, t, z))?;
            w.column_mut((t - 1) * nb + z).copy_from(&u.interior_at(horizon, ni));
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniqueContinuationReport {
    pub horizon: usize,
    pub max_level: usize,
    pub n_interior: usize,
    pub rank: usize,
    pub rel_tol: f64,
    pub sigma_max: f64,
    pub smallest_retained: f64,
    pub singular_values: Vec<f64>,
    pub horizon_below_max_level: bool,
    pub full_rank: bool,
}

/// Rank of the control map at `rel_tol * σ_max`.
pub fn check_unique_continuation(g: &WeightedGraph, horizon: usize, rel_tol: f64) -> Result<UniqueContinuationReport> {
    let w = control_map_matrix(g, horizon)?;
    let max_level = compute_levels(g).max_level();
    let mut sv: Vec<f64> = if w.ncols() == 0 {
        Vec::new()
    } else {
        w.svd(false, false).singular_values.iter().copied().collect()
    };
    sv.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let retained: Vec<f64> = sv.iter().copied().filter(|&s| s > rel_tol * sigma_max && s > 0.0).collect();
    Ok(UniqueContinuationReport {
        horizon,
        max_level,
        n_interior: g.n_interior(),
        rank: retained.len(),
        rel_tol,
        sigma_max,
        smallest_retained: retained.last().copied().unwrap_or(0.0),
        singular_values: sv,
        horizon_below_max_level: horizon < max_level,
        full_rank: retained.len() == g.n_interior(),
    })
}

const ND_MAGIC: &str = "bcgraph-ndmap 1";

pub fn write_nd<W: Write>(nd: &NdMap, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{ND_MAGIC}")?;
    writeln!(out, "boundary {} horizon {} hash {}", nd.n_boundary, nd.horizon, nd.ordering_hash)?;
    for r in 0..nd.matrix.nrows() {
        let row: Vec<String> = nd.matrix.row(r).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_nd<R: BufRead>(input: R) -> Result<NdMap> {
    let perr = |line: usize, msg: String| Error::Parse { line, msg };
    let mut lines = input.lines().enumerate();
    let mut next = || -> Result<Option<(usize, String)>> {
        match lines.next() {
            Some((i, Ok(l))) => Ok(Some((i + 1, l))),
            Some((i, Err(e))) => Err(perr(i + 1, e.to_string())),
            None => Ok(None),
        }
    };
    match next()? {
        Some((_, l)) if l.trim() == ND_MAGIC => {}
        _ => return Err(perr(1, "bad header".into())),
    }
    let (i, l) = next()?.ok_or_else(|| perr(2, "missing size line".into()))?;
    let (nb, horizon, hash) = match l.split_whitespace().collect::<Vec<_>>()[..] {
        ["boundary", nb, "horizon", t, "hash", h] => (
            nb.parse::<usize>().map_err(|_| perr(i, "bad boundary count".into()))?,
            t.parse::<usize>().map_err(|_| perr(i, "bad horizon".into()))?,
            h.to_string(),
        ),
        _ => return Err(perr(i, "expected `boundary <nb> horizon <T> hash <h>`".into())),
    };
    let n = (2 * horizon + 1) * nb;
    let mut m = DMatrix::zeros(n, n);
    for r in 0..n {
        let (i, l) = next()?.ok_or_else(|| perr(0, "unexpected end of file".into()))?;
        let vals: Vec<&str> = l.split_whitespace().collect();
        if vals.len() != n {
            return Err(perr(i, format!("row has {} entries, expected {n}", vals.len())));
        }
        for (c, v) in vals.iter().enumerate() {
            m[(r, c)] = v.parse().map_err(|_| perr(i, format!("bad number `{v}`")))?;
        }
    }
    Ok(NdMap { n_boundary: nb, horizon, matrix: m, ordering_hash: hash })
}
