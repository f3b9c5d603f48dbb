//! Boundary control from ND data: the operators R, J, P, the Gram operator
//! W*W, W* applied to harmonic functions, and the truncated-SVD control solve.
//!
//! Boundary fields on the control window {1..T-1} are vectorized time-major,
//! index `(t - 1) * |∂G| + z`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BoundaryInfo, WeightedGraph};
use crate::laplacian::harmonic_residual;
use crate::wave::NdMap;

/// Harmonicity tolerance for inputs to [`wstar_harmonic`].
pub const HARMONIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOperators {
    pub n_boundary: usize,
    pub horizon: usize,
    /// Time reversal t -> T - t on the window.
    pub r: DMatrix<f64>,
    /// (J u)(t) = Σ_{j=0}^{T-t-1} u(t + 1 + 2j).
    pub j: DMatrix<f64>,
    /// Restriction from {0..2T} to the window.
    pub p: DMatrix<f64>,
}

impl ControlOperators {
    pub fn window_len(&self) -> usize {
        (self.horizon - 1) * self.n_boundary
    }

    pub fn full_len(&self) -> usize {
        (2 * self.horizon + 1) * self.n_boundary
    }
}

pub fn build_operators(n_bnd: usize, horizon: usize) -> Result<ControlOperators> {
    if horizon < 2 {
        return Err(Error::HorizonTooSmall(horizon));
    }
    let nw = (horizon - 1) * n_bnd;
    let nf = (2 * horizon + 1) * n_bnd;
    let mut r = DMatrix::zeros(nw, nw);
    let mut j = DMatrix::zeros(nw, nf);
    let mut p = DMatrix::zeros(nw, nf);
    for t in 1..horizon {
        for z in 0..n_bnd {
            let row = (t - 1) * n_bnd + z;
            r[(row, (horizon - t - 1) * n_bnd + z)] = 1.0;
            p[(row, t * n_bnd + z)] = 1.0;
            for k in 0..horizon - t {
                j[(row, (t + 1 + 2 * k) * n_bnd + z)] = 1.0;
            }
        }
    }
    Ok(ControlOperators { n_boundary: n_bnd, horizon, r, j, p })
}

/// Dirichlet trace (O | I) and Neumann trace over all vertices. Only the
/// known boundary data enter.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceOperators {
    pub tau_d: DMatrix<f64>,
    pub tau_n: DMatrix<f64>,
}

pub fn trace_operators(info: &BoundaryInfo) -> TraceOperators {
    let (ni, nb) = (info.n_interior, info.n_boundary());
    let mut tau_d = DMatrix::zeros(nb, ni + nb);
    let mut tau_n = DMatrix::zeros(nb, ni + nb);
    for z in 0..nb {
        let c = info.weight[z] / info.mu[z];
        tau_d[(z, ni + z)] = 1.0;
        tau_n[(z, info.neighbor[z])] = c;
        tau_n[(z, ni + z)] = -c;
    }
    TraceOperators { tau_d, tau_n }
}

fn check_dims(nd: &NdMap, ops: &ControlOperators) -> Result<()> {
    if nd.n_boundary != ops.n_boundary || nd.horizon != ops.horizon {
        return Err(Error::DimensionMismatch(format!(
            "ND map is for (|∂G|, T) = ({}, {}), operators for ({}, {})",
            nd.n_boundary, nd.horizon, ops.n_boundary, ops.horizon
        )));
    }
    Ok(())
}

/// P Λ Pᵀ: the ND map seen only on the control window.
pub fn restricted_nd(nd: &NdMap, ops: &ControlOperators) -> Result<DMatrix<f64>> {
    check_dims(nd, ops)?;
    Ok(&ops.p * &nd.matrix * ops.p.transpose())
}

/// R Λ_T R J Pᵀ - J Λ Pᵀ.
pub fn wstar_w(nd: &NdMap, ops: &ControlOperators) -> Result<DMatrix<f64>> {
    let lt = restricted_nd(nd, ops)?;
    let pt = ops.p.transpose();
    let first = &ops.r * lt * &ops.r * &ops.j * &pt;
    let second = &ops.j * &nd.matrix * pt;
    Ok(first - second)
}

/// Applies W* to many harmonic functions against one ND map.
pub struct WstarApplier {
    // R Λ_T R J
    a: DMatrix<f64>,
    j: DMatrix<f64>,
    traces: TraceOperators,
    n_times: usize,
}

impl WstarApplier {
    pub fn new(nd: &NdMap, ops: &ControlOperators, traces: &TraceOperators) -> Result<Self> {
        let lt = restricted_nd(nd, ops)?;
        if traces.tau_d.nrows() != ops.n_boundary {
            return Err(Error::DimensionMismatch("trace operators do not match the boundary".into()));
        }
        Ok(Self { a: &ops.r * lt * &ops.r * &ops.j, j: ops.j.clone(), traces: traces.clone(), n_times: nd.n_times() })
    }

    fn tile(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let nb = v.nrows();
        DMatrix::from_fn(self.n_times * nb, v.ncols(), |i, c| v[(i % nb, c)])
    }

    /// W* φ for each column φ (values on all vertices), without the
    /// harmonicity check.
    pub fn apply_unchecked(&self, phis: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.tile(&(&self.traces.tau_n * phis));
        let d = self.tile(&(&self.traces.tau_d * phis));
        &self.a * n - &self.j * d
    }

    pub fn apply(&self, g: &WeightedGraph, phis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if phis.nrows() != g.n_vertices() || phis.nrows() != self.traces.tau_d.ncols() {
            return Err(Error::DimensionMismatch("harmonic functions must be given on all vertices".into()));
        }
        for c in 0..phis.ncols() {
            let col: Vec<f64> = phis.column(c).iter().copied().collect();
            let res = harmonic_residual(g, &col);
            if res > HARMONIC_TOL {
                return Err(Error::NotHarmonic(res));
            }
        }
        Ok(self.apply_unchecked(phis))
    }
}

/// W* φ = R Λ_T R J (1 ⊗ τ_N φ) - J (1 ⊗ τ_D φ) for a harmonic φ on all
/// vertices. Harmonicity is checked against `g`, whose interior weights are
/// irrelevant.
pub fn wstar_harmonic(
    nd: &NdMap,
    ops: &ControlOperators,
    traces: &TraceOperators,
    g: &WeightedGraph,
    phi: &DVector<f64>,
) -> Result<DVector<f64>> {
    let m = DMatrix::from_column_slice(phi.len(), 1, phi.as_slice());
    let out = WstarApplier::new(nd, ops, traces)?.apply(g, &m)?;
    Ok(out.column(0).into_owned())
}

/// μ_z repeated over the control window.
pub fn window_weights(mu_bnd: &[f64], horizon: usize) -> DVector<f64> {
    let nb = mu_bnd.len();
    DVector::from_fn(horizon.saturating_sub(1) * nb, |i, _| mu_bnd[i % nb])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSolution {
    pub h0: Vec<f64>,
    pub retained_rank: usize,
    pub residual_norm: f64,
    pub warning: Option<String>,
}

/// Truncated-SVD pseudo-inverse of W*W in the μ-weighted window inner
/// product. W*W is self-adjoint there, so S (W*W) S⁻¹ with S = diag(√μ) is
/// symmetric; its pseudo-inverse gives the minimum weighted-norm solution.
pub struct ControlSolver {
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v_t: DMatrix<f64>,
    sqrt_w: DVector<f64>,
    k: DMatrix<f64>,
    threshold: f64,
    rank: usize,
}

impl ControlSolver {
    pub fn new(wsw: &DMatrix<f64>, weights: &DVector<f64>, threshold: f64) -> Result<Self> {
        let n = wsw.nrows();
        if wsw.ncols() != n || weights.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "W*W is {}x{}, weights have length {}",
                wsw.nrows(),
                wsw.ncols(),
                weights.len()
            )));
        }
        if !(threshold >= 0.0) {
            return Err(Error::InvalidParameter(format!("threshold {threshold} must be >= 0")));
        }
        let sqrt_w = weights.map(f64::sqrt);
        let sym = DMatrix::from_fn(n, n, |i, j| sqrt_w[i] * wsw[(i, j)] / sqrt_w[j]);
        let svd = sym.svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > threshold * smax && s > 0.0).count();
        Ok(Self {
            u: svd.u.expect("requested"),
            sigma: svd.singular_values,
            v_t: svd.v_t.expect("requested"),
            sqrt_w,
            k: wsw.clone(),
            threshold,
            rank,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Singular values of the symmetrized operator, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.sigma.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn solve_many(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.sqrt_w.len();
        let scaled = DMatrix::from_fn(n, rhs.ncols(), |i, c| self.sqrt_w[i] * rhs[(i, c)]);
        let smax = self.sigma.max();
        let mut coeff = self.u.transpose() * scaled;
        for (i, mut row) in coeff.row_iter_mut().enumerate() {
            let s = self.sigma[i];
            if s > self.threshold * smax && s > 0.0 {
                row /= s;
            } else {
                row.fill(0.0);
            }
        }
        let h_tilde = self.v_t.transpose() * coeff;
        DMatrix::from_fn(n, rhs.ncols(), |i, c| h_tilde[(i, c)] / self.sqrt_w[i])
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> ControlSolution {
        let m = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
        let h = self.solve_many(&m).column(0).into_owned();
        let resid = &self.k * &h - rhs;
        let wnorm = resid.iter().zip(self.sqrt_w.iter()).map(|(r, s)| (r * s).powi(2)).sum::<f64>().sqrt();
        ControlSolution {
            h0: h.iter().copied().collect(),
            retained_rank: self.rank,
            residual_norm: wnorm,
            warning: (self.rank == 0).then(|| "no singular value above the threshold; h0 = 0".to_string()),
        }
    }
}

/// Minimum weighted-norm least-squares solution of (W*W) h = rhs with singular
/// values below `svd_threshold * σ_max` discarded.
pub fn solve_control(
    wsw: &DMatrix<f64>,
    rhs: &DVector<f64>,
    svd_threshold: f64,
    weights: &DVector<f64>,
) -> Result<ControlSolution> {
    Ok(ControlSolver::new(wsw, weights, svd_threshold)?.solve(rhs))
}
