//! Interior weight recovery: products of harmonic functions, independent
//! pair selection, the linear system for μ|_G, noise and error metrics.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::{
    trace_operators, window_weights, wstar_w, ControlOperators, ControlSolver, WstarApplier,
};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::laplacian::{HarmonicBasis, SpectralData};
use crate::wave::NdMap;

pub const DEFAULT_CONTROL_THRESHOLD: f64 = 1e-12;
pub const DEFAULT_PRODUCT_RANK_TOL: f64 = 1e-8;
pub const DEFAULT_FINAL_THRESHOLD: f64 = 1e-12;

/// Pairwise products φ^(j) ⊙ φ^(k), j <= k, of the harmonic basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductsMatrix {
    /// |G| x |∂G|(|∂G|+1)/2, columns in lexicographic (j, k) order.
    pub interior: DMatrix<f64>,
    pub pairs: Vec<(usize, usize)>,
    /// Singular values of `interior`, descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub rank_tol: f64,
    /// Rank of the same products taken over all vertices; boundary rows are
    /// δ_j ⊙ δ_k.
    pub full_vertex_rank: usize,
    // left singular vectors spanning the column space
    basis: DMatrix<f64>,
}

impl ProductsMatrix {
    pub fn n_columns(&self) -> usize {
        self.pairs.len()
    }

    pub fn column_index(&self, j: usize, k: usize) -> Option<usize> {
        let (j, k) = if j <= k { (j, k) } else { (k, j) };
        self.pairs.binary_search(&(j, k)).ok()
    }
}

fn rank_of(sv: &[f64], tol: f64) -> usize {
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > tol * top && s > 0.0).count()
}

pub fn products_matrix(basis: &HarmonicBasis, rank_tol: f64) -> ProductsMatrix {
    let hv = &basis.interior_values;
    let (ni, nb) = hv.shape();
    let pairs: Vec<(usize, usize)> = (0..nb).flat_map(|j| (j..nb).map(move |k| (j, k))).collect();
    let interior = DMatrix::from_fn(ni, pairs.len(), |x, c| {
        let (j, k) = pairs[c];
        hv[(x, j)] * hv[(x, k)]
    });
    let mut full = DMatrix::zeros(ni + nb, pairs.len());
    full.view_mut((0, 0), (ni, pairs.len())).copy_from(&interior);
    for (c, &(j, k)) in pairs.iter().enumerate() {
        if j == k {
            full[(ni + j, c)] = 1.0;
        }
    }
    let full_sv: Vec<f64> = full.svd(false, false).singular_values.iter().copied().collect();

    let svd = interior.clone().svd(true, false);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let rank = rank_of(&singular_values, rank_tol);
    let u = svd.u.expect("requested");
    let basis_cols = DMatrix::from_fn(ni, rank, |x, c| u[(x, order[c])]);
    ProductsMatrix {
        interior,
        pairs,
        singular_values,
        rank,
        rank_tol,
        full_vertex_rank: rank_of(&full_sv, rank_tol),
        basis: basis_cols,
    }
}

/// Greedy column-pivoted Gram-Schmidt on the interior products. A column is
/// accepted while its residual norm exceeds `tol` times the first pivot's norm.
pub fn select_independent(pm: &ProductsMatrix, tol: f64) -> Vec<usize> {
    let mut a = pm.interior.clone();
    let n = a.ncols();
    let mut norms: Vec<f64> = (0..n).map(|c| a.column(c).norm_squared()).collect();
    let mut selected = Vec::new();
    let mut reference = None;
    for _ in 0..a.nrows().min(n) {
        let (c, &best) = norms
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1).then(y.0.cmp(&x.0)))
            .expect("nonempty");
        let nv = best.sqrt();
        let r = *reference.get_or_insert(nv);
        if !(nv > tol * r) || nv == 0.0 {
            break;
        }
        let q = a.column(c) / nv;
        // two passes keep the remaining columns orthogonal to q
        for _ in 0..2 {
            let proj = q.transpose() * &a;
            a -= &q * proj;
        }
        selected.push(c);
        for (i, v) in norms.iter_mut().enumerate() {
            *v = if selected.contains(&i) { 0.0 } else { a.column(i).norm_squared() };
        }
    }
    selected
}

/// Euclidean projection of `mu_int` onto the column space of the products.
/// This is what the data determine: they fix ⟨μ, m⟩ for every m in that span.
pub fn project_onto_m(mu_int: &[f64], pm: &ProductsMatrix) -> Result<Vec<f64>> {
    if mu_int.len() != pm.interior.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "weight vector has length {}, graph has {} interior vertices",
            mu_int.len(),
            pm.interior.nrows()
        )));
    }
    let m = DVector::from_column_slice(mu_int);
    let p = &pm.basis * (pm.basis.transpose() * m);
    Ok(p.iter().copied().collect())
}

/// Multiplicative Gaussian noise, one independent draw per eigenvalue and per
/// trace entry. `sigma` is a fraction (0.001 = 0.1 %).
pub fn add_noise(spec: &SpectralData, sigma: f64, seed: u64) -> Result<SpectralData> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be a finite value >= 0")));
    }
    if sigma == 0.0 {
        return Ok(spec.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma checked");
    let mut out = spec.clone();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(0);
    for l in out.eigenvalues.iter_mut() {
        *l *= 1.0 + normal.sample(&mut rng);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(1);
    // column-major: trace entries of eigenfunction j are drawn together
    for v in out.boundary_traces.iter_mut() {
        *v *= 1.0 + normal.sample(&mut rng);
    }
    Ok(out)
}

/// ‖A - B‖_F / ‖A‖_F in percent.
pub fn frne(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let den = a.norm();
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((a - b).norm() / den * 100.0)
}

/// ‖v - v'‖₂ / ‖v‖₂ in percent.
pub fn l2rne(v: &[f64], v_rec: &[f64]) -> Result<f64> {
    if v.len() != v_rec.len() {
        return Err(Error::DimensionMismatch(format!("lengths {} and {}", v.len(), v_rec.len())));
    }
    let den = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num = v.iter().zip(v_rec).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(num / den * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Relative singular-value cutoff for the W*W solve.
    pub control: f64,
    /// Relative tolerance for product ranks and pair selection.
    pub product_rank: f64,
    /// Relative cutoff for the final solve. `None` uses elimination when the
    /// selected system is square and nonsingular, else the default cutoff.
    pub final_solve: Option<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { control: DEFAULT_CONTROL_THRESHOLD, product_rank: DEFAULT_PRODUCT_RANK_TOL, final_solve: None }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !ok(self.control) || !ok(self.product_rank) || !self.final_solve.is_none_or(ok) {
            return Err(Error::InvalidParameter(format!("thresholds must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconstructionStatus {
    /// The products span l²(G); μ|_G is determined.
    Full,
    /// Only the projection of μ|_G onto the products' span is determined.
    ProjectionOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalSolver {
    Elimination,
    TruncatedSvd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub mu: Vec<f64>,
    pub status: ReconstructionStatus,
    pub solver: FinalSolver,
    pub selected_pairs: Vec<(usize, usize)>,
    pub products: ProductsMatrix,
    pub control_rank: usize,
    /// Singular values of the symmetrized W*W, descending.
    pub control_singular_values: Vec<f64>,
    pub final_rank: usize,
    /// Gram values (ψ_j, φ_k)_G recovered from boundary data, |∂G| x |∂G|.
    pub inner_products: DMatrix<f64>,
    /// Control h₀^(j) as columns.
    pub controls: DMatrix<f64>,
    pub negative_vertices: Vec<usize>,
}

/// Recover μ|_G from the ND map. `g` supplies topology, w and μ|_∂G; its
/// interior weights are not read.
pub fn reconstruct_mu(
    nd: &NdMap,
    g: &WeightedGraph,
    basis: &HarmonicBasis,
    ops: &ControlOperators,
    th: &Thresholds,
) -> Result<Reconstruction> {
    th.validate()?;
    let (ni, nb) = (g.n_interior(), g.n_boundary());
    if basis.interior_values.shape() != (ni, nb) {
        return Err(Error::DimensionMismatch(format!(
            "harmonic basis is {:?}, graph has ({ni}, {nb})",
            basis.interior_values.shape()
        )));
    }
    let info = g.boundary_info()?;
    if nd.ordering_hash != info.ordering_hash() {
        return Err(Error::DimensionMismatch("ND map was built for a different boundary ordering".into()));
    }
    let traces = trace_operators(&info);
    let applier = WstarApplier::new(nd, ops, &traces)?;
    let ws = applier.apply(g, &basis.full_matrix())?;

    let k = wstar_w(nd, ops)?;
    let weights = window_weights(g.mu_boundary(), ops.horizon);
    let solver = ControlSolver::new(&k, &weights, th.control)?;
    let controls = solver.solve_many(&ws);
    // (h₀^(j), W*φ^(k)) in the μ_∂-weighted window product
    let weighted_ws = DMatrix::from_fn(ws.nrows(), nb, |i, c| weights[i] * ws[(i, c)]);
    let inner_products = controls.transpose() * weighted_ws;

    let products = products_matrix(basis, th.product_rank);
    let selected = select_independent(&products, th.product_rank);
    let selected_pairs: Vec<(usize, usize)> = selected.iter().map(|&c| products.pairs[c]).collect();
    let a = DMatrix::from_fn(selected.len(), ni, |r, x| products.interior[(x, selected[r])]);
    let b = DVector::from_fn(selected.len(), |r, _| {
        let (j, k) = selected_pairs[r];
        inner_products[(j, k)]
    });

    let square = selected.len() == ni;
    let mut solved = None;
    if square && th.final_solve.is_none() {
        if let Some(x) = a.clone().lu().solve(&b) {
            if x.iter().all(|v| v.is_finite()) {
                solved = Some((x, FinalSolver::Elimination, ni));
            }
        }
    }
    let (x, solver_kind, final_rank) = match solved {
        Some(s) => s,
        None => {
            let (x, r) = tsvd_solve(&a, &b, th.final_solve.unwrap_or(DEFAULT_FINAL_THRESHOLD));
            (x, FinalSolver::TruncatedSvd, r)
        }
    };
    // truncation by an explicit final cutoff is regularization, not a rank deficit
    let status = if square { ReconstructionStatus::Full } else { ReconstructionStatus::ProjectionOnly };
    let mu: Vec<f64> = x.iter().copied().collect();
    let negative_vertices = (0..ni).filter(|&i| !(mu[i] > 0.0)).collect();
    Ok(Reconstruction {
        mu,
        status,
        solver: solver_kind,
        selected_pairs,
        control_rank: solver.rank(),
        control_singular_values: solver.singular_values(),
        products,
        final_rank,
        inner_products,
        controls,
        negative_vertices,
    })
}

/// Minimum-norm least squares, singular values below `rel * σ_max` dropped.
fn tsvd_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel: f64) -> (DVector<f64>, usize) {
    if a.nrows() == 0 {
        return (DVector::zeros(a.ncols()), 0);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested");
    let v_t = svd.v_t.as_ref().expect("requested");
    let top = svd.singular_values.max();
    let mut x = DVector::zeros(a.ncols());
    let mut r = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > rel * top && s > 0.0 {
            let c = u.column(i).dot(b) / s;
            x += v_t.row(i).transpose() * c;
            r += 1;
        }
    }
    (x, r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranks {
    pub rank_delta_g: usize,
    pub harmonic_dim: usize,
    pub independent_products: usize,
    pub products_rank: usize,
    pub full_vertex_products_rank: usize,
    pub control_rank: usize,
    pub final_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub graph_hash: String,
    pub horizon: usize,
    pub sigma: f64,
    pub seed: u64,
    pub thresholds: Thresholds,
    pub status: ReconstructionStatus,
    pub solver: FinalSolver,
    pub mu_rec: Vec<f64>,
    pub mu_true: Option<Vec<f64>>,
    pub abs_err: Option<Vec<f64>>,
    pub l2rne: Option<f64>,
    /// L2RNE against the projection onto the products' span.
    pub projection_l2rne: Option<f64>,
    pub frne_nd: Option<f64>,
    pub frne_wstar_w: Option<f64>,
    pub ranks: Ranks,
    pub negative_vertices: Vec<usize>,
    pub warnings: Vec<String>,
}
