//! ND map assembled from Neumann eigenvalues and boundary traces.
//!
//! Projecting the wave onto the j-th eigenfunction gives a scalar three-term
//! recurrence a(t+1) = (2 - λ_j) a(t) - a(t-1) - (f(t), φ_j)_∂G, whose impulse
//! response is the coefficient sequence c_k(λ_j).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::BoundaryInfo;
use crate::laplacian::SpectralData;
use crate::wave::{NdMap, SpaceTimeBoundaryField};

/// `c_k(λ_j)` for k = 1..=len, stored with a zero column 0 so indices match.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub coeffs: DMatrix<f64>,
}

impl CoefficientTable {
    pub fn len(&self) -> usize {
        self.coeffs.ncols() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn c(&self, j: usize, k: usize) -> f64 {
        self.coeffs[(j, k)]
    }
}

/// c_1 = 0, c_2 = -1, c_k = (2 - λ_j) c_{k-1} - c_{k-2}.
pub fn ck_table(eigenvalues: &DVector<f64>, len: usize) -> CoefficientTable {
    let n = eigenvalues.len();
    let mut c = DMatrix::zeros(n, len + 1);
    for j in 0..n {
        if len >= 2 {
            c[(j, 2)] = -1.0;
        }
        for k in 3..=len {
            c[(j, k)] = (2.0 - eigenvalues[j]) * c[(j, k - 1)] - c[(j, k - 2)];
        }
    }
    CoefficientTable { coeffs: c }
}

fn check_inputs(spec: &SpectralData, info: &BoundaryInfo) -> Result<()> {
    let nb = info.n_boundary();
    if spec.n_boundary() != nb {
        return Err(Error::DimensionMismatch(format!(
            "spectral traces cover {} boundary vertices, boundary info {}",
            spec.n_boundary(),
            nb
        )));
    }
    if spec.boundary_traces.ncols() != spec.n_eigen() {
        return Err(Error::DimensionMismatch("trace columns do not match eigenvalue count".into()));
    }
    if info.weight.len() != nb || info.neighbor.len() != nb {
        return Err(Error::MissingBoundaryEdgeWeight(info.weight.len().min(info.neighbor.len())));
    }
    if let Some(z) = info.weight.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::MissingBoundaryEdgeWeight(z));
    }
    Ok(())
}

/// Dense ND map over t = 0..=2T from spectral data and the known boundary
/// weights. Output (t, z), input (s, z2):
/// Σ_j c_{t+1-s}(λ_j) μ_{z2} φ_j(z2) φ_j(z) for 1 <= s <= t, minus
/// μ_z / w(x_z, z) when s = t and z = z2.
pub fn nd_from_spectra(spec: &SpectralData, info: &BoundaryInfo, horizon: usize) -> Result<NdMap> {
    check_inputs(spec, info)?;
    let nb = info.n_boundary();
    let nt = 2 * horizon + 1;
    let phi = &spec.boundary_traces;
    let table = ck_table(&spec.eigenvalues, 2 * horizon);
    let phi_mu = DMatrix::from_fn(nb, spec.n_eigen(), |z, j| info.mu[z] * phi[(z, j)]);

    // blocks[k] = Φ diag(c_k) (diag(μ) Φ)ᵀ
    let blocks: Vec<DMatrix<f64>> = (0..=2 * horizon)
        .map(|k| {
            if k == 0 {
                return DMatrix::zeros(nb, nb);
            }
            let mut scaled = phi.clone();
            for (j, mut col) in scaled.column_iter_mut().enumerate() {
                col *= table.c(j, k);
            }
            scaled * phi_mu.transpose()
        })
        .collect();

    let mut m = DMatrix::zeros(nt * nb, nt * nb);
    for t in 1..nt {
        for s in 1..=t {
            m.view_mut((t * nb, s * nb), (nb, nb)).copy_from(&blocks[t + 1 - s]);
        }
        for z in 0..nb {
            m[(t * nb + z, t * nb + z)] -= info.mu[z] / info.weight[z];
        }
    }
    Ok(NdMap { n_boundary: nb, horizon, matrix: m, ordering_hash: info.ordering_hash() })
}

/// a_j(t) = Σ_{s=1}^{t} c_{t+1-s}(λ_j) (f(s), φ_j)_∂G, the μ-weighted
/// projection of the wave at time t onto the j-th eigenfunction.
pub fn project_aj(spec: &SpectralData, info: &BoundaryInfo, f: &SpaceTimeBoundaryField, t: usize) -> Result<DVector<f64>> {
    check_inputs(spec, info)?;
    if f.n_boundary() != info.n_boundary() {
        return Err(Error::DimensionMismatch("field does not match boundary".into()));
    }
    if t > 2 * f.horizon() {
        return Err(Error::DimensionMismatch(format!("t = {t} beyond 2T = {}", 2 * f.horizon())));
    }
    let n = spec.n_eigen();
    let table = ck_table(&spec.eigenvalues, t.max(1));
    let mut a = DVector::zeros(n);
    for s in 1..=t {
        for j in 0..n {
            let proj: f64 = (0..info.n_boundary())
                .map(|z| info.mu[z] * f.get(s, z) * spec.boundary_traces[(z, j)])
                .sum();
            a[j] += table.c(j, t + 1 - s) * proj;
        }
    }
    Ok(a)
}

/// Index ranges of eigenvalues whose consecutive gaps are below `gap`.
pub fn eigen_clusters(eigenvalues: &DVector<f64>, gap: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for j in 1..=eigenvalues.len() {
        if j == eigenvalues.len() || eigenvalues[j] - eigenvalues[j - 1] >= gap {
            out.push(start..j);
            start = j;
        }
    }
    out
}

/// Apply a random orthogonal rotation inside every cluster of (nearly) equal
/// eigenvalues. Returns the rotated data and the number of clusters of size > 1.
pub fn remix_degenerate<R: Rng + ?Sized>(spec: &SpectralData, gap: f64, rng: &mut R) -> (SpectralData, usize) {
    let mut out = spec.clone();
    let mut mixed = 0;
    for r in eigen_clusters(&spec.eigenvalues, gap) {
        let k = r.len();
        if k < 2 {
            continue;
        }
        mixed += 1;
        let gauss = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = gauss.qr().q();
        let block = spec.boundary_traces.columns(r.start, k) * &q;
        out.boundary_traces.columns_mut(r.start, k).copy_from(&block);
        if let (Some(src), Some(dst)) = (&spec.full_eigenfunctions, &mut out.full_eigenfunctions) {
            let block = src.columns(r.start, k) * &q;
            dst.columns_mut(r.start, k).copy_from(&block);
        }
    }
    (out, mixed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_hex, generate_rect, symmetric_star_graph, EdgeRule, VertexRule};
    use crate::laplacian::neumann_eigs;
    use crate::wave::{simulate_nd, solve_ibvp};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_coefficients() {
        let lam = DVector::from_column_slice(&[0.0, 0.3, 2.5]);
        let t = ck_table(&lam, 8);
        for j in 0..3 {
            assert_eq!(t.c(j, 1), 0.0);
            assert_eq!(t.c(j, 2), -1.0);
            assert_eq!(t.c(j, 3), lam[j] - 2.0);
            for k in 3..=8 {
                assert_eq!(t.c(j, k), (2.0 - lam[j]) * t.c(j, k - 1) - t.c(j, k - 2));
            }
        }
        // λ = 0: linear growth
        for k in 1..=8 {
            assert_eq!(t.c(0, k), -((k - 1) as f64));
        }
    }

    #[test]
    fn zero_traces_leave_instantaneous_term() {
        let g = generate_rect(3, 2, EdgeRule::MeanDegree, VertexRule::Trig).unwrap();
        let info = g.boundary_info().unwrap();
        let mut spec = neumann_eigs(&g).unwrap();
        spec.boundary_traces.fill(0.0);
        let nd = nd_from_spectra(&spec, &info, 2).unwrap();
        let nb = info.n_boundary();
        let mut want = DMatrix::zeros(nd.matrix.nrows(), nd.matrix.ncols());
        for i in nb..want.nrows() {
            want[(i, i)] = -info.mu[i % nb] / info.weight[i % nb];
        }
        assert_eq!(nd.matrix, want);
    }

    #[test]
    fn matches_simulation() {
        for g in [
            generate_rect(4, 3, EdgeRule::Constant(0.25), VertexRule::Degree).unwrap(),
            generate_hex(3, 2, EdgeRule::Constant(0.3), VertexRule::Trig).unwrap(),
        ] {
            let t = 4;
            let sim = simulate_nd(&g, t).unwrap();
            let spec = neumann_eigs(&g).unwrap().boundary_only();
            let nd = nd_from_spectra(&spec, &g.boundary_info().unwrap(), t).unwrap();
            assert_eq!(nd.ordering_hash, sim.ordering_hash);
            let rel = (&nd.matrix - &sim.matrix).norm() / sim.matrix.norm();
            assert!(rel < 1e-12, "{rel}");
        }
    }

    #[test]
    fn aj_against_simulation() {
        // λ_max < 4 keeps the simulated oracle free of amplified roundoff
        let g = generate_rect(4, 3, EdgeRule::Constant(0.4), VertexRule::Degree).unwrap();
        let info = g.boundary_info().unwrap();
        let spec = neumann_eigs(&g).unwrap();
        let phi = spec.full_eigenfunctions.clone().unwrap();
        let t = 3;
        let nb = g.n_boundary();
        let mut f = SpaceTimeBoundaryField::zeros(t, nb);
        for s in 1..=2 * t {
            for z in 0..nb {
                f.set(s, z, ((s * 7 + z * 3) as f64).sin());
            }
        }
        let u = solve_ibvp(&g, &f, t).unwrap();
        for tt in 0..=2 * t {
            let a = project_aj(&spec, &info, &f, tt).unwrap();
            let ut = u.at(tt);
            for j in 0..spec.n_eigen() {
                let want: f64 = g.interior().map(|x| g.mu()[x] * ut[x] * phi[(x, j)]).sum();
                assert!((a[j] - want).abs() <= 1e-11 * (1.0 + want.abs()), "t={tt} j={j}");
            }
        }
        // hand values at t = 1, 2
        assert_eq!(project_aj(&spec, &info, &f, 1).unwrap().amax(), 0.0);
        let a2 = project_aj(&spec, &info, &f, 2).unwrap();
        for j in 0..spec.n_eigen() {
            let fp: f64 = (0..nb).map(|z| info.mu[z] * f.get(1, z) * spec.boundary_traces[(z, j)]).sum();
            assert_eq!(a2[j], -fp);
        }
    }

    #[test]
    fn remixing_degenerate_eigenspaces() {
        let g = symmetric_star_graph(5, 0.8, 1.3).unwrap();
        let info = g.boundary_info().unwrap();
        let spec = neumann_eigs(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mixed, clusters) = remix_degenerate(&spec, 1e-9, &mut rng);
        assert!(clusters >= 2);
        assert!((&mixed.boundary_traces - &spec.boundary_traces).amax() > 1e-3);
        let a = nd_from_spectra(&spec, &info, 4).unwrap();
        let b = nd_from_spectra(&mixed, &info, 4).unwrap();
        assert!((&a.matrix - &b.matrix).norm() / a.matrix.norm() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let g = generate_rect(3, 2, EdgeRule::MeanDegree, VertexRule::Trig).unwrap();
        let mut info = g.boundary_info().unwrap();
        let spec = neumann_eigs(&g).unwrap();
        info.weight[2] = 0.0;
        assert_eq!(nd_from_spectra(&spec, &info, 2), Err(Error::MissingBoundaryEdgeWeight(2)));
        info.weight.pop();
        info.mu.pop();
        info.neighbor.pop();
        assert!(matches!(nd_from_spectra(&spec, &info, 2), Err(Error::DimensionMismatch(_))));
    }
}
