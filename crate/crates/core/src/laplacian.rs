//! Matrix form of the graph Laplacian, the Neumann eigenproblem and harmonic
//! extension.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen, LU};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Blocks of `[Δ_G] = (Δ_GG | Δ_GB)` acting on functions over all vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrices {
    pub delta_gg: DMatrix<f64>,
    pub delta_gb: DMatrix<f64>,
    pub mu_int: DVector<f64>,
    pub mu_bnd: DVector<f64>,
}

pub fn assemble_laplacian(g: &WeightedGraph) -> LaplacianMatrices {
    let (ni, nb) = (g.n_interior(), g.n_boundary());
    let mut gg = DMatrix::zeros(ni, ni);
    let mut gb = DMatrix::zeros(ni, nb);
    for x in g.interior() {
        let mu = g.mu()[x];
        for &(y, w) in g.neighbors(x) {
            gg[(x, x)] -= w / mu;
            if g.is_interior(y) {
                gg[(x, y)] += w / mu;
            } else {
                gb[(x, y - ni)] += w / mu;
            }
        }
    }
    LaplacianMatrices {
        delta_gg: gg,
        delta_gb: gb,
        mu_int: DVector::from_column_slice(g.mu_interior()),
        mu_bnd: DVector::from_column_slice(g.mu_boundary()),
    }
}

impl LaplacianMatrices {
    pub fn n_interior(&self) -> usize {
        self.delta_gg.nrows()
    }

    pub fn n_boundary(&self) -> usize {
        self.delta_gb.ncols()
    }

    /// `[Δ_G]` as one |G| x |Ḡ| matrix.
    pub fn delta_g(&self) -> DMatrix<f64> {
        let (ni, nb) = (self.n_interior(), self.n_boundary());
        let mut m = DMatrix::zeros(ni, ni + nb);
        m.view_mut((0, 0), (ni, ni)).copy_from(&self.delta_gg);
        m.view_mut((0, ni), (ni, nb)).copy_from(&self.delta_gb);
        m
    }
}

/// The same weighted difference formula at every vertex. Rows of boundary
/// vertices are exactly the Neumann derivative.
pub fn full_laplacian(g: &WeightedGraph) -> DMatrix<f64> {
    let n = g.n_vertices();
    let mut m = DMatrix::zeros(n, n);
    for x in 0..n {
        let mu = g.mu()[x];
        for &(y, w) in g.neighbors(x) {
            m[(x, x)] -= w / mu;
            m[(x, y)] += w / mu;
        }
    }
    m
}

/// Δ_G u at the interior vertices.
pub fn apply_laplacian(g: &WeightedGraph, u: &[f64]) -> Vec<f64> {
    g.interior()
        .map(|x| g.neighbors(x).iter().map(|&(y, w)| w * (u[y] - u[x])).sum::<f64>() / g.mu()[x])
        .collect()
}

/// Neumann derivative ∂_ν u at each boundary vertex.
pub fn neumann_trace(g: &WeightedGraph, u: &[f64]) -> Vec<f64> {
    g.boundary()
        .map(|z| g.interior_neighbors(z).map(|(x, w)| w * (u[x] - u[z])).sum::<f64>() / g.mu()[z])
        .collect()
}

/// Scale-free harmonicity defect: max_x |Σ w (u(y)-u(x))| / max_x Σ w (|u(y)|+|u(x)|).
/// Independent of the interior vertex weights.
pub fn harmonic_residual(g: &WeightedGraph, u: &[f64]) -> f64 {
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for x in g.interior() {
        let (mut s, mut a) = (0.0, 0.0);
        for &(y, w) in g.neighbors(x) {
            s += w * (u[y] - u[x]);
            a += w * (u[y].abs() + u[x].abs());
        }
        num = num.max(s.abs());
        den = den.max(a);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// |∂G| x |G|, column j is the trace of the j-th eigenfunction.
    pub boundary_traces: DMatrix<f64>,
    /// |G| x |G| interior values, kept only for testing.
    pub full_eigenfunctions: Option<DMatrix<f64>>,
}

impl SpectralData {
    pub fn n_eigen(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_traces.nrows()
    }

    /// Drop the interior eigenfunctions, leaving only boundary data.
    pub fn boundary_only(mut self) -> Self {
        self.full_eigenfunctions = None;
        self
    }
}

/// -Δ restricted by the zero Neumann condition: with φ(z) = φ(x_z) the
/// boundary terms cancel, leaving the interior-only weighted Laplacian.
pub fn reduced_operator(g: &WeightedGraph) -> Result<DMatrix<f64>> {
    g.boundary_info()?;
    let ni = g.n_interior();
    let mut a = DMatrix::zeros(ni, ni);
    for x in g.interior() {
        let mu = g.mu()[x];
        for &(y, w) in g.neighbors(x) {
            if g.is_interior(y) {
                a[(x, x)] += w / mu;
                a[(x, y)] -= w / mu;
            }
        }
    }
    Ok(a)
}

pub fn neumann_eigs(g: &WeightedGraph) -> Result<SpectralData> {
    let info = g.boundary_info()?;
    let ni = g.n_interior();
    let s: Vec<f64> = g.mu_interior().iter().map(|m| m.sqrt()).collect();
    // D^{1/2} A D^{-1/2} is symmetric
    let mut sym = DMatrix::<f64>::zeros(ni, ni);
    for x in g.interior() {
        for &(y, w) in g.neighbors(x) {
            if g.is_interior(y) {
                sym[(x, x)] += w / (s[x] * s[x]);
                sym[(x, y)] -= w / (s[x] * s[y]);
            }
        }
    }
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..ni).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let mut lambda = DVector::<f64>::zeros(ni);
    let mut phi = DMatrix::<f64>::zeros(ni, ni);
    for (col, &k) in order.iter().enumerate() {
        // roundoff can push the zero eigenvalue slightly negative
        lambda[col] = eig.eigenvalues[k].max(0.0);
        let v = eig.eigenvectors.column(k);
        let big = v.amax();
        let pivot = v.iter().find(|c| c.abs() > 1e-8 * big).copied().unwrap_or(1.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for x in 0..ni {
            phi[(x, col)] = sign * v[x] / s[x];
        }
    }
    let nb = info.n_boundary();
    let mut traces = DMatrix::zeros(nb, ni);
    for z in 0..nb {
        traces.row_mut(z).copy_from(&phi.row(info.neighbor[z]));
    }
    Ok(SpectralData { eigenvalues: lambda, boundary_traces: traces, full_eigenfunctions: Some(phi) })
}

/// One LU factorization of Δ_GG reused for every harmonic extension.
pub struct HarmonicSolver {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    delta_gb: DMatrix<f64>,
}

impl HarmonicSolver {
    pub fn new(lap: &LaplacianMatrices) -> Result<Self> {
        let lu = lap.delta_gg.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::SingularSystem("interior Laplacian block".into()));
        }
        Ok(Self { lu, delta_gb: lap.delta_gb.clone() })
    }

    /// Interior values of the harmonic extensions of the columns of `boundary`.
    pub fn extend(&self, boundary: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let rhs = -(&self.delta_gb * boundary);
        self.lu
            .solve(&rhs)
            .ok_or_else(|| Error::SingularSystem("interior Laplacian block".into()))
    }
}

/// Harmonic function on all vertices with the given boundary values.
pub fn solve_harmonic(lap: &LaplacianMatrices, boundary_data: &DVector<f64>) -> Result<DVector<f64>> {
    if boundary_data.len() != lap.n_boundary() {
        return Err(Error::DimensionMismatch(format!(
            "boundary data has {} entries, graph has {} boundary vertices",
            boundary_data.len(),
            lap.n_boundary()
        )));
    }
    let solver = HarmonicSolver::new(lap)?;
    let b = DMatrix::from_column_slice(boundary_data.len(), 1, boundary_data.as_slice());
    let int = solver.extend(&b)?;
    Ok(DVector::from_iterator(
        int.nrows() + boundary_data.len(),
        int.iter().chain(boundary_data.iter()).copied(),
    ))
}

/// Harmonic extensions of the boundary indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicBasis {
    /// |G| x |∂G|, column j is the interior part of the j-th basis function.
    pub interior_values: DMatrix<f64>,
}

impl HarmonicBasis {
    pub fn dim(&self) -> usize {
        self.interior_values.ncols()
    }

    /// Basis function `j` on all vertices (interior ids first).
    pub fn full(&self, j: usize) -> DVector<f64> {
        let (ni, nb) = self.interior_values.shape();
        let mut v = DVector::zeros(ni + nb);
        v.rows_mut(0, ni).copy_from(&self.interior_values.column(j));
        v[ni + j] = 1.0;
        v
    }

    /// All basis functions as columns over all vertices.
    pub fn full_matrix(&self) -> DMatrix<f64> {
        let (ni, nb) = self.interior_values.shape();
        let mut m = DMatrix::zeros(ni + nb, nb);
        m.view_mut((0, 0), (ni, nb)).copy_from(&self.interior_values);
        m.view_mut((ni, 0), (nb, nb)).fill_with_identity();
        m
    }
}

pub fn harmonic_basis(lap: &LaplacianMatrices) -> Result<HarmonicBasis> {
    let nb = lap.n_boundary();
    let solver = HarmonicSolver::new(lap)?;
    Ok(HarmonicBasis { interior_values: solver.extend(&DMatrix::identity(nb, nb))? })
}

/// Numerical rank: singular values above `rel_tol * σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    sv.iter().filter(|&&s| s > rel_tol * top && s > 0.0).count()
}

const SPECTRAL_MAGIC: &str = "bcgraph-spectral 1";

pub fn write_spectral<W: Write>(s: &SpectralData, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{SPECTRAL_MAGIC}")?;
    writeln!(out, "sizes {} {}", s.n_eigen(), s.n_boundary())?;
    writeln!(out, "eigenvalues")?;
    for l in s.eigenvalues.iter() {
        writeln!(out, "{l:.16e}")?;
    }
    writeln!(out, "traces")?;
    for z in 0..s.n_boundary() {
        let row: Vec<String> = s.boundary_traces.row(z).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_spectral<R: BufRead>(input: R) -> Result<SpectralData> {
    let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
    let lines: Vec<(usize, String)> = input
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(|e| perr(i + 1, &e.to_string())))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .collect();
    let mut it = lines.iter();
    let mut next = |what: &str| it.next().ok_or_else(|| perr(0, &format!("unexpected end of file, expected {what}")));
    let parse = |line: usize, tok: &str| tok.parse::<f64>().map_err(|_| perr(line, &format!("bad number `{tok}`")));

    let (i, l) = next("header")?;
    if l.trim() != SPECTRAL_MAGIC {
        return Err(perr(*i, "bad header"));
    }
    let (i, l) = next("sizes")?;
    let t: Vec<&str> = l.split_whitespace().collect();
    let (ng, nb) = match t[..] {
        ["sizes", a, b] => (
            a.parse::<usize>().map_err(|_| perr(*i, "bad size"))?,
            b.parse::<usize>().map_err(|_| perr(*i, "bad size"))?,
        ),
        _ => return Err(perr(*i, "expected `sizes <n_interior> <n_boundary>`")),
    };
    let (i, l) = next("eigenvalues")?;
    if l.trim() != "eigenvalues" {
        return Err(perr(*i, "expected `eigenvalues`"));
    }
    let mut lambda = DVector::zeros(ng);
    for j in 0..ng {
        let (i, l) = next("eigenvalue")?;
        lambda[j] = parse(*i, l.trim())?;
    }
    let (i, l) = next("traces")?;
    if l.trim() != "traces" {
        return Err(perr(*i, "expected `traces`"));
    }
    let mut tr = DMatrix::zeros(nb, ng);
    for z in 0..nb {
        let (i, l) = next("trace row")?;
        let vals: Vec<&str> = l.split_whitespace().collect();
        if vals.len() != ng {
            return Err(perr(*i, &format!("trace row has {} entries, expected {ng}", vals.len())));
        }
        for (j, v) in vals.iter().enumerate() {
            tr[(z, j)] = parse(*i, v)?;
        }
    }
    if let Ok((i, _)) = next("") {
        return Err(perr(*i, "trailing content"));
    }
    Ok(SpectralData { eigenvalues: lambda, boundary_traces: tr, full_eigenfunctions: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, generate_hex, generate_rect, pendant_pair_graph, EdgeRule, RawGraph, RawVertex, VertexRule};

    fn path3() -> WeightedGraph {
        let mut raw = RawGraph::default();
        let z1 = raw.add_vertex(RawVertex::boundary(1.0));
        let x1 = raw.add_vertex(RawVertex::interior(1.0));
        let z2 = raw.add_vertex(RawVertex::boundary(1.0));
        raw.add_edge(z1, x1, 1.0);
        raw.add_edge(x1, z2, 1.0);
        build_graph(&raw).unwrap()
    }

    #[test]
    fn path_blocks() {
        let lap = assemble_laplacian(&path3());
        assert_eq!(lap.delta_gg, DMatrix::from_row_slice(1, 1, &[-2.0]));
        assert_eq!(lap.delta_gb, DMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
    }

    #[test]
    fn pendant_pair_blocks_by_hand() {
        let (a, b, c, m1, m2) = (1.5, 2.0, 0.7, 3.0, 5.0);
        let g = pendant_pair_graph(a, b, c, m1, m2).unwrap();
        let lap = assemble_laplacian(&g);
        let want_gg = DMatrix::from_row_slice(2, 2, &[-(a + b + c) / m1, c / m1, c / m2, -c / m2]);
        let want_gb = DMatrix::from_row_slice(2, 2, &[a / m1, b / m1, 0.0, 0.0]);
        assert!((lap.delta_gg - want_gg).amax() < 1e-15);
        assert!((lap.delta_gb - want_gb).amax() < 1e-15);
    }

    #[test]
    fn path_spectrum() {
        let s = neumann_eigs(&path3()).unwrap();
        assert_eq!(s.eigenvalues.as_slice(), &[0.0]);
        assert!((s.full_eigenfunctions.unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(s.boundary_traces.shape(), (2, 1));
        assert!((s.boundary_traces[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_ground_state_and_orthonormality() {
        let g = generate_hex(3, 2, EdgeRule::MeanDegree, VertexRule::Trig).unwrap();
        let s = neumann_eigs(&g).unwrap();
        assert!(s.eigenvalues[0].abs() < 1e-12);
        assert!(s.eigenvalues.iter().all(|&l| l >= 0.0));
        let phi = s.full_eigenfunctions.unwrap();
        let c0 = phi.column(0);
        assert!(c0.iter().all(|v| (v - c0[0]).abs() < 1e-12));
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(g.mu_interior()));
        let gram = phi.transpose() * m * &phi;
        assert!((gram - DMatrix::identity(phi.ncols(), phi.ncols())).amax() < 1e-12);
    }

    #[test]
    fn eigen_decomposition_reconstructs_operator() {
        let g = generate_rect(5, 4, EdgeRule::MeanDegree, VertexRule::Trig).unwrap();
        let a = reduced_operator(&g).unwrap();
        let s = neumann_eigs(&g).unwrap();
        let q = s.full_eigenfunctions.unwrap();
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(g.mu_interior()));
        let rebuilt = &q * DMatrix::from_diagonal(&s.eigenvalues) * q.transpose() * m;
        assert!((&a - rebuilt).norm() / a.norm() < 1e-12);
    }

    #[test]
    fn rejects_shared_boundary_vertex() {
        let mut raw = RawGraph::default();
        let x1 = raw.add_vertex(RawVertex::interior(1.0));
        let x2 = raw.add_vertex(RawVertex::interior(1.0));
        let z = raw.add_vertex(RawVertex::boundary(1.0));
        raw.add_edge(x1, z, 1.0);
        raw.add_edge(x2, z, 1.0);
        let g = build_graph(&raw).unwrap();
        assert!(matches!(neumann_eigs(&g), Err(Error::NonuniqueBoundaryNeighbor { .. })));
    }

    #[test]
    fn harmonic_constants_and_pendant_values() {
        let g = generate_rect(3, 3, EdgeRule::MeanDegree, VertexRule::Degree).unwrap();
        let lap = assemble_laplacian(&g);
        let u = solve_harmonic(&lap, &DVector::from_element(g.n_boundary(), 2.5)).unwrap();
        assert!(u.iter().all(|v| (v - 2.5).abs() < 1e-13));

        let (a, b) = (1.5, 2.0);
        let g = pendant_pair_graph(a, b, 0.7, 3.0, 5.0).unwrap();
        let lap = assemble_laplacian(&g);
        let u = solve_harmonic(&lap, &DVector::from_column_slice(&[1.0, 0.0])).unwrap();
        let want = a / (a + b);
        assert!((u[0] - want).abs() < 1e-15 && (u[1] - want).abs() < 1e-15);
    }

    #[test]
    fn harmonic_linearity() {
        let g = generate_hex(3, 1, EdgeRule::MeanDegree, VertexRule::Trig).unwrap();
        let lap = assemble_laplacian(&g);
        let nb = g.n_boundary();
        let g1 = DVector::from_fn(nb, |i, _| (i as f64).sin());
        let g2 = DVector::from_fn(nb, |i, _| (i as f64 * 0.3).cos());
        let lhs = solve_harmonic(&lap, &(&g1 * 2.0 - &g2 * 0.5)).unwrap();
        let rhs = solve_harmonic(&lap, &g1).unwrap() * 2.0 - solve_harmonic(&lap, &g2).unwrap() * 0.5;
        assert!((lhs - rhs).amax() < 1e-13);
    }

    #[test]
    fn basis_dimension_and_residual() {
        for g in [
            generate_rect(10, 9, EdgeRule::Constant(0.25), VertexRule::Degree).unwrap(),
            generate_hex(9, 4, EdgeRule::MeanDegree, VertexRule::Constant(1.0)).unwrap(),
        ] {
            let lap = assemble_laplacian(&g);
            let rank = numerical_rank(&lap.delta_g(), 1e-10);
            assert_eq!(rank, g.n_interior());
            let basis = harmonic_basis(&lap).unwrap();
            assert_eq!(g.n_vertices() - rank, g.n_boundary());
            assert_eq!(numerical_rank(&basis.full_matrix(), 1e-10), g.n_boundary());
            for j in 0..basis.dim() {
                assert!(harmonic_residual(&g, basis.full(j).as_slice()) < 1e-10);
            }
        }
    }

    #[test]
    fn neumann_trace_by_hand() {
        let g = path3();
        assert_eq!(neumann_trace(&g, &[3.0, 3.0, 3.0]), vec![0.0, 0.0]);
        assert_eq!(neumann_trace(&g, &[1.0, 0.0, 0.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn neumann_rows_of_full_laplacian() {
        let g = generate_rect(3, 2, EdgeRule::MeanDegree, VertexRule::Trig).unwrap();
        let full = full_laplacian(&g);
        let u: Vec<f64> = (0..g.n_vertices()).map(|i| (i as f64 * 0.7).sin()).collect();
        let fu = &full * DVector::from_column_slice(&u);
        let tr = neumann_trace(&g, &u);
        for (k, z) in g.boundary().enumerate() {
            assert!((fu[z] - tr[k]).abs() < 1e-14);
        }
        let lu = apply_laplacian(&g, &u);
        for x in g.interior() {
            assert!((fu[x] - lu[x]).abs() < 1e-14);
        }
    }

    #[test]
    fn spectral_file_round_trip() {
        let g = generate_hex(3, 1, EdgeRule::MeanDegree, VertexRule::Trig).unwrap();
        let s = neumann_eigs(&g).unwrap().boundary_only();
        let mut buf = Vec::new();
        write_spectral(&s, &mut buf).unwrap();
        assert_eq!(read_spectral(buf.as_slice()).unwrap(), s);
    }
}
