//! End-to-end run: spectral data -> ND map -> control -> μ|_G, plus the three
//! reference experiments.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::control::{build_operators, wstar_w};
use crate::error::{Error, Result};
use crate::graph::{compute_levels, generate_hex, generate_rect, generate_tri, EdgeRule, VertexRule, WeightedGraph};
use crate::laplacian::{assemble_laplacian, harmonic_basis, neumann_eigs, numerical_rank, SpectralData};
use crate::reconstruct::{
    add_noise, frne, l2rne, project_onto_m, reconstruct_mu, Ranks, Reconstruction, ReconstructionReport,
    ReconstructionStatus, Thresholds,
};
use crate::spectral_nd::nd_from_spectra;
use crate::wave::{simulate_nd, NdMap};

/// Eigenvalues above this make some discrete wave modes grow like |2 - λ|^t.
pub const STABLE_EIGENVALUE_BOUND: f64 = 4.0;

/// Smallest horizon at which the control window {1..T-1} reaches every
/// interior vertex.
pub fn default_horizon(g: &WeightedGraph) -> usize {
    compute_levels(g).max_level() + 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    /// `None` picks [`default_horizon`].
    pub horizon: Option<usize>,
    pub sigma: f64,
    pub seed: u64,
    pub thresholds: Thresholds,
    /// Also simulate the ND map from the true weights and compare.
    pub verify: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self { horizon: None, sigma: 0.0, seed: 0, thresholds: Thresholds::default(), verify: false }
    }
}

/// Seconds per stage.
pub type Timings = BTreeMap<String, f64>;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: ReconstructionReport,
    pub reconstruction: Reconstruction,
    pub nd: NdMap,
    pub simulated_nd: Option<NdMap>,
    pub timings: Timings,
}

fn lap(timings: &mut Timings, name: &str, start: Instant) {
    timings.insert(name.to_string(), start.elapsed().as_secs_f64());
}

/// Runs the reconstruction. `known` supplies topology, w and μ|_∂G; its
/// interior weights are ignored. `truth` (interior weights), when given, is
/// used for error metrics and, with `verify`, for the simulated ND map.
pub fn run(
    known: &WeightedGraph,
    spectral: &SpectralData,
    truth: Option<&[f64]>,
    settings: &RunSettings,
) -> Result<RunOutcome> {
    settings.thresholds.validate()?;
    let known = known.blinded();
    let info = known.boundary_info()?;
    let mut timings = Timings::new();
    let mut warnings = Vec::new();

    let levels = compute_levels(&known);
    let horizon = settings.horizon.unwrap_or(levels.max_level() + 1);
    if horizon < 2 {
        return Err(Error::HorizonTooSmall(horizon));
    }
    if horizon <= levels.max_level() {
        warnings.push(format!(
            "T = {horizon} does not exceed the deepest interior level {}; controls cannot reach every vertex",
            levels.max_level()
        ));
    }

    let start = Instant::now();
    let spec = add_noise(spectral, settings.sigma, settings.seed)?;
    let lmax = spec.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lmax > STABLE_EIGENVALUE_BOUND {
        warnings.push(format!(
            "largest eigenvalue {lmax:.4} exceeds 4: wave modes grow like |2 - λ|^t and amplify rounding"
        ));
    }
    let nd = nd_from_spectra(&spec, &info, horizon)?;
    lap(&mut timings, "spectral_to_nd", start);

    let ops = build_operators(known.n_boundary(), horizon)?;
    let truth_graph = truth.map(|mu| known.with_interior_mu(mu)).transpose()?;
    let (mut frne_nd, mut frne_wsw, mut simulated_nd) = (None, None, None);
    if settings.verify {
        if let Some(tg) = &truth_graph {
            let start = Instant::now();
            let sim = simulate_nd(tg, horizon)?;
            frne_nd = Some(frne(&sim.matrix, &nd.matrix)?);
            frne_wsw = Some(frne(&wstar_w(&sim, &ops)?, &wstar_w(&nd, &ops)?)?);
            simulated_nd = Some(sim);
            lap(&mut timings, "oracle", start);
        }
    }

    let start = Instant::now();
    let lapm = assemble_laplacian(&known);
    let basis = harmonic_basis(&lapm)?;
    let mut delta = nalgebra::DMatrix::zeros(known.n_interior(), known.n_vertices());
    delta.view_mut((0, 0), lapm.delta_gg.shape()).copy_from(&lapm.delta_gg);
    delta.view_mut((0, known.n_interior()), lapm.delta_gb.shape()).copy_from(&lapm.delta_gb);
    let rank_delta_g = numerical_rank(&delta, settings.thresholds.product_rank);
    lap(&mut timings, "harmonic_basis", start);

    let start = Instant::now();
    let rec = reconstruct_mu(&nd, &known, &basis, &ops, &settings.thresholds)?;
    lap(&mut timings, "reconstruct", start);

    if rec.status == ReconstructionStatus::ProjectionOnly {
        warnings.push(format!(
            "products of harmonic functions span {} of {} dimensions; only the projection of μ onto their span is recovered",
            rec.products.rank,
            known.n_interior()
        ));
    }
    if !rec.negative_vertices.is_empty() {
        warnings.push(format!("{} recovered weights are not positive", rec.negative_vertices.len()));
    }

    let (mut l2, mut proj_l2, mut abs_err) = (None, None, None);
    if let Some(mu) = truth {
        l2 = Some(l2rne(mu, &rec.mu)?);
        let p = project_onto_m(mu, &rec.products)?;
        proj_l2 = Some(l2rne(&p, &rec.mu)?);
        abs_err = Some(mu.iter().zip(&rec.mu).map(|(a, b)| (a - b).abs()).collect());
    }

    let report = ReconstructionReport {
        graph_hash: known.content_hash(),
        horizon,
        sigma: settings.sigma,
        seed: settings.seed,
        thresholds: settings.thresholds,
        status: rec.status,
        solver: rec.solver,
        mu_rec: rec.mu.clone(),
        mu_true: truth.map(<[f64]>::to_vec),
        abs_err,
        l2rne: l2,
        projection_l2rne: proj_l2,
        frne_nd,
        frne_wstar_w: frne_wsw,
        ranks: Ranks {
            rank_delta_g,
            harmonic_dim: known.n_vertices() - rank_delta_g,
            independent_products: rec.selected_pairs.len(),
            products_rank: rec.products.rank,
            full_vertex_products_rank: rec.products.full_vertex_rank,
            control_rank: rec.control_rank,
            final_rank: rec.final_rank,
        },
        negative_vertices: rec.negative_vertices.clone(),
        warnings,
    };
    Ok(RunOutcome { report, reconstruction: rec, nd, simulated_nd, timings })
}

/// Forward data for a graph with known weights, then [`run`].
pub fn run_synthetic(truth: &WeightedGraph, settings: &RunSettings) -> Result<RunOutcome> {
    let spec = neumann_eigs(truth)?.boundary_only();
    run(truth, &spec, Some(truth.mu_interior()), settings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentId {
    Rect,
    Tri,
    Hex,
}

impl ExperimentId {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Self::Rect),
            2 => Some(Self::Tri),
            3 => Some(Self::Hex),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Self::Rect => 1,
            Self::Tri => 2,
            Self::Hex => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyCase {
    pub sigma: f64,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub id: ExperimentId,
    pub description: &'static str,
    pub graph: WeightedGraph,
    pub horizon: usize,
    pub noisy: Vec<NoisyCase>,
}

fn noisy_cases(control: [f64; 3]) -> Vec<NoisyCase> {
    let finals = [0.001, 0.001, 0.003];
    [0.001, 0.002, 0.005]
        .iter()
        .zip(control.iter().zip(finals))
        .map(|(&sigma, (&c, f))| NoisyCase {
            sigma,
            thresholds: Thresholds { control: c, final_solve: Some(f), ..Thresholds::default() },
        })
        .collect()
}

/// The three lattice experiments, all at T = 9.
pub fn experiment(id: ExperimentId) -> Experiment {
    let (description, graph, control) = match id {
        ExperimentId::Rect => (
            "square lattice 10x9, w = 0.25, μ = degree",
            generate_rect(10, 9, EdgeRule::Constant(0.25), VertexRule::Degree),
            [0.003, 0.005, 0.007],
        ),
        ExperimentId::Tri => (
            "triangular lattice 10x9, w = mean endpoint degree, μ = 1 + sin/2 + cos/2",
            generate_tri(10, 9, EdgeRule::MeanDegree, VertexRule::Trig),
            [0.001, 0.005, 0.003],
        ),
        ExperimentId::Hex => (
            "hexagonal lattice 9x4, w = mean endpoint degree, μ = 1",
            generate_hex(9, 4, EdgeRule::MeanDegree, VertexRule::Constant(1.0)),
            [0.001, 0.005, 0.003],
        ),
    };
    Experiment {
        id,
        description,
        graph: graph.expect("fixed parameters are valid"),
        horizon: 9,
        noisy: noisy_cases(control),
    }
}
