use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use bcgraph::graph::{
    check_foliation, check_two_points, compute_levels, default_subset_cap, write_graph, FoliationWitness,
    TwoPointsVerdict, WeightedGraph,
};
use bcgraph::laplacian::{neumann_eigs, read_spectral, write_spectral, SpectralData};
use bcgraph::pipeline::{default_horizon, experiment, run, ExperimentId, RunOutcome, RunSettings, Timings};
use bcgraph::reconstruct::{frne, ReconstructionReport, ReconstructionStatus};
use bcgraph::spectral_nd::nd_from_spectra;
use bcgraph::wave::{check_unique_continuation, simulate_nd, write_nd, UniqueContinuationReport};
use serde::Serialize;

use crate::config::{usage, RunConfig};

/// Subset count allowed for the default two-points enumeration cap.
pub const TWO_POINTS_BUDGET: u64 = 2_000_000;
pub const CONTROL_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Degraded,
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(w.flush()?)
}

fn write_singular_values(dir: &Path, name: &str, values: &[f64]) -> anyhow::Result<()> {
    let mut w = create(dir, name)?;
    writeln!(w, "index,sigma")?;
    for (i, s) in values.iter().enumerate() {
        writeln!(w, "{i},{s:.12e}")?;
    }
    Ok(w.flush()?)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4e} %")).unwrap_or_else(|| "n/a".into())
}

fn level_summary(g: &WeightedGraph) -> (usize, bool) {
    (compute_levels(g).max_level(), check_foliation(g).holds)
}

pub fn generate(cfg: &RunConfig, output: Option<PathBuf>) -> anyhow::Result<Status> {
    let g = cfg.load_graph()?;
    let path = output.unwrap_or_else(|| cfg.out_dir().join("graph.txt"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("writing {}", path.display()))?);
    write_graph(&g, &mut w)?;
    w.flush()?;
    let (max_level, foliated) = level_summary(&g);
    println!("graph     {}", path.display());
    println!("|G|       {}", g.n_interior());
    println!("|dG|      {}", g.n_boundary());
    println!("edges     {}", g.edges().len());
    println!("max level {max_level}");
    println!("foliation {}", if foliated { "holds" } else { "fails" });
    Ok(Status::Ok)
}

fn horizon_for(cfg: &RunConfig, g: &WeightedGraph) -> usize {
    cfg.horizon.unwrap_or_else(|| default_horizon(g))
}

fn load_spectral(path: &Path) -> anyhow::Result<SpectralData> {
    let f = File::open(path).with_context(|| format!("opening spectral data {}", path.display()))?;
    Ok(read_spectral(BufReader::new(f))?)
}

pub fn forward(cfg: &RunConfig) -> anyhow::Result<Status> {
    let g = cfg.load_graph()?;
    let t = horizon_for(cfg, &g);
    if t < 1 {
        return usage("T must be at least 1");
    }
    let dir = cfg.out_dir();
    let spec = neumann_eigs(&g)?.boundary_only();
    let nd = nd_from_spectra(&spec, &g.boundary_info()?, t)?;
    let sim = simulate_nd(&g, t)?;
    let err = frne(&sim.matrix, &nd.matrix)?;

    let mut w = create(&dir, "spectral.txt")?;
    write_spectral(&spec, &mut w)?;
    w.flush()?;
    let mut w = create(&dir, "nd_spectral.txt")?;
    write_nd(&nd, &mut w)?;
    w.flush()?;
    let mut w = create(&dir, "nd_simulated.txt")?;
    write_nd(&sim, &mut w)?;
    w.flush()?;

    println!("T                     {t}");
    println!("eigenvalues           {}", spec.n_eigen());
    println!("largest eigenvalue    {:.6e}", spec.eigenvalues.max());
    println!("FRNE(spectral, sim)   {err:.4e} %");
    println!("output                {}", dir.display());
    Ok(Status::Ok)
}

fn write_outcome(dir: &Path, out: &RunOutcome) -> anyhow::Result<()> {
    let r = &out.report;
    write_json(dir, "report.json", r)?;
    write_json(dir, "timings.json", &out.timings)?;
    let mut w = create(dir, "mu.csv")?;
    writeln!(w, "vertex,mu_true,mu_rec,abs_err")?;
    for (i, m) in r.mu_rec.iter().enumerate() {
        let truth = r.mu_true.as_ref().map(|v| v[i]);
        let err = r.abs_err.as_ref().map(|v| v[i]);
        writeln!(w, "{i},{},{m:.12e},{}", opt(truth), opt(err))?;
    }
    w.flush()?;
    write_singular_values(dir, "control_singular_values.csv", &out.reconstruction.control_singular_values)?;
    write_singular_values(dir, "product_singular_values.csv", &out.reconstruction.products.singular_values)?;
    Ok(())
}

fn print_report(r: &ReconstructionReport, timings: &Timings) {
    println!("status                {:?}", r.status);
    println!("T                     {}", r.horizon);
    println!("sigma                 {:.4e}", r.sigma);
    println!("rank(Delta_G)         {}", r.ranks.rank_delta_g);
    println!("harmonic dimension    {}", r.ranks.harmonic_dim);
    println!("independent products  {} (all vertices: {})", r.ranks.independent_products, r.ranks.full_vertex_products_rank);
    println!("control rank          {}", r.ranks.control_rank);
    println!("FRNE(ND)              {}", fmt_pct(r.frne_nd));
    println!("FRNE(W*W)             {}", fmt_pct(r.frne_wstar_w));
    println!("L2RNE                 {}", fmt_pct(r.l2rne));
    println!("L2RNE vs projection   {}", fmt_pct(r.projection_l2rne));
    let total: f64 = timings.values().sum();
    println!("time                  {total:.3} s");
    for w in &r.warnings {
        println!("warning: {w}");
    }
}

fn status_of(r: &ReconstructionReport) -> Status {
    match r.status {
        ReconstructionStatus::Full => Status::Ok,
        ReconstructionStatus::ProjectionOnly => Status::Degraded,
    }
}

fn settings_for(cfg: &RunConfig, horizon: usize) -> RunSettings {
    RunSettings {
        horizon: Some(horizon),
        sigma: cfg.sigma.unwrap_or(0.0),
        seed: cfg.seed.unwrap_or(0),
        thresholds: cfg.thresholds(),
        verify: cfg.verify.unwrap_or(false),
    }
}

pub fn reconstruct(cfg: &RunConfig, truth_from_graph: bool) -> anyhow::Result<Status> {
    let g = cfg.load_graph()?;
    let t = horizon_for(cfg, &g);
    let (spec, synthetic) = match &cfg.spectral {
        Some(p) => (load_spectral(p)?, false),
        None => (neumann_eigs(&g)?.boundary_only(), true),
    };
    let truth = (synthetic || truth_from_graph).then(|| g.mu_interior().to_vec());
    let out = run(&g, &spec, truth.as_deref(), &settings_for(cfg, t))?;
    let dir = cfg.out_dir();
    write_outcome(&dir, &out)?;
    let resolved = RunConfig { horizon: Some(t), ..cfg.clone() };
    std::fs::write(dir.join("config.toml"), toml::to_string(&resolved)?)?;
    print_report(&out.report, &out.timings);
    println!("output                {}", dir.display());
    Ok(status_of(&out.report))
}

#[derive(Serialize)]
struct FoliationSummary {
    holds: bool,
    max_level: usize,
    witness: Option<String>,
}

#[derive(Serialize)]
struct TwoPointsSummary {
    verdict: TwoPointsVerdict,
    witness: Option<Vec<usize>>,
    cap: usize,
    subsets_checked: u64,
}

#[derive(Serialize)]
struct CheckReport {
    graph_hash: String,
    n_interior: usize,
    n_boundary: usize,
    foliation: FoliationSummary,
    two_points: TwoPointsSummary,
    control: UniqueContinuationReport,
}

fn describe_vertices(g: &WeightedGraph, vs: &[usize]) -> String {
    let items: Vec<String> = vs
        .iter()
        .map(|&v| match g.coords(v) {
            Some([x, y]) => format!("{v}@({x},{y})"),
            None => v.to_string(),
        })
        .collect();
    format!("{{{}}}", items.join(", "))
}

pub fn check(cfg: &RunConfig, subset_cap: Option<usize>) -> anyhow::Result<Status> {
    let g = cfg.load_graph()?;
    let levels = compute_levels(&g);
    let fol = check_foliation(&g);
    let witness = fol.witness.as_ref().map(|w| match w {
        FoliationWitness::BoundaryVertex { vertex, interior_neighbors } => {
            format!("boundary vertex {vertex} has {interior_neighbors} interior neighbors")
        }
        FoliationWitness::Residual { level, vertices } => {
            format!("level {level} leaves {} unsplit", describe_vertices(&g, vertices))
        }
    });
    let cap = subset_cap.unwrap_or_else(|| default_subset_cap(&g, TWO_POINTS_BUDGET));
    let tp = check_two_points(&g, cap)?;
    let t = horizon_for(cfg, &g).max(1);
    let control = check_unique_continuation(&g, t, CONTROL_RANK_TOL)?;

    println!("|G| {}  |dG| {}  max level {}", g.n_interior(), g.n_boundary(), levels.max_level());
    println!("foliation   {}", if fol.holds { "holds" } else { "fails" });
    if let Some(w) = &witness {
        println!("  witness   {w}");
    }
    let verdict = match tp.verdict {
        TwoPointsVerdict::Holds => "holds",
        TwoPointsVerdict::Fails => "fails",
        TwoPointsVerdict::Unknown => "unknown",
    };
    println!("two-points  {verdict} (subsets up to size {}, {} checked)", tp.cap, tp.subsets_checked);
    if let Some(w) = &tp.witness {
        println!("  witness   {}", describe_vertices(&g, w));
    }
    println!(
        "control     rank {} of {} at T = {} (smallest retained / largest {:.3e}){}",
        control.rank,
        g.n_interior(),
        t,
        control.smallest_retained / control.sigma_max,
        if control.horizon_below_max_level { ", T below max level" } else { "" }
    );

    let report = CheckReport {
        graph_hash: g.content_hash(),
        n_interior: g.n_interior(),
        n_boundary: g.n_boundary(),
        foliation: FoliationSummary { holds: fol.holds, max_level: levels.max_level(), witness },
        two_points: TwoPointsSummary { verdict: tp.verdict, witness: tp.witness, cap: tp.cap, subsets_checked: tp.subsets_checked },
        control,
    };
    write_json(&cfg.out_dir(), "check.json", &report)?;
    Ok(Status::Ok)
}

pub fn replicate(cfg: &RunConfig, number: u8) -> anyhow::Result<Status> {
    let Some(id) = ExperimentId::from_number(number) else {
        return usage(format!("experiment must be 1, 2 or 3, got {number}"));
    };
    let e = experiment(id);
    let t = cfg.horizon.unwrap_or(e.horizon);
    let seed = cfg.seed.unwrap_or(0);
    let root = cfg.out_dir().join(format!("experiment-{number}"));
    let spec = neumann_eigs(&e.graph)?.boundary_only();
    println!("experiment {number}: {} (T = {t}, seed {seed})", e.description);

    let mut cases = vec![("noiseless".to_string(), RunSettings {
        horizon: Some(t),
        seed,
        thresholds: cfg.thresholds(),
        verify: true,
        ..RunSettings::default()
    })];
    for c in &e.noisy {
        cases.push((format!("sigma-{}", c.sigma * 100.0), RunSettings {
            horizon: Some(t),
            sigma: c.sigma,
            seed,
            thresholds: c.thresholds,
            verify: true,
        }));
    }
    let mut status = Status::Ok;
    println!("{:<12} {:>14} {:>14} {:>14} {:>8}", "case", "FRNE(ND) %", "FRNE(W*W) %", "L2RNE %", "status");
    for (name, settings) in cases {
        let out = run(&e.graph, &spec, Some(e.graph.mu_interior()), &settings)?;
        write_outcome(&root.join(&name), &out)?;
        let r = &out.report;
        let f = |v: Option<f64>| v.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "n/a".into());
        println!(
            "{name:<12} {:>14} {:>14} {:>14} {:>8}",
            f(r.frne_nd),
            f(r.frne_wstar_w),
            f(r.l2rne),
            format!("{:?}", r.status).to_lowercase()
        );
        for w in &r.warnings {
            println!("  warning: {w}");
        }
        if status_of(r) == Status::Degraded {
            status = Status::Degraded;
        }
    }
    println!("output {}", root.display());
    Ok(status)
}
