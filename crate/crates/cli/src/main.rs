use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use commands::Status;
use config::{RunConfig, UsageError};

const EXIT_DEGRADED: u8 = 10;
const EXIT_USAGE: u8 = 20;
const EXIT_INPUT: u8 = 21;
const EXIT_IO: u8 = 22;
const EXIT_NUMERIC: u8 = 23;

/// Recover interior vertex weights of a graph from Neumann boundary spectral data.
#[derive(Parser)]
#[command(name = "bcgraph", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph and write it to a file.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        /// Output file (default: <out>/graph.txt).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Spectral data, ND map from spectra, simulated ND map, and their FRNE.
    Forward {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the reconstruction and write report, CSVs and timings.
    Reconstruct {
        #[command(flatten)]
        common: CommonArgs,
        /// With --spectral, score against the interior weights in the graph.
        #[arg(long)]
        truth_from_graph: bool,
    },
    /// Foliation, two-points and control-rank checks.
    Check {
        #[command(flatten)]
        common: CommonArgs,
        /// Largest subset size for the two-points enumeration.
        #[arg(long)]
        subset_cap: Option<usize>,
    },
    /// Noiseless and noisy runs of a reference experiment (1, 2 or 3).
    ReplicateExperiment {
        number: u8,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args, Default)]
struct CommonArgs {
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// rect, tri, hex, pendant-pair, gateway or stalled-foliation.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Edge rule: const:<w> or mean-degree.
    #[arg(long)]
    w: Option<String>,
    /// Vertex rule: const:<mu>, degree or trig.
    #[arg(long)]
    mu: Option<String>,
    /// Graph file instead of a generated family.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Spectral data file instead of computing it from the graph.
    #[arg(long)]
    spectral: Option<PathBuf>,
    /// Time horizon (default: deepest interior level + 1).
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Multiplicative noise level as a fraction (0.001 = 0.1 %).
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Relative singular-value cutoff for the control solve.
    #[arg(long)]
    control_threshold: Option<f64>,
    /// Relative tolerance for product ranks.
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Relative singular-value cutoff for the final solve.
    #[arg(long)]
    final_threshold: Option<f64>,
    /// Output directory (else $BCGRAPH_OUT_DIR, else ./bcgraph-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also simulate the ND map and compare.
    #[arg(long)]
    verify: bool,
}

impl CommonArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            family: self.family.clone(),
            m: self.m,
            n: self.n,
            w: self.w.clone(),
            mu: self.mu.clone(),
            graph: self.graph.clone(),
            spectral: self.spectral.clone(),
            horizon: self.horizon,
            sigma: self.sigma,
            seed: self.seed,
            control_threshold: self.control_threshold,
            rank_tol: self.rank_tol,
            final_threshold: self.final_threshold,
            out_dir: self.out.clone(),
            verify: self.verify.then_some(true),
        };
        let cfg = base.merged(flags);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use bcgraph::Error as E;
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    if let Some(e) = err.downcast_ref::<E>() {
        return match e {
            E::SingularSystem(_) | E::IncompatibleInitialData(_) | E::NotHarmonic(_) | E::ZeroReference => {
                EXIT_NUMERIC
            }
            _ => EXIT_INPUT,
        };
    }
    if err.downcast_ref::<toml::de::Error>().is_some() {
        return EXIT_INPUT;
    }
    if err.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some()) {
        return EXIT_IO;
    }
    EXIT_INPUT
}

fn dispatch(cli: Cli) -> anyhow::Result<Status> {
    match cli.command {
        Command::Generate { common, output } => commands::generate(&common.resolve()?, output),
        Command::Forward { common } => commands::forward(&common.resolve()?),
        Command::Reconstruct { common, truth_from_graph } => {
            commands::reconstruct(&common.resolve()?, truth_from_graph)
        }
        Command::Check { common, subset_cap } => commands::check(&common.resolve()?, subset_cap),
        Command::ReplicateExperiment { number, common } => commands::replicate(&common.resolve()?, number),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Degraded) => ExitCode::from(EXIT_DEGRADED),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
