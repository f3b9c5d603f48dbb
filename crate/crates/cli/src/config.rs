//! Run configuration: a TOML file, overridden field by field by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use bcgraph::graph::{
    gateway_graph, generate_hex, generate_rect, generate_tri, pendant_pair_graph, read_graph, stalled_foliation_graph,
    EdgeRule, VertexRule, WeightedGraph,
};
use bcgraph::reconstruct::Thresholds;
use serde::{Deserialize, Serialize};

pub const OUT_DIR_ENV: &str = "BCGRAPH_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "bcgraph-out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// rect, tri, hex, pendant-pair, gateway or stalled-foliation.
    pub family: Option<String>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    /// Edge-weight rule for generated lattices.
    pub w: Option<String>,
    /// Vertex-weight rule for generated lattices.
    pub mu: Option<String>,
    /// Graph file; takes precedence over `family`.
    pub graph: Option<PathBuf>,
    /// Spectral data file; computed from the graph when absent.
    pub spectral: Option<PathBuf>,
    #[serde(rename = "T")]
    pub horizon: Option<usize>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub control_threshold: Option<f64>,
    pub rank_tol: Option<f64>,
    pub final_threshold: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub verify: Option<bool>,
}

/// A usage mistake rather than bad input data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(self, over: RunConfig) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            family,
            m,
            n,
            w,
            mu,
            graph,
            spectral,
            horizon,
            sigma,
            seed,
            control_threshold,
            rank_tol,
            final_threshold,
            out_dir,
            verify
        )
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.horizon == Some(0) {
            return usage("T must be at least 1");
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return usage(format!("sigma must be >= 0, got {s}"));
            }
        }
        for (name, v) in [
            ("control threshold", self.control_threshold),
            ("rank tolerance", self.rank_tol),
            ("final threshold", self.final_threshold),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return usage(format!("{name} must be >= 0, got {v}"));
                }
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn thresholds(&self) -> Thresholds {
        let d = Thresholds::default();
        Thresholds {
            control: self.control_threshold.unwrap_or(d.control),
            product_rank: self.rank_tol.unwrap_or(d.product_rank),
            final_solve: self.final_threshold,
        }
    }

    pub fn load_graph(&self) -> anyhow::Result<WeightedGraph> {
        if let Some(path) = &self.graph {
            let file = std::fs::File::open(path).with_context(|| format!("opening graph {}", path.display()))?;
            return Ok(read_graph(std::io::BufReader::new(file))?);
        }
        let Some(family) = self.family.as_deref() else {
            return usage("no graph: pass --graph FILE or --family");
        };
        let w: EdgeRule = self.w.as_deref().unwrap_or("const:1").parse()?;
        let mu: VertexRule = self.mu.as_deref().unwrap_or("const:1").parse()?;
        let dims = || -> anyhow::Result<(usize, usize)> {
            match (self.m, self.n) {
                (Some(m), Some(n)) => Ok((m, n)),
                _ => usage(format!("family {family} needs --m and --n")),
            }
        };
        Ok(match family {
            "rect" => {
                let (m, n) = dims()?;
                generate_rect(m, n, w, mu)?
            }
            "tri" => {
                let (m, n) = dims()?;
                generate_tri(m, n, w, mu)?
            }
            "hex" => {
                let (m, n) = dims()?;
                generate_hex(m, n, w, mu)?
            }
            "pendant-pair" => pendant_pair_graph(1.0, 2.0, 0.5, 1.3, 0.7)?,
            "gateway" => gateway_graph(),
            "stalled-foliation" => stalled_foliation_graph(),
            other => bail!(UsageError(format!(
                "unknown family {other:?} (rect, tri, hex, pendant-pair, gateway, stalled-foliation)"
            ))),
        })
    }
}
