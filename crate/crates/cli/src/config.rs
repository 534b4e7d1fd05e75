//! Run configuration: defaults, overridden by a JSON or TOML file, overridden
//! by command-line flags, with `CONVEXCERT_OUT` trumping `--out`.

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Optional fields as read from `--config`.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub graph: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub variable: Option<String>,
    pub deltas: Option<Vec<f64>>,
    pub grid_points: Option<usize>,
    pub fd_step_grad: Option<f64>,
    pub fd_step_hess: Option<f64>,
    pub sample_radius: Option<f64>,
    pub dataset: Option<String>,
    pub label_noise: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub rho: Option<f64>,
    pub eps: Option<f64>,
    pub momentum: Option<f64>,
    pub l2: Option<f64>,
    /// Constant bindings by node name: these nodes are pinned to the given
    /// value at every sampled point instead of being drawn by the sampler.
    pub fixed: Option<BTreeMap<String, f64>>,
}

/// Flag values collected by the argument parser (all optional).
#[derive(Debug, Default, Clone)]
pub struct FlagOverrides {
    pub config: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub variable: Option<String>,
    pub deltas: Option<Vec<f64>>,
    pub grid_points: Option<usize>,
    pub fd_step: Option<f64>,
    pub dataset: Option<String>,
    pub seeds: Option<Vec<u64>>,
    pub epochs: Option<usize>,
}

/// Fully resolved configuration for one command invocation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunConfig {
    pub graph: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub variable: Option<String>,
    pub deltas: Vec<f64>,
    pub grid_points: usize,
    pub fd_step_grad: f64,
    pub fd_step_hess: f64,
    pub sample_radius: f64,
    pub dataset: Option<String>,
    pub label_noise: f64,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub rho: f64,
    pub eps: f64,
    pub momentum: f64,
    pub l2: f64,
    pub fixed: BTreeMap<String, f64>,
}

fn load_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("failed to read config {}", path.display()))?;
    let is_toml = path.extension().map(|e| e == "toml").unwrap_or(false);
    if is_toml {
        toml::from_str(&text).with_context(|| format!("malformed TOML config {}", path.display()))
    } else {
        serde_json::from_str(&text)
            .with_context(|| format!("malformed JSON config {}", path.display()))
    }
}

impl RunConfig {
    /// Resolves precedence: defaults, then the config file, then flags, then
    /// the `CONVEXCERT_OUT` environment variable for the output directory.
    /// `default_deltas` supplies the per-command factor grid fallback.
    pub fn resolve(flags: &FlagOverrides, default_deltas: &[f64]) -> Result<RunConfig> {
        let file = match &flags.config {
            Some(path) => load_file(path)?,
            None => FileConfig::default(),
        };
        let mut cfg = RunConfig {
            graph: file.graph,
            out: file.out.unwrap_or_else(|| PathBuf::from("out")),
            seed: file.seed.unwrap_or(42),
            variable: file.variable,
            deltas: file.deltas.unwrap_or_else(|| default_deltas.to_vec()),
            grid_points: file.grid_points.unwrap_or(64),
            fd_step_grad: file.fd_step_grad.unwrap_or(1e-5),
            fd_step_hess: file.fd_step_hess.unwrap_or(1e-4),
            sample_radius: file.sample_radius.unwrap_or(2.0),
            dataset: file.dataset,
            label_noise: file.label_noise.unwrap_or(0.1),
            seeds: file.seeds.unwrap_or_else(|| vec![1, 2, 3, 4, 5]),
            epochs: file.epochs.unwrap_or(120),
            batch_size: file.batch_size.unwrap_or(16),
            rho: file.rho.unwrap_or(0.95),
            eps: file.eps.unwrap_or(1e-6),
            momentum: file.momentum.unwrap_or(0.6),
            l2: file.l2.unwrap_or(1e-6),
            fixed: file.fixed.unwrap_or_default(),
        };
        if let Some(v) = &flags.graph {
            cfg.graph = Some(v.clone());
        }
        if let Some(v) = &flags.out {
            cfg.out = v.clone();
        }
        if let Some(v) = flags.seed {
            cfg.seed = v;
        }
        if let Some(v) = &flags.variable {
            cfg.variable = Some(v.clone());
        }
        if let Some(v) = &flags.deltas {
            cfg.deltas = v.clone();
        }
        if let Some(v) = flags.grid_points {
            cfg.grid_points = v;
        }
        if let Some(v) = flags.fd_step {
            cfg.fd_step_grad = v;
            cfg.fd_step_hess = v;
        }
        if let Some(v) = &flags.dataset {
            cfg.dataset = Some(v.clone());
        }
        if let Some(v) = &flags.seeds {
            cfg.seeds = v.clone();
        }
        if let Some(v) = flags.epochs {
            cfg.epochs = v;
        }
        if let Ok(v) = std::env::var("CONVEXCERT_OUT") {
            if !v.is_empty() {
                cfg.out = PathBuf::from(v);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if let Some(&bad) = self.deltas.iter().find(|&&d| !(d > 0.0 && d <= 1.0)) {
            bail!("scale factor {bad} outside (0, 1]");
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            bail!("seeds must be distinct");
        }
        if self.grid_points < 2 {
            bail!("grid_points must be at least 2");
        }
        Ok(())
    }

    pub fn require_graph(&self) -> Result<&Path> {
        self.graph.as_deref().context("no graph file given (use --graph or the config file)")
    }
}
