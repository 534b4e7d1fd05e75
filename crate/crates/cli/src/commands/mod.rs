pub mod certify;
pub mod demo_sin2;
pub mod experiments;
pub mod gradcheck;
pub mod scale_search;

use crate::config::RunConfig;
use anyhow::{bail, Context, Result};
use convexcert_core::graph::{load_graph, Bindings, Graph, NodeId, NodeKind};
use convexcert_core::rng::SeedStreams;
use convexcert_core::sampling::HypercubeSampler;
use convexcert_core::tensor::Matrix;
use std::collections::BTreeMap;

pub(crate) fn load_graph_file(cfg: &RunConfig) -> Result<Graph> {
    let path = cfg.require_graph()?;
    load_graph(path).with_context(|| format!("loading graph {}", path.display()))
}

/// The certified variable: `--variable` when given, otherwise the graph's
/// first parameter node.
pub(crate) fn resolve_variable(g: &Graph, cfg: &RunConfig) -> Result<NodeId> {
    match &cfg.variable {
        Some(name) => g
            .find(name)
            .with_context(|| format!("variable '{name}' is not a node of the graph")),
        None => g
            .parameters()
            .into_iter()
            .next()
            .context("graph has no parameter node; pass --variable"),
    }
}

/// Constant bindings pinned by the `fixed` config table, by node name.
pub(crate) fn fixed_bindings(g: &Graph, cfg: &RunConfig) -> Result<BTreeMap<NodeId, f64>> {
    let mut out = BTreeMap::new();
    for (name, &value) in &cfg.fixed {
        let id = g.find(name).with_context(|| format!("fixed node '{name}' not in graph"))?;
        if !g.kind(id).is_bindable() {
            bail!("fixed node '{name}' is not an input or parameter");
        }
        out.insert(id, value);
    }
    Ok(out)
}

/// Named built-in tabular dataset (or a digits CSV path) for dataset-driven
/// sampling and training.
pub(crate) fn tabular_dataset(
    name: &str,
    cfg: &RunConfig,
) -> Result<convexcert_core::train::TabularDataset> {
    use convexcert_core::train::{
        flip_labels, gaussian_blobs, load_digits_csv, synthetic_digits, two_moons,
    };
    let streams = SeedStreams::new(cfg.seed);
    let noisy = |ds| flip_labels(&ds, cfg.label_noise, &streams);
    match name {
        "blobs" => Ok(noisy(gaussian_blobs(32, 3, 100, 0.4, &streams))),
        "digits" => Ok(noisy(synthetic_digits(40, &streams))),
        "moons" => Ok(noisy(two_moons(150, 0.15, &streams))),
        path if path.ends_with(".csv") => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading dataset {path}"))?;
            Ok(load_digits_csv(&text)?)
        }
        other => bail!("unknown tabular dataset '{other}'"),
    }
}

/// Sampled binding points: hypercube draws, or dataset batches for the
/// feature/label nodes when a dataset is configured; any `fixed` nodes are
/// pinned to their constants afterwards.
pub(crate) fn sample_points(g: &Graph, cfg: &RunConfig) -> Result<Vec<Bindings>> {
    let fixed = fixed_bindings(g, cfg)?;
    let streams = SeedStreams::new(cfg.seed);
    let mut points = match &cfg.dataset {
        Some(name) => {
            let ds = tabular_dataset(name, cfg)?;
            let label = g.label_node();
            let feature_inputs: Vec<NodeId> = g
                .ids()
                .filter(|&id| {
                    matches!(g.kind(id), NodeKind::Input)
                        && id != label
                        && g.shape(id).0 == ds.feature_dim()
                })
                .collect();
            let [input] = feature_inputs[..] else {
                bail!(
                    "dataset '{name}' needs exactly one input node with {} rows to bind features",
                    ds.feature_dim()
                );
            };
            if g.shape(label).0 != ds.class_count() {
                bail!(
                    "label node '{}' has {} rows but the dataset has {} classes",
                    g.name(label),
                    g.shape(label).0,
                    ds.class_count()
                );
            }
            convexcert_core::sampling::dataset_points(
                g,
                &streams,
                input,
                label,
                convexcert_core::sampling::DatasetBatches {
                    features: &ds.features,
                    labels: &ds.labels,
                },
                cfg.sample_radius,
                cfg.grid_points,
            )
        }
        None => {
            let sampler = HypercubeSampler { radius: cfg.sample_radius, points: cfg.grid_points };
            sampler.sample(g, &streams)
        }
    };
    for point in &mut points {
        for (&id, &value) in &fixed {
            let (r, c) = g.shape(id);
            point.insert(id, Matrix::from_fn(r, c, |_, _| value));
        }
    }
    Ok(points)
}

/// Scale factors currently carried by the function nodes, keyed by name.
pub(crate) fn current_delta_plan(g: &Graph) -> BTreeMap<String, f64> {
    g.func_nodes()
        .into_iter()
        .map(|id| {
            let delta = match g.kind(id) {
                NodeKind::Func { delta, .. } => *delta,
                _ => unreachable!(),
            };
            (g.name(id).to_string(), delta)
        })
        .collect()
}
