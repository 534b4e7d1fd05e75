//! Seeded variance and convergence experiments over a grid of scale factors.

use super::{
    adadelta_step, AdaDeltaState, EpochRecord, ModelGraph, ModelSpec, OptimConfig, RunRecord,
    SequenceDataset, TabularDataset, TrainError,
};
use crate::curvature::{certify, gradients, Verdict};
use crate::graph::{apply_scale, forward, uniform_scale_plan, Bindings, GraphError};
use crate::rng::SeedStreams;
use crate::tensor::Matrix;
use rand::seq::SliceRandom;
use std::collections::BTreeMap;

/// Training data for one experiment.
#[derive(Debug, Clone)]
pub enum TaskData {
    Tabular(TabularDataset),
    Sequence(SequenceDataset),
}

impl TaskData {
    fn len(&self) -> usize {
        match self {
            TaskData::Tabular(d) => d.len(),
            TaskData::Sequence(d) => d.len(),
        }
    }

    fn split(&self, eval_fraction: f64, streams: &SeedStreams) -> (TaskData, TaskData) {
        match self {
            TaskData::Tabular(d) => {
                let (a, b) = d.split(eval_fraction, streams);
                (TaskData::Tabular(a), TaskData::Tabular(b))
            }
            TaskData::Sequence(d) => {
                let (a, b) = d.split(eval_fraction, streams);
                (TaskData::Sequence(a), TaskData::Sequence(b))
            }
        }
    }

    fn subset(&self, idx: &[usize]) -> TaskData {
        match self {
            TaskData::Tabular(d) => TaskData::Tabular(d.subset(idx)),
            TaskData::Sequence(d) => TaskData::Sequence(d.subset(idx)),
        }
    }

    fn classes(&self) -> &[usize] {
        match self {
            TaskData::Tabular(d) => &d.classes,
            TaskData::Sequence(d) => &d.classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub optim: OptimConfig,
    pub eval_fraction: f64,
    /// Held-out batch size used for the end-of-training certificate check.
    pub cert_batch: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { optim: OptimConfig::default(), eval_fraction: 0.25, cert_batch: 8 }
    }
}

/// Spread of final accuracies across seeds for one scale factor.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DeltaSummary {
    pub delta: f64,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub max_acc: f64,
    pub min_acc: f64,
    pub mean_convergence_epoch: f64,
    pub mean_certified_fraction: Option<f64>,
    pub diverged_runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<DeltaSummary>,
}

impl ExperimentResult {
    pub fn summary_for(&self, delta: f64) -> Option<&DeltaSummary> {
        self.summaries.iter().find(|s| s.delta == delta)
    }
}

/// Multi-seed training across a factor grid, reporting the accuracy spread
/// per factor (the stabilization study).
pub fn run_variance_experiment(
    spec: &ModelSpec,
    data: &TaskData,
    deltas: &[f64],
    seeds: &[u64],
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult, TrainError> {
    run_experiment(spec, data, deltas, seeds, cfg)
}

/// Multi-seed training across a factor grid, reporting epochs-to-convergence
/// and per-epoch curves (the acceleration study). The measurements are the
/// same as the variance study; the two entry points exist because reports
/// emphasize different columns.
pub fn run_convergence_experiment(
    spec: &ModelSpec,
    data: &TaskData,
    deltas: &[f64],
    seeds: &[u64],
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult, TrainError> {
    run_experiment(spec, data, deltas, seeds, cfg)
}

fn run_experiment(
    spec: &ModelSpec,
    data: &TaskData,
    deltas: &[f64],
    seeds: &[u64],
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult, TrainError> {
    cfg.optim.validate()?;
    if data.len() == 0 {
        return Err(TrainError::EmptyDataset);
    }
    if seeds.len() < 2 {
        return Err(TrainError::TooFewSeeds(seeds.len()));
    }
    if let Some(&bad) = deltas.iter().find(|&&d| !(d > 0.0 && d <= 1.0)) {
        return Err(TrainError::InvalidDelta(bad));
    }
    let mut runs = Vec::with_capacity(deltas.len() * seeds.len());
    for &delta in deltas {
        for &seed in seeds {
            runs.push(run_single(spec, data, delta, seed, cfg)?);
        }
    }
    let summaries = deltas.iter().map(|&d| summarize(&runs, d)).collect();
    Ok(ExperimentResult { runs, summaries })
}

fn summarize(runs: &[RunRecord], delta: f64) -> DeltaSummary {
    let group: Vec<&RunRecord> = runs.iter().filter(|r| r.delta == delta).collect();
    let finished: Vec<&&RunRecord> = group.iter().filter(|r| !r.diverged).collect();
    let accs: Vec<f64> = finished.iter().map(|r| r.final_accuracy).collect();
    let mean = if accs.is_empty() { 0.0 } else { accs.iter().sum::<f64>() / accs.len() as f64 };
    let std = if accs.len() < 2 {
        0.0
    } else {
        (accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (accs.len() - 1) as f64).sqrt()
    };
    let fractions: Vec<f64> = finished.iter().filter_map(|r| r.certified_fraction).collect();
    DeltaSummary {
        delta,
        mean_acc: mean,
        std_acc: std,
        max_acc: accs.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0),
        min_acc: accs.iter().copied().fold(f64::INFINITY, f64::min).min(1.0),
        mean_convergence_epoch: if finished.is_empty() {
            0.0
        } else {
            finished.iter().map(|r| r.convergence_epoch as f64).sum::<f64>()
                / finished.len() as f64
        },
        mean_certified_fraction: if fractions.is_empty() {
            None
        } else {
            Some(fractions.iter().sum::<f64>() / fractions.len() as f64)
        },
        diverged_runs: group.len() - finished.len(),
    }
}

/// Graphs per batch size, with the run's scale factor already applied.
struct GraphCache<'a> {
    spec: &'a ModelSpec,
    delta: f64,
    built: BTreeMap<usize, ModelGraph>,
}

impl<'a> GraphCache<'a> {
    fn new(spec: &'a ModelSpec, delta: f64) -> Self {
        GraphCache { spec, delta, built: BTreeMap::new() }
    }

    fn get(&mut self, batch: usize) -> Result<&ModelGraph, GraphError> {
        if !self.built.contains_key(&batch) {
            let mut model = self.spec.build(batch)?;
            model.graph = apply_scale(&model.graph, &uniform_scale_plan(&model.graph, self.delta))?;
            self.built.insert(batch, model);
        }
        Ok(&self.built[&batch])
    }
}

fn batch_bindings(model: &ModelGraph, data: &TaskData, params: &[Matrix]) -> Bindings {
    let mut bindings: Bindings = Bindings::new();
    for (node, value) in model.params.iter().zip(params) {
        bindings.insert(*node, value.clone());
    }
    match data {
        TaskData::Tabular(d) => {
            bindings.insert(model.feature_inputs[0], d.features.clone());
            bindings.insert(model.label, d.labels.clone());
        }
        TaskData::Sequence(d) => {
            for (t, step) in d.steps.iter().enumerate() {
                bindings.insert(model.feature_inputs[t], step.clone());
            }
            let h0 = model.feature_inputs[d.steps.len()];
            let (hr, hc) = model.graph.shape(h0);
            bindings.insert(h0, Matrix::zeros(hr, hc));
            bindings.insert(model.label, d.labels.clone());
        }
    }
    bindings
}

fn accuracy(model: &ModelGraph, data: &TaskData, params: &[Matrix]) -> Result<f64, TrainError> {
    let bindings = batch_bindings(model, data, params);
    let acts = forward(&model.graph, &bindings)?;
    let output = acts.get(model.output);
    let classes = data.classes();
    let mut correct = 0usize;
    for (j, &class) in classes.iter().enumerate() {
        let predicted = if output.rows() == 1 {
            usize::from(output.get(0, j) > 0.5)
        } else {
            (0..output.rows())
                .max_by(|&a, &b| {
                    output.get(a, j).partial_cmp(&output.get(b, j)).expect("finite activations")
                })
                .unwrap_or(0)
        };
        if predicted == class {
            correct += 1;
        }
    }
    Ok(correct as f64 / classes.len().max(1) as f64)
}

/// Share of nonnegative per-sample margins at the current parameters over a
/// held-out batch, pooled across the certificates of every parameter the
/// path propagation can reach (parameters inside circles are skipped).
/// `None` when no parameter is certifiable at all.
fn certified_fraction(
    model: &ModelGraph,
    data: &TaskData,
    params: &[Matrix],
) -> Result<Option<f64>, TrainError> {
    let bindings = batch_bindings(model, data, params);
    let mut total = 0usize;
    let mut nonnegative = 0usize;
    for &variable in &model.params {
        let report = certify(&model.graph, &bindings, variable)?;
        if matches!(report.verdict, Verdict::CircleUncertified { .. }) {
            continue;
        }
        for record in &report.margins {
            for &m in &record.margin {
                total += 1;
                if m >= crate::curvature::MARGIN_FLOOR {
                    nonnegative += 1;
                }
            }
        }
    }
    if total == 0 {
        Ok(None)
    } else {
        Ok(Some(nonnegative as f64 / total as f64))
    }
}

fn is_divergence(err: &TrainError) -> bool {
    matches!(
        err,
        TrainError::NonFiniteGradient { .. }
            | TrainError::Graph(GraphError::NonFinite { .. })
            | TrainError::Curvature(crate::curvature::CurvatureError::Graph(
                GraphError::NonFinite { .. }
            ))
    )
}

fn run_single(
    spec: &ModelSpec,
    data: &TaskData,
    delta: f64,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<RunRecord, TrainError> {
    let streams = SeedStreams::new(seed);
    let (train, eval) = data.split(cfg.eval_fraction, &streams);
    let mut params: Vec<Matrix> =
        spec.init_params(&streams).into_iter().map(|(_, m)| m).collect();
    let mut states: Vec<AdaDeltaState> =
        params.iter().map(|p| AdaDeltaState::zeros(p.rows(), p.cols())).collect();
    let mut cache = GraphCache::new(spec, delta);

    let mut epochs: Vec<EpochRecord> = Vec::with_capacity(cfg.optim.epochs);
    let mut diverged = false;

    'training: for epoch in 1..=cfg.optim.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut streams.stream("shuffle", epoch as u64));
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.optim.batch_size) {
            let batch = train.subset(chunk);
            let model = cache.get(chunk.len())?;
            let bindings = batch_bindings(model, &batch, &params);
            let acts = match forward(&model.graph, &bindings) {
                Ok(a) => a,
                Err(GraphError::NonFinite { .. }) => {
                    diverged = true;
                    break 'training;
                }
                Err(e) => return Err(e.into()),
            };
            loss_sum += acts.loss_value(&model.graph);
            let grads = gradients(&model.graph, &acts)?;
            for (idx, node) in model.params.clone().iter().enumerate() {
                let grad = &grads[node.index()];
                match adadelta_step(&mut params[idx], grad, &mut states[idx], &cfg.optim) {
                    Ok(()) => {}
                    Err(e) if is_divergence(&e) => {
                        diverged = true;
                        break 'training;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        let eval_model = cache.get(eval.len())?;
        let eval_accuracy = match accuracy(eval_model, &eval, &params) {
            Ok(a) => a,
            Err(e) if is_divergence(&e) => {
                diverged = true;
                break 'training;
            }
            Err(e) => return Err(e),
        };
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len().max(1) as f64,
            eval_accuracy,
        });
    }

    let final_accuracy = epochs.last().map(|e| e.eval_accuracy).unwrap_or(0.0);
    let convergence_epoch = epochs
        .iter()
        .find(|e| e.eval_accuracy >= 0.99 * final_accuracy)
        .map(|e| e.epoch)
        .unwrap_or(0);

    let certified = if diverged {
        None
    } else {
        let cert_n = cfg.cert_batch.min(eval.len()).max(1);
        let cert_idx: Vec<usize> = (0..cert_n).collect();
        let cert_data = eval.subset(&cert_idx);
        let model = cache.get(cert_n)?;
        certified_fraction(model, &cert_data, &params)?
    };

    Ok(RunRecord {
        delta,
        seed,
        epochs,
        final_accuracy,
        convergence_epoch,
        diverged,
        certified_fraction: certified,
    })
}

/// Per-epoch rows: `delta,seed,epoch,train_loss,eval_acc`.
pub fn runs_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("delta,seed,epoch,train_loss,eval_acc\n");
    for run in &result.runs {
        for e in &run.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                run.delta, run.seed, e.epoch, e.train_loss, e.eval_accuracy
            ));
        }
    }
    out
}

/// Per-factor rows: `delta,mean_acc,std_acc,max_acc,min_acc,mean_conv_epoch`.
pub fn summary_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("delta,mean_acc,std_acc,max_acc,min_acc,mean_conv_epoch\n");
    for s in &result.summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.delta, s.mean_acc, s.std_acc, s.max_acc, s.min_acc, s.mean_convergence_epoch
        ));
    }
    out
}

/// Per-run rows: `delta,seed,certified_fraction` (blank when inapplicable).
pub fn certified_fraction_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("delta,seed,certified_fraction\n");
    for run in &result.runs {
        let f = run.certified_fraction.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", run.delta, run.seed, f));
    }
    out
}

/// Reference metrics from full-scale runs of the same scale mechanism: a
/// large sigmoid image classifier trained five times per factor (accuracy
/// spread) and a recurrent text matcher (epochs to convergence). Desk-scale
/// results are compared against these trends for orientation only; they are
/// never pass/fail gates.
pub struct FullScaleReference {
    pub image_accuracy_by_delta: [(f64, f64); 4],
    pub image_std_by_delta: [(f64, f64); 4],
    pub image_max_by_delta: [(f64, f64); 4],
    pub image_min_by_delta: [(f64, f64); 4],
    pub text_accuracy_by_delta: [(f64, f64); 4],
    pub text_convergence_epoch_by_delta: [(f64, f64); 4],
}

pub const FULL_SCALE_REFERENCE: FullScaleReference = FullScaleReference {
    image_accuracy_by_delta: [(1.0, 0.9720), (0.9, 0.9717), (0.5, 0.9709), (0.3, 0.9624)],
    image_std_by_delta: [(1.0, 4.649e-3), (0.9, 3.835e-3), (0.5, 1.006e-3), (0.3, 2.649e-3)],
    image_max_by_delta: [(1.0, 0.9770), (0.9, 0.9752), (0.5, 0.9719), (0.3, 0.9695)],
    image_min_by_delta: [(1.0, 0.9641), (0.9, 0.9693), (0.5, 0.9695), (0.3, 0.9607)],
    text_accuracy_by_delta: [(1.0, 0.7273), (0.8, 0.7274), (0.5, 0.7290), (0.1, 0.7301)],
    text_convergence_epoch_by_delta: [(1.0, 12.0), (0.8, 10.0), (0.5, 11.0), (0.1, 11.0)],
};

/// Reference trends as CSV rows `source,delta,metric,value`.
pub fn reference_csv() -> String {
    let mut out = String::from("source,delta,metric,value\n");
    let r = &FULL_SCALE_REFERENCE;
    for (name, rows) in [
        ("accuracy", &r.image_accuracy_by_delta),
        ("std", &r.image_std_by_delta),
        ("max", &r.image_max_by_delta),
        ("min", &r.image_min_by_delta),
    ] {
        for (delta, value) in rows.iter() {
            out.push_str(&format!("image_classifier_reference,{delta},{name},{value}\n"));
        }
    }
    for (name, rows) in [
        ("accuracy", &r.text_accuracy_by_delta),
        ("conv_epoch", &r.text_convergence_epoch_by_delta),
    ] {
        for (delta, value) in rows.iter() {
            out.push_str(&format!("text_matcher_reference,{delta},{name},{value}\n"));
        }
    }
    out
}
