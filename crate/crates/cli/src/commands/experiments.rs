//! `variance` and `converge`: desk-scale training studies over a factor grid.

use crate::config::RunConfig;
use crate::manifest::write_manifest;
use anyhow::Result;
use convexcert_core::chart::LineChart;
use convexcert_core::graph::FunctionId;
use convexcert_core::train::{
    certified_fraction_csv, parity_sequences, reference_csv, run_convergence_experiment,
    run_variance_experiment, runs_csv, summary_csv, ExperimentConfig, ExperimentResult, ModelSpec,
    OptimConfig, TaskData,
};
use std::path::Path;

fn experiment_config(cfg: &RunConfig) -> ExperimentConfig {
    ExperimentConfig {
        optim: OptimConfig {
            rho: cfg.rho,
            eps: cfg.eps,
            momentum: cfg.momentum,
            l2: cfg.l2,
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
        },
        ..ExperimentConfig::default()
    }
}

/// Built-in tasks by name; a path ending in `.csv` loads an 8x8 digit file.
fn task_setup(cfg: &RunConfig, default: &str) -> Result<(ModelSpec, TaskData)> {
    let name = cfg.dataset.clone().unwrap_or_else(|| default.to_string());
    if name == "parity" {
        return Ok((
            ModelSpec::UnrolledRnn { steps: 6, hidden: 8, func: FunctionId::Tanh },
            TaskData::Sequence(parity_sequences(6)),
        ));
    }
    let data = super::tabular_dataset(&name, cfg).map_err(|e| {
        anyhow::anyhow!("{e} (expected blobs, digits, moons, parity or a .csv path)")
    })?;
    let spec = ModelSpec::Mlp {
        input: data.feature_dim(),
        hidden: vec![16],
        output: data.class_count(),
        func: FunctionId::Sigmoid,
    };
    Ok((spec, TaskData::Tabular(data)))
}

fn accuracy_chart(result: &ExperimentResult, deltas: &[f64], epochs: usize) -> LineChart {
    let mut chart = LineChart::new("evaluation accuracy by epoch", "epoch", "accuracy");
    for &delta in deltas {
        let runs: Vec<_> =
            result.runs.iter().filter(|r| r.delta == delta && !r.diverged).collect();
        if runs.is_empty() {
            continue;
        }
        let points: Vec<(f64, f64)> = (1..=epochs)
            .filter_map(|e| {
                let accs: Vec<f64> = runs
                    .iter()
                    .filter_map(|r| r.epochs.get(e - 1).map(|rec| rec.eval_accuracy))
                    .collect();
                if accs.is_empty() {
                    None
                } else {
                    Some((e as f64, accs.iter().sum::<f64>() / accs.len() as f64))
                }
            })
            .collect();
        chart.add_series(&format!("delta={delta}"), points);
    }
    chart
}

fn write_result_tree(
    dir: &Path,
    cfg: &RunConfig,
    command: &str,
    result: &ExperimentResult,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("runs.csv"), runs_csv(result))?;
    std::fs::write(dir.join("summary.csv"), summary_csv(result))?;
    std::fs::write(dir.join("cert_fraction.csv"), certified_fraction_csv(result))?;
    std::fs::write(dir.join("reference.csv"), reference_csv())?;
    let chart = accuracy_chart(result, &cfg.deltas, cfg.epochs);
    std::fs::write(dir.join("accuracy_curves.svg"), chart.render())?;
    write_manifest(dir, command, cfg)?;
    Ok(())
}

fn report(result: &ExperimentResult) -> i32 {
    for s in &result.summaries {
        println!(
            "delta {:>4}: acc mean {:.4} std {:.2e} max {:.4} min {:.4} | conv epoch {:.1} | certified fraction {} | diverged {}",
            s.delta,
            s.mean_acc,
            s.std_acc,
            s.max_acc,
            s.min_acc,
            s.mean_convergence_epoch,
            s.mean_certified_fraction.map(|f| format!("{f:.3}")).unwrap_or_else(|| "-".into()),
            s.diverged_runs,
        );
    }
    println!(
        "reference trends from full-scale runs are written alongside the results \
         (reference.csv); they orient the desk-scale numbers and gate nothing."
    );
    let total = result.runs.len();
    let diverged = result.runs.iter().filter(|r| r.diverged).count();
    if diverged == total {
        eprintln!("all {total} runs diverged");
        1
    } else {
        0
    }
}

pub fn run_variance(cfg: &RunConfig) -> Result<i32> {
    let (spec, data) = task_setup(cfg, "blobs")?;
    let result =
        run_variance_experiment(&spec, &data, &cfg.deltas, &cfg.seeds, &experiment_config(cfg))?;
    write_result_tree(&cfg.out.join("variance"), cfg, "variance", &result)?;
    Ok(report(&result))
}

pub fn run_converge(cfg: &RunConfig) -> Result<i32> {
    let (spec, data) = task_setup(cfg, "parity")?;
    let result = run_convergence_experiment(
        &spec,
        &data,
        &cfg.deltas,
        &cfg.seeds,
        &experiment_config(cfg),
    )?;
    write_result_tree(&cfg.out.join("converge"), cfg, "converge", &result)?;
    Ok(report(&result))
}
