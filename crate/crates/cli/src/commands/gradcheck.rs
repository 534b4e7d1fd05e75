//! `gradcheck`: analytic gradients and curvature blocks against the
//! finite-difference oracle.

use super::{load_graph_file, resolve_variable, sample_points};
use crate::config::RunConfig;
use anyhow::{Context, Result};
use convexcert_core::curvature::{assemble_hessian, backprop_blocks, gradients};
use convexcert_core::graph::{detect_circles, forward, Graph, NodeId};
use convexcert_core::oracle::{fd_gradient, fd_hessian, FdConfig, FD_HESSIAN_ENTRY_LIMIT};
use convexcert_core::tensor::Matrix;

pub const GRADIENT_TOLERANCE: f64 = 1e-5;
pub const HESSIAN_TOLERANCE: f64 = 1e-4;

/// Worst per-entry disagreement between two gradients, relative to the
/// larger of the entry pair and a scale floor (a thousandth of the gradient's
/// largest magnitude, at least 1e-3).
pub fn worst_gradient_entry(analytic: &Matrix, fd: &Matrix) -> (usize, usize, f64) {
    let floor = 1e-3 * 1.0f64.max(analytic.max_abs()).max(fd.max_abs());
    let mut worst = (0, 0, 0.0f64);
    for i in 0..analytic.rows() {
        for j in 0..analytic.cols() {
            let (a, f) = (analytic.get(i, j), fd.get(i, j));
            let rel = (a - f).abs() / a.abs().max(f.abs()).max(floor);
            if rel > worst.2 {
                worst = (i, j, rel);
            }
        }
    }
    worst
}

/// Relative Frobenius disagreement between two Hessians.
pub fn hessian_rel_error(analytic: &Matrix, fd: &Matrix) -> f64 {
    let diff = analytic.sub(fd).expect("same shape");
    diff.frobenius_norm() / fd.frobenius_norm().max(1e-12)
}

struct GradOffender {
    node: String,
    row: usize,
    col: usize,
    rel: f64,
}

fn check_gradients(
    g: &Graph,
    bindings: &convexcert_core::graph::Bindings,
    fd_cfg: &FdConfig,
) -> Result<GradOffender> {
    let acts = forward(g, bindings)?;
    let grads = gradients(g, &acts)?;
    let mut worst = GradOffender { node: String::new(), row: 0, col: 0, rel: 0.0 };
    for param in g.parameters() {
        let fd = fd_gradient(g, bindings, param, fd_cfg)?;
        let (row, col, rel) = worst_gradient_entry(&grads[param.index()], &fd);
        if rel > worst.rel {
            worst =
                GradOffender { node: g.name(param).to_string(), row, col, rel };
        }
    }
    Ok(worst)
}

fn check_hessian(
    g: &Graph,
    bindings: &convexcert_core::graph::Bindings,
    variable: NodeId,
    fd_cfg: &FdConfig,
) -> Result<Option<f64>> {
    if !detect_circles(g, variable)?.is_empty() {
        println!(
            "hessian check skipped: '{}' reaches the loss through a circle",
            g.name(variable)
        );
        return Ok(None);
    }
    let entries = {
        let (r, c) = g.shape(variable);
        r * c
    };
    if entries > FD_HESSIAN_ENTRY_LIMIT {
        println!("hessian check skipped: {entries} entries exceed the probe limit");
        return Ok(None);
    }
    let acts = forward(g, bindings)?;
    let state = backprop_blocks(g, &acts, variable)?;
    let analytic = assemble_hessian(g, &state, variable)?;
    let fd = fd_hessian(g, bindings, variable, fd_cfg)?;
    Ok(Some(hessian_rel_error(&analytic, &fd)))
}

pub fn run(cfg: &RunConfig) -> Result<i32> {
    let g = load_graph_file(cfg)?;
    let variable = resolve_variable(&g, cfg)?;
    let bindings = sample_points(&g, cfg)?
        .into_iter()
        .next()
        .context("sampler produced no points")?;
    let fd_cfg = FdConfig { grad_step: cfg.fd_step_grad, hess_step: cfg.fd_step_hess };

    let worst = check_gradients(&g, &bindings, &fd_cfg)?;
    let grad_ok = worst.rel <= GRADIENT_TOLERANCE;
    println!(
        "gradient check: worst offender {}[{},{}] rel {:.3e} ({})",
        worst.node,
        worst.row,
        worst.col,
        worst.rel,
        if grad_ok { "ok" } else { "FAIL" }
    );

    let hess = check_hessian(&g, &bindings, variable, &fd_cfg)?;
    let hess_ok = match hess {
        Some(rel) => {
            let ok = rel <= HESSIAN_TOLERANCE;
            println!(
                "hessian check: '{}' relative frobenius {:.3e} ({})",
                g.name(variable),
                rel,
                if ok { "ok" } else { "FAIL" }
            );
            ok
        }
        None => true,
    };

    Ok(if grad_ok && hess_ok { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A corrupted analytic Hessian must trip the comparison: the check has
    /// to be able to fail.
    #[test]
    fn corrupted_curvature_is_flagged() {
        let h = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let mut corrupted = h.clone();
        // The kind of error a wrong second-derivative formula produces.
        corrupted.set(0, 0, 2.0 * 1.5);
        assert!(hessian_rel_error(&h, &h) <= 1e-15);
        assert!(hessian_rel_error(&corrupted, &h) > HESSIAN_TOLERANCE);
    }

    #[test]
    fn gradient_offender_reports_scaled_relative_error() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let mut b = a.clone();
        b.set(0, 1, 1e-4);
        let (i, j, rel) = worst_gradient_entry(&a, &b);
        assert_eq!((i, j), (0, 1));
        // Denominator is the scale floor (1e-3 of the max entry, floored at
        // 1e-3), not the tiny entry itself.
        assert!((rel - 0.1).abs() < 1e-12);
    }
}
