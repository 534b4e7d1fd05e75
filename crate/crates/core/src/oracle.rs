//! Independent ground truth: central finite-difference gradients and
//! Hessians, a noise-aware PSD check, and the empirical residual ratio for
//! graphs with circles.
//!
//! Nothing here shares code with the analytic propagation it validates;
//! every number comes from re-evaluating the graph at perturbed bindings.

use crate::curvature::{assemble_hessian, backprop_blocks, CurvatureError};
use crate::graph::{
    apply_scale, forward, uniform_scale_plan, Bindings, Graph, GraphBuilder,
    GraphError, NodeId, NodeKind,
};
use crate::tensor::{Matrix, TensorError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("finite-difference step {step} outside [1e-7, 1e-2]")]
    StepOutOfRange { step: f64 },
    #[error("variable '{variable}' has {entries} entries; finite-difference Hessians are limited to {limit}")]
    VariableTooLarge { variable: String, entries: usize, limit: usize },
    #[error("'{node}' is not bound; finite differences need a concrete value to perturb")]
    VariableUnbound { node: String },
    #[error("non-finite loss while probing perturbed bindings: {0}")]
    NonFiniteProbe(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Maximum variable size accepted by [`fd_hessian`]; probing cost grows with
/// the square of the entry count.
pub const FD_HESSIAN_ENTRY_LIMIT: usize = 256;

/// Central-difference configuration. Defaults suit 64-bit precision:
/// 1e-5 for gradients, 1e-4 for Hessians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub grad_step: f64,
    pub hess_step: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { grad_step: 1e-5, hess_step: 1e-4 }
    }
}

impl FdConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        for step in [self.grad_step, self.hess_step] {
            if !(1e-7..=1e-2).contains(&step) {
                return Err(OracleError::StepOutOfRange { step });
            }
        }
        Ok(())
    }
}

fn loss_at(g: &Graph, bindings: &Bindings) -> Result<f64, OracleError> {
    let acts = forward(g, bindings).map_err(|e| match e {
        GraphError::NonFinite { node } => OracleError::NonFiniteProbe(node),
        other => OracleError::Graph(other),
    })?;
    Ok(acts.loss_value(g))
}

fn variable_value<'a>(
    g: &Graph,
    bindings: &'a Bindings,
    variable: NodeId,
) -> Result<&'a Matrix, OracleError> {
    bindings
        .get(&variable)
        .ok_or_else(|| OracleError::VariableUnbound { node: g.name(variable).to_string() })
}

/// Central finite-difference gradient of the scalar loss with respect to
/// `variable`, entry by entry.
pub fn fd_gradient(
    g: &Graph,
    bindings: &Bindings,
    variable: NodeId,
    cfg: &FdConfig,
) -> Result<Matrix, OracleError> {
    cfg.validate()?;
    let base = variable_value(g, bindings, variable)?.clone();
    let eps = cfg.grad_step;
    let mut grad = Matrix::zeros(base.rows(), base.cols());
    let mut probe = bindings.clone();
    for i in 0..base.rows() {
        for j in 0..base.cols() {
            let mut plus = base.clone();
            plus.set(i, j, base.get(i, j) + eps);
            probe.insert(variable, plus);
            let e_plus = loss_at(g, &probe)?;
            let mut minus = base.clone();
            minus.set(i, j, base.get(i, j) - eps);
            probe.insert(variable, minus);
            let e_minus = loss_at(g, &probe)?;
            grad.set(i, j, (e_plus - e_minus) / (2.0 * eps));
        }
    }
    Ok(grad)
}

/// Central finite-difference Hessian over the row-major flattened variable,
/// symmetrized. Limited to [`FD_HESSIAN_ENTRY_LIMIT`] entries.
pub fn fd_hessian(
    g: &Graph,
    bindings: &Bindings,
    variable: NodeId,
    cfg: &FdConfig,
) -> Result<Matrix, OracleError> {
    cfg.validate()?;
    let base = variable_value(g, bindings, variable)?.clone();
    let entries = base.len();
    if entries > FD_HESSIAN_ENTRY_LIMIT {
        return Err(OracleError::VariableTooLarge {
            variable: g.name(variable).to_string(),
            entries,
            limit: FD_HESSIAN_ENTRY_LIMIT,
        });
    }
    let eps = cfg.hess_step;
    let cols = base.cols();
    let mut h = Matrix::zeros(entries, entries);
    let mut probe = bindings.clone();
    let mut eval = |dp: usize, sp: f64, dq: usize, sq: f64| -> Result<f64, OracleError> {
        let mut v = base.clone();
        let (pi, pj) = (dp / cols, dp % cols);
        let (qi, qj) = (dq / cols, dq % cols);
        v.set(pi, pj, v.get(pi, pj) + sp * eps);
        v.set(qi, qj, v.get(qi, qj) + sq * eps);
        probe.insert(variable, v);
        loss_at(g, &probe)
    };
    for p in 0..entries {
        for q in p..entries {
            let pp = eval(p, 1.0, q, 1.0)?;
            let pm = eval(p, 1.0, q, -1.0)?;
            let mp = eval(p, -1.0, q, 1.0)?;
            let mm = eval(p, -1.0, q, -1.0)?;
            let v = (pp - pm - mp + mm) / (4.0 * eps * eps);
            h.set(p, q, v);
            h.set(q, p, v);
        }
    }
    h.symmetrize();
    Ok(h)
}

/// Noise floor for PSD verdicts on finite-difference Hessians:
/// `lambda_min >= -1e-6 * ||H||_F` counts as positive semidefinite.
pub fn psd_tolerance(h: &Matrix) -> f64 {
    -1e-6 * h.frobenius_norm()
}

/// Absolute resolution of the four-point Hessian stencil: each entry carries
/// rounding noise of roughly `eps * |E| / step^2`, and an eigenvalue can
/// collect it across the whole dimension. Below this level the probe cannot
/// distinguish a zero eigenvalue from a negative one, whatever the relative
/// threshold says.
pub fn fd_hessian_resolution(entries: usize, loss_scale: f64, step: f64) -> f64 {
    entries as f64 * f64::EPSILON * loss_scale.max(1.0) / (step * step)
}

/// One measured point of a residual study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualPoint {
    pub delta: f64,
    pub ratio: f64,
}

/// Rewrites `g` so that every structural use of `variable` reads from its own
/// fresh parameter copy; returns the copies (first use keeps the original).
/// With the uses split apart, each copy reaches the loss through a unique
/// path.
fn split_variable_uses(g: &Graph, variable: NodeId) -> Result<(Graph, Vec<NodeId>), OracleError> {
    let (vr, vc) = g.shape(variable);
    let mut builder = GraphBuilder::new();
    let mut remap: Vec<Option<NodeId>> = vec![None; g.node_count()];
    let mut copies: Vec<NodeId> = Vec::new();
    let mut uses = 0usize;

    for id in g.ids() {
        let mut mapped_inputs = Vec::with_capacity(g.inputs(id).len());
        for &input in g.inputs(id) {
            if input == variable {
                uses += 1;
                if uses == 1 {
                    mapped_inputs.push(remap[variable.index()].expect("variable defined before use"));
                } else {
                    let copy_name = format!("{}__use{}", g.name(variable), uses - 1);
                    let copy = builder.parameter(&copy_name, vr, vc)?;
                    copies.push(copy);
                    mapped_inputs.push(copy);
                }
            } else {
                mapped_inputs.push(remap[input.index()].expect("inputs precede consumers"));
            }
        }
        let new_id = match g.kind(id) {
            NodeKind::Input => builder.input(g.name(id), g.shape(id).0, g.shape(id).1)?,
            NodeKind::Parameter => builder.parameter(g.name(id), g.shape(id).0, g.shape(id).1)?,
            NodeKind::Plus => builder.plus(g.name(id), mapped_inputs[0], mapped_inputs[1])?,
            NodeKind::ElemMul => builder.elem_mul(g.name(id), mapped_inputs[0], mapped_inputs[1])?,
            NodeKind::MatMul => builder.matmul(g.name(id), mapped_inputs[0], mapped_inputs[1])?,
            NodeKind::Conv => builder.conv(g.name(id), mapped_inputs[0], mapped_inputs[1])?,
            NodeKind::Func { func, delta } => builder.func(g.name(id), *func, *delta, mapped_inputs[0])?,
            NodeKind::Loss(loss) => builder.loss(g.name(id), *loss, mapped_inputs[0], mapped_inputs[1])?,
        };
        if id == variable {
            copies.insert(0, new_id);
        }
        remap[id.index()] = Some(new_id);
    }
    Ok((builder.build()?, copies))
}

/// Sum of the per-use propagated Hessians: each structural use of the shared
/// variable is treated as an independent parameter and their Hessians are
/// added. For a tree-structured variable this is the exact propagated
/// Hessian; with circles it drops the cross-use terms.
pub fn tree_hessian(
    g: &Graph,
    bindings: &Bindings,
    variable: NodeId,
) -> Result<Matrix, OracleError> {
    let (split, copies) = split_variable_uses(g, variable)?;
    let value = variable_value(g, bindings, variable)?.clone();
    let mut split_bindings: Bindings = Bindings::new();
    for (&id, v) in bindings {
        let mapped = split.find(g.name(id)).expect("names survive the split");
        split_bindings.insert(mapped, v.clone());
    }
    for &copy in &copies {
        split_bindings.insert(copy, value.clone());
    }
    let acts = forward(&split, &split_bindings)?;
    let entries = value.len();
    let mut total = Matrix::zeros(entries, entries);
    for &copy in &copies {
        let state = backprop_blocks(&split, &acts, copy)?;
        let h = assemble_hessian(&split, &state, copy)?;
        total.add_scaled(&h, 1.0)?;
    }
    Ok(total)
}

/// Measures how much of the true curvature the per-use tree approximation
/// misses, for each uniform scale factor:
/// `ratio = ||H_fd - H_tree||_F / max(||H_fd||_F, 1e-12)`.
///
/// Circle-free graphs give a ratio at the finite-difference noise floor; the
/// interesting case is a shared variable, where the ratio tracks the
/// relative size of the cross-use residual.
pub fn residual_ratio(
    g: &Graph,
    bindings: &Bindings,
    variable: NodeId,
    deltas: &[f64],
    cfg: &FdConfig,
) -> Result<Vec<ResidualPoint>, OracleError> {
    cfg.validate()?;
    let entries = variable_value(g, bindings, variable)?.len();
    if entries > FD_HESSIAN_ENTRY_LIMIT {
        return Err(OracleError::VariableTooLarge {
            variable: g.name(variable).to_string(),
            entries,
            limit: FD_HESSIAN_ENTRY_LIMIT,
        });
    }
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let scaled = apply_scale(g, &uniform_scale_plan(g, delta))?;
        let h_fd = fd_hessian(&scaled, bindings, variable, cfg)?;
        let h_tree = tree_hessian(&scaled, bindings, variable)?;
        let diff = h_fd.sub(&h_tree)?;
        let ratio = diff.frobenius_norm() / h_fd.frobenius_norm().max(1e-12);
        out.push(ResidualPoint { delta, ratio });
    }
    Ok(out)
}

/// CSV rows `delta,ratio,seed,graph_id` for residual studies.
pub fn residual_csv(rows: &[(ResidualPoint, u64, &str)]) -> String {
    let mut out = String::from("delta,ratio,seed,graph_id\n");
    for (point, seed, graph_id) in rows {
        out.push_str(&format!("{},{},{},{}\n", point.delta, point.ratio, seed, graph_id));
    }
    out
}
