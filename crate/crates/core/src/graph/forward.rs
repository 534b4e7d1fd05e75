//! Forward evaluation of a graph under concrete bindings.

use super::{Bindings, Graph, GraphError, NodeId, NodeKind};
use crate::tensor::{matmul, Matrix};

/// Activation for every node, indexed by [`NodeId`], produced by one forward
/// pass. Values are immutable once computed.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    values: Vec<Matrix>,
}

impl Activations {
    pub fn get(&self, id: NodeId) -> &Matrix {
        &self.values[id.index()]
    }

    /// Scalar loss value (the designated sink is always 1x1).
    pub fn loss_value(&self, g: &Graph) -> f64 {
        self.get(g.loss_node()).get(0, 0)
    }
}

/// Valid-mode, single-channel 2-D cross-correlation.
///
/// Output shape is `(a.rows - k.rows + 1, a.cols - k.cols + 1)`.
pub fn conv_valid(a: &Matrix, k: &Matrix) -> Result<Matrix, GraphError> {
    let (ar, ac) = a.shape();
    let (kr, kc) = k.shape();
    if kr > ar || kc > ac {
        return Err(GraphError::KernelTooLarge {
            image_rows: ar,
            image_cols: ac,
            kernel_rows: kr,
            kernel_cols: kc,
        });
    }
    let mut out = Matrix::zeros(ar - kr + 1, ac - kc + 1);
    for i in 0..out.rows() {
        for j in 0..out.cols() {
            let mut acc = 0.0;
            for u in 0..kr {
                for v in 0..kc {
                    acc += a.get(i + u, j + v) * k.get(u, v);
                }
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

fn loss_value(
    g: &Graph,
    node: NodeId,
    prediction: &Matrix,
    label: &Matrix,
) -> Result<f64, GraphError> {
    let name = || g.name(node).to_string();
    match g.kind(node) {
        NodeKind::Loss(super::LossId::Square) => {
            let mut acc = 0.0;
            for (y, t) in prediction.data().iter().zip(label.data()) {
                let d = y - t;
                acc += d * d;
            }
            Ok(0.5 * acc)
        }
        NodeKind::Loss(super::LossId::Absolute) => {
            Ok(prediction.data().iter().zip(label.data()).map(|(y, t)| (y - t).abs()).sum())
        }
        NodeKind::Loss(super::LossId::CrossEntropy) => {
            let mut acc = 0.0;
            for (&y, &t) in prediction.data().iter().zip(label.data()) {
                if !(y > 0.0 && y < 1.0) {
                    return Err(GraphError::CrossEntropyDomain { node: name(), value: y });
                }
                if !(0.0..=1.0).contains(&t) {
                    return Err(GraphError::CrossEntropyLabel { node: name(), value: t });
                }
                acc -= t * y.ln() + (1.0 - t) * (1.0 - y).ln();
            }
            Ok(acc)
        }
        _ => unreachable!("loss_value called on non-loss node"),
    }
}

/// Evaluates every node in topological order. All input and parameter nodes
/// must be bound with matrices of their declared shapes; any non-finite
/// activation is rejected naming the node that produced it.
pub fn forward(g: &Graph, bindings: &Bindings) -> Result<Activations, GraphError> {
    for (&id, value) in bindings {
        if !g.kind(id).is_bindable() {
            return Err(GraphError::NotBindable { node: g.name(id).to_string() });
        }
        let declared = g.shape(id);
        if value.shape() != declared {
            return Err(GraphError::BindingShape {
                node: g.name(id).to_string(),
                rows: declared.0,
                cols: declared.1,
                got_rows: value.rows(),
                got_cols: value.cols(),
            });
        }
    }

    let mut values: Vec<Matrix> = Vec::with_capacity(g.node_count());
    for id in g.ids() {
        let value = match g.kind(id) {
            NodeKind::Input | NodeKind::Parameter => bindings
                .get(&id)
                .cloned()
                .ok_or_else(|| GraphError::UnboundNode { node: g.name(id).to_string() })?,
            NodeKind::Plus => {
                let ins = g.inputs(id);
                values[ins[0].index()].add(&values[ins[1].index()])?
            }
            NodeKind::ElemMul => {
                let ins = g.inputs(id);
                values[ins[0].index()].hadamard(&values[ins[1].index()])?
            }
            NodeKind::MatMul => {
                let ins = g.inputs(id);
                matmul(&values[ins[0].index()], &values[ins[1].index()])?
            }
            NodeKind::Conv => {
                let ins = g.inputs(id);
                conv_valid(&values[ins[0].index()], &values[ins[1].index()])?
            }
            NodeKind::Func { func, delta } => {
                let x = &values[g.inputs(id)[0].index()];
                let (f, d) = (*func, *delta);
                x.map(|v| f.value(d * v))
            }
            NodeKind::Loss(_) => {
                let ins = g.inputs(id);
                let v = loss_value(g, id, &values[ins[0].index()], &values[ins[1].index()])?;
                Matrix::from_vec(1, 1, vec![v]).expect("1x1")
            }
        };
        if !value.all_finite() {
            return Err(GraphError::NonFinite { node: g.name(id).to_string() });
        }
        values.push(value);
    }
    Ok(Activations { values })
}
