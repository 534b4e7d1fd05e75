//! Whole-graph first-order gradients by reverse accumulation.
//!
//! Unlike the path-restricted block propagation, this pass handles shared
//! parameters (circles) naturally by summing adjoint contributions, so it is
//! what the training harness uses.

use super::{loss_seed, CurvatureError};
use crate::graph::{Activations, Graph, NodeId, NodeKind};
use crate::tensor::{matmul, Matrix};

/// Gradient of the scalar loss with respect to every node, indexed by node.
/// Nodes that do not influence the loss get zero matrices.
pub fn gradients(g: &Graph, acts: &Activations) -> Result<Vec<Matrix>, CurvatureError> {
    let n = g.node_count();
    let mut adj: Vec<Matrix> = (0..n).map(|i| {
        let (r, c) = g.shape(NodeId(i));
        Matrix::zeros(r, c)
    }).collect();
    adj[g.loss_node().index()] = Matrix::from_vec(1, 1, vec![1.0]).expect("1x1");

    for idx in (0..n).rev() {
        let id = NodeId(idx);
        let out_adj = adj[idx].clone();
        if out_adj.max_abs() == 0.0 {
            continue;
        }
        match g.kind(id) {
            NodeKind::Input | NodeKind::Parameter => {}
            NodeKind::Plus => {
                let ins = g.inputs(id).to_vec();
                adj[ins[0].index()].add_scaled(&out_adj, 1.0)?;
                adj[ins[1].index()].add_scaled(&out_adj, 1.0)?;
            }
            NodeKind::ElemMul => {
                let ins = g.inputs(id).to_vec();
                let da = out_adj.hadamard(acts.get(ins[1]))?;
                let db = out_adj.hadamard(acts.get(ins[0]))?;
                adj[ins[0].index()].add_scaled(&da, 1.0)?;
                adj[ins[1].index()].add_scaled(&db, 1.0)?;
            }
            NodeKind::MatMul => {
                let ins = g.inputs(id).to_vec();
                let a = acts.get(ins[0]);
                let b = acts.get(ins[1]);
                let da = matmul(&out_adj, &b.transpose())?;
                let db = matmul(&a.transpose(), &out_adj)?;
                adj[ins[0].index()].add_scaled(&da, 1.0)?;
                adj[ins[1].index()].add_scaled(&db, 1.0)?;
            }
            NodeKind::Conv => {
                let ins = g.inputs(id).to_vec();
                let image = acts.get(ins[0]);
                let kernel = acts.get(ins[1]);
                let (kr, kc) = kernel.shape();
                // d image[p,q] collects kernel-weighted output adjoints.
                let mut dimg = Matrix::zeros(image.rows(), image.cols());
                for i in 0..out_adj.rows() {
                    for j in 0..out_adj.cols() {
                        let go = out_adj.get(i, j);
                        if go == 0.0 {
                            continue;
                        }
                        for u in 0..kr {
                            for v in 0..kc {
                                let cur = dimg.get(i + u, j + v);
                                dimg.set(i + u, j + v, cur + go * kernel.get(u, v));
                            }
                        }
                    }
                }
                // d kernel = valid cross-correlation of the image with the
                // output adjoint.
                let mut dker = Matrix::zeros(kr, kc);
                for u in 0..kr {
                    for v in 0..kc {
                        let mut acc = 0.0;
                        for i in 0..out_adj.rows() {
                            for j in 0..out_adj.cols() {
                                acc += image.get(i + u, j + v) * out_adj.get(i, j);
                            }
                        }
                        dker.set(u, v, acc);
                    }
                }
                adj[ins[0].index()].add_scaled(&dimg, 1.0)?;
                adj[ins[1].index()].add_scaled(&dker, 1.0)?;
            }
            NodeKind::Func { func, delta } => {
                let input = g.inputs(id)[0];
                let (f, d) = (*func, *delta);
                let x = acts.get(input);
                let local = x.map(|v| d * f.d1(d * v));
                let da = out_adj.hadamard(&local)?;
                adj[input.index()].add_scaled(&da, 1.0)?;
            }
            NodeKind::Loss(loss) => {
                let ins = g.inputs(id).to_vec();
                let (seed, _) = loss_seed(*loss, acts.get(ins[0]), acts.get(ins[1]))?;
                // out_adj is 1x1; scale the seed by it (normally 1).
                adj[ins[0].index()].add_scaled(&seed, out_adj.get(0, 0))?;
            }
        }
    }
    Ok(adj)
}
