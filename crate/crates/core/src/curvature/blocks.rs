//! Backward propagation of per-sample second-order blocks along the unique
//! loss-to-variable path.
//!
//! Steps whose local map sends batch columns to batch columns (plus,
//! element-wise products, a product with the fixed operand on the left, and
//! function nodes) keep the per-column block layout. A product entered
//! through its left operand and either side of a convolution mix columns, so
//! crossing one collapses the blocks into a single symmetric matrix over the
//! row-major flattened node; from there the same congruence rules continue on
//! the flattened form. Reaching the variable this way yields its full
//! Hessian directly.

use super::{block_layout, loss_seed, BlockLayout, CurvatureError, CurvatureState};
use crate::graph::{detect_circles, Activations, Graph, NodeId, NodeKind};
use crate::tensor::{matmul, Matrix, PerSampleBlocks};
use std::collections::BTreeMap;

/// The unique node chain from the loss down to `variable`.
///
/// Fails when a circle exists, when the loss does not depend on the variable,
/// or when the dependence runs through the label slot of the loss.
pub fn loss_to_variable_path(g: &Graph, variable: NodeId) -> Result<Vec<NodeId>, CurvatureError> {
    let circles = detect_circles(g, variable)?;
    if let Some(c) = circles.first() {
        return Err(CurvatureError::Circle {
            variable: g.name(variable).to_string(),
            meet: g.name(c.meet).to_string(),
        });
    }
    let dep = g.depends_on(variable);
    if !dep[g.loss_node().index()] {
        return Err(CurvatureError::NoPathToLoss { variable: g.name(variable).to_string() });
    }
    if dep[g.label_node().index()] {
        return Err(CurvatureError::LabelDependsOnVariable {
            variable: g.name(variable).to_string(),
        });
    }
    let mut path = vec![g.loss_node()];
    let mut cur = g.loss_node();
    while cur != variable {
        // Exactly one dependent input: zero is impossible on a dependent
        // node, two or more would be a circle.
        let next = g
            .inputs(cur)
            .iter()
            .copied()
            .find(|i| dep[i.index()])
            .expect("dependent node has a dependent input");
        path.push(next);
        cur = next;
    }
    Ok(path)
}

/// `out[i,i'] = s[i] * b[i,i'] * s[i']`, the congruence with a diagonal map.
fn diag_congruence(b: &Matrix, s: &[f64]) -> Matrix {
    Matrix::from_fn(b.rows(), b.cols(), |i, k| s[i] * b.get(i, k) * s[k])
}

fn add_to_diagonal(m: &mut Matrix, d: &[f64]) {
    for (i, &v) in d.iter().enumerate() {
        let cur = m.get(i, i);
        m.set(i, i, cur + v);
    }
}

/// Expands per-column blocks into the block-diagonal matrix over the
/// row-major flattened node (index `i * cols + j`).
fn flatten_blocks(blocks: &PerSampleBlocks, shape: (usize, usize)) -> Matrix {
    let (rows, cols) = shape;
    debug_assert_eq!(blocks.block_dim(), rows);
    debug_assert_eq!(blocks.sample_count(), cols);
    let dim = rows * cols;
    let mut h = Matrix::zeros(dim, dim);
    for j in 0..cols {
        let b = blocks.block(j);
        for i in 0..rows {
            for i2 in 0..rows {
                h.set(i * cols + j, i2 * cols + j, b.get(i, i2));
            }
        }
    }
    h
}

fn as_flat(blocks: &PerSampleBlocks, shape: (usize, usize)) -> Matrix {
    match block_layout(blocks, shape) {
        BlockLayout::PerColumn => flatten_blocks(blocks, shape),
        BlockLayout::Flattened => blocks.block(0).clone(),
    }
}

/// `J^T h J`, symmetrized.
fn full_congruence(h: &Matrix, j: &Matrix) -> Result<Matrix, CurvatureError> {
    let mut out = matmul(&j.transpose(), &matmul(h, j)?)?;
    out.symmetrize();
    Ok(out)
}

fn single_block(h: Matrix) -> Result<PerSampleBlocks, CurvatureError> {
    Ok(PerSampleBlocks::from_blocks(vec![h])?)
}

/// One backward step across node `c` into its input `a`, transforming
/// `(grad_c, blocks_c)` into `(grad_a, blocks_a)`.
fn step(
    g: &Graph,
    acts: &Activations,
    c: NodeId,
    a: NodeId,
    grad_c: &Matrix,
    blocks_c: &PerSampleBlocks,
) -> Result<(Matrix, PerSampleBlocks), CurvatureError> {
    let c_shape = g.shape(c);
    let layout = block_layout(blocks_c, c_shape);
    match g.kind(c) {
        NodeKind::Plus => Ok((grad_c.clone(), blocks_c.clone())),
        NodeKind::ElemMul => {
            let ins = g.inputs(c);
            let other = if ins[0] == a { ins[1] } else { ins[0] };
            let b_act = acts.get(other);
            let grad_a = grad_c.hadamard(b_act)?;
            let blocks_a = match layout {
                BlockLayout::PerColumn => {
                    let mut out = Vec::with_capacity(blocks_c.sample_count());
                    for j in 0..blocks_c.sample_count() {
                        out.push(diag_congruence(blocks_c.block(j), &b_act.col_slice(j)));
                    }
                    PerSampleBlocks::from_blocks(out)?
                }
                BlockLayout::Flattened => {
                    single_block(diag_congruence(blocks_c.block(0), b_act.data()))?
                }
            };
            Ok((grad_a, blocks_a))
        }
        NodeKind::MatMul => {
            let ins = g.inputs(c);
            if a == ins[1] {
                // c = B a with B fixed: columns map to columns.
                let b = acts.get(ins[0]);
                let grad_a = matmul(&b.transpose(), grad_c)?;
                let blocks_a = match layout {
                    BlockLayout::PerColumn => blocks_c.congruence(b)?,
                    BlockLayout::Flattened => {
                        // J[(i,j),(k,j)] = B[i,k] over flattened indices.
                        let (cr, cc) = c_shape;
                        let (ar, ac) = g.shape(a);
                        debug_assert_eq!(cc, ac);
                        let j = Matrix::from_fn(cr * cc, ar * ac, |ci, ai| {
                            let (i, jc) = (ci / cc, ci % cc);
                            let (k, ja) = (ai / ac, ai % ac);
                            if jc == ja {
                                b.get(i, k)
                            } else {
                                0.0
                            }
                        });
                        single_block(full_congruence(blocks_c.block(0), &j)?)?
                    }
                };
                Ok((grad_a, blocks_a))
            } else {
                // c = a B with B fixed: columns of c mix columns of a, so the
                // blocks collapse to the flattened form.
                let b = acts.get(ins[1]);
                let grad_a = matmul(grad_c, &b.transpose())?;
                let h_c = as_flat(blocks_c, c_shape);
                let (cr, cc) = c_shape;
                let (ar, ac) = g.shape(a);
                debug_assert_eq!(cr, ar);
                // dc[i,j]/da[i,k] = B[k,j]
                let j = Matrix::from_fn(cr * cc, ar * ac, |ci, ai| {
                    let (i, jc) = (ci / cc, ci % cc);
                    let (i2, k) = (ai / ac, ai % ac);
                    if i == i2 {
                        b.get(k, jc)
                    } else {
                        0.0
                    }
                });
                Ok((grad_a, single_block(full_congruence(&h_c, &j)?)?))
            }
        }
        NodeKind::Conv => {
            let ins = g.inputs(c);
            let h_c = as_flat(blocks_c, c_shape);
            let (or, oc) = c_shape;
            if a == ins[0] {
                // Variable side is the image; kernel is fixed.
                let kernel = acts.get(ins[1]);
                let (kr, kc) = kernel.shape();
                let (ar, ac) = g.shape(a);
                let mut grad_a = Matrix::zeros(ar, ac);
                for i in 0..or {
                    for jj in 0..oc {
                        let go = grad_c.get(i, jj);
                        for u in 0..kr {
                            for v in 0..kc {
                                let cur = grad_a.get(i + u, jj + v);
                                grad_a.set(i + u, jj + v, cur + go * kernel.get(u, v));
                            }
                        }
                    }
                }
                // dc[i,j]/da[p,q] = K[p-i, q-j] when the offset is in range.
                let j = Matrix::from_fn(or * oc, ar * ac, |ci, ai| {
                    let (i, jj) = (ci / oc, ci % oc);
                    let (p, q) = (ai / ac, ai % ac);
                    if p >= i && p - i < kr && q >= jj && q - jj < kc {
                        kernel.get(p - i, q - jj)
                    } else {
                        0.0
                    }
                });
                Ok((grad_a, single_block(full_congruence(&h_c, &j)?)?))
            } else {
                // Variable side is the kernel; image is fixed.
                let image = acts.get(ins[0]);
                let (kr, kc) = g.shape(a);
                let mut grad_a = Matrix::zeros(kr, kc);
                for u in 0..kr {
                    for v in 0..kc {
                        let mut acc = 0.0;
                        for i in 0..or {
                            for jj in 0..oc {
                                acc += image.get(i + u, jj + v) * grad_c.get(i, jj);
                            }
                        }
                        grad_a.set(u, v, acc);
                    }
                }
                // dc[i,j]/da[u,v] = image[i+u, j+v]
                let j = Matrix::from_fn(or * oc, kr * kc, |ci, ai| {
                    let (i, jj) = (ci / oc, ci % oc);
                    let (u, v) = (ai / kc, ai % kc);
                    image.get(i + u, jj + v)
                });
                Ok((grad_a, single_block(full_congruence(&h_c, &j)?)?))
            }
        }
        NodeKind::Func { func, delta } => {
            let (f, d) = (*func, *delta);
            let x = acts.get(a);
            // Chain factors of the scaled map t(x) = s(d x).
            let t1 = x.map(|v| d * f.d1(d * v));
            let t2 = x.map(|v| d * d * f.d2(d * v));
            let grad_a = grad_c.hadamard(&t1)?;
            let blocks_a = match layout {
                BlockLayout::PerColumn => {
                    let mut out = Vec::with_capacity(blocks_c.sample_count());
                    for j in 0..blocks_c.sample_count() {
                        let mut b = diag_congruence(blocks_c.block(j), &t1.col_slice(j));
                        let diag: Vec<f64> = (0..x.rows())
                            .map(|i| grad_c.get(i, j) * t2.get(i, j))
                            .collect();
                        add_to_diagonal(&mut b, &diag);
                        out.push(b);
                    }
                    PerSampleBlocks::from_blocks(out)?
                }
                BlockLayout::Flattened => {
                    let mut h = diag_congruence(blocks_c.block(0), t1.data());
                    let diag: Vec<f64> = grad_c
                        .data()
                        .iter()
                        .zip(t2.data())
                        .map(|(&gv, &tv)| gv * tv)
                        .collect();
                    add_to_diagonal(&mut h, &diag);
                    single_block(h)?
                }
            };
            Ok((grad_a, blocks_a))
        }
        NodeKind::Input | NodeKind::Parameter | NodeKind::Loss(_) => {
            unreachable!("path steps never start at leaves or re-enter the loss")
        }
    }
}

/// Propagates the gradient and per-sample blocks from the loss to `variable`
/// along the unique path. Fails if a circle exists for the variable.
pub fn backprop_blocks(
    g: &Graph,
    acts: &Activations,
    variable: NodeId,
) -> Result<CurvatureState, CurvatureError> {
    let path = loss_to_variable_path(g, variable)?;
    let mut grads: BTreeMap<NodeId, Matrix> = BTreeMap::new();
    let mut blocks: BTreeMap<NodeId, PerSampleBlocks> = BTreeMap::new();

    // Crossing the loss node seeds the state at the prediction node.
    let pred = path[1];
    let (seed_grad, seed_blocks) =
        loss_seed(g.loss_id(), acts.get(pred), acts.get(g.label_node()))?;
    grads.insert(pred, seed_grad);
    blocks.insert(pred, seed_blocks);

    for w in path[1..].windows(2) {
        let (c, a) = (w[0], w[1]);
        let grad_c = grads.get(&c).expect("state exists along the path");
        let blocks_c = blocks.get(&c).expect("state exists along the path");
        let (grad_a, blocks_a) = step(g, acts, c, a, grad_c, blocks_c)?;
        grads.insert(a, grad_a);
        blocks.insert(a, blocks_a);
    }

    Ok(CurvatureState { grads, blocks, path })
}

/// Full Hessian of the loss with respect to the flattened variable
/// (row-major index `i * cols + j`), assembled from the propagated blocks.
pub fn assemble_hessian(
    g: &Graph,
    state: &CurvatureState,
    variable: NodeId,
) -> Result<Matrix, CurvatureError> {
    let blocks = state.blocks_at(variable).ok_or_else(|| CurvatureError::NoPathToLoss {
        variable: g.name(variable).to_string(),
    })?;
    Ok(as_flat(blocks, g.shape(variable)))
}
