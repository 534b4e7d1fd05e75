//! The per-sample eigenvalue margin at a function node.

use super::{block_layout, BlockLayout, CurvatureError, CurvatureState, MarginRecord};
use crate::graph::{Activations, Graph, NodeId, NodeKind};
use crate::tensor::{sym_eig_min, JACOBI_TOL};

/// Margin of the convexity inequality at function node `node`, one value per
/// stored block:
///
/// `margin[j] = lambda_min(block_j) + min_i grad[i,j] * s''(d*x_ij) / s'(d*x_ij)^2`
///
/// The node's scale factor enters through the argument `d*x`; the chain-rule
/// powers of `d` cancel between numerator and denominator of the quotient.
pub fn function_margin(
    g: &Graph,
    acts: &Activations,
    state: &CurvatureState,
    node: NodeId,
) -> Result<MarginRecord, CurvatureError> {
    let (func, delta) = match g.kind(node) {
        NodeKind::Func { func, delta } => (*func, *delta),
        _ => {
            return Err(CurvatureError::Graph(crate::graph::GraphError::NotAFunctionNode {
                node: g.name(node).to_string(),
            }))
        }
    };
    let blocks = state
        .blocks_at(node)
        .ok_or_else(|| CurvatureError::NoPathToLoss { variable: g.name(node).to_string() })?;
    let grad = state.grad(node).expect("gradient accompanies blocks");
    let input = g.inputs(node)[0];
    let x = acts.get(input);
    let (rows, cols) = x.shape();

    let quotient = |i: usize, j: usize| -> Result<f64, CurvatureError> {
        let arg = delta * x.get(i, j);
        let d1 = func.d1(arg);
        let d2 = func.d2(arg);
        if d1 == 0.0 {
            if d2 == 0.0 {
                Ok(0.0)
            } else {
                Err(CurvatureError::SingularDerivative {
                    node: g.name(node).to_string(),
                    row: i,
                    col: j,
                })
            }
        } else {
            Ok(grad.get(i, j) * d2 / (d1 * d1))
        }
    };

    let mut lambda_min = Vec::new();
    let mut correction = Vec::new();
    let mut margin = Vec::new();
    match block_layout(blocks, (rows, cols)) {
        BlockLayout::PerColumn => {
            for j in 0..cols {
                let lm = sym_eig_min(blocks.block(j), JACOBI_TOL)?;
                let mut corr = f64::INFINITY;
                for i in 0..rows {
                    corr = corr.min(quotient(i, j)?);
                }
                lambda_min.push(lm);
                correction.push(corr);
                margin.push(lm + corr);
            }
        }
        BlockLayout::Flattened => {
            let lm = sym_eig_min(blocks.block(0), JACOBI_TOL)?;
            let mut corr = f64::INFINITY;
            for i in 0..rows {
                for j in 0..cols {
                    corr = corr.min(quotient(i, j)?);
                }
            }
            lambda_min.push(lm);
            correction.push(corr);
            margin.push(lm + corr);
        }
    }

    Ok(MarginRecord { node: g.name(node).to_string(), lambda_min, correction, margin })
}
