//! Curvature seeds at the loss node.

use super::CurvatureError;
use crate::graph::LossId;
use crate::tensor::{Matrix, PerSampleBlocks, TensorError};

/// Gradient and per-sample blocks of the loss with respect to its prediction
/// input `y`, given the label `yhat`.
///
/// - square `0.5 * sum (y - yhat)^2`: gradient `y - yhat`, identity blocks;
/// - absolute `sum |y - yhat|`: gradient `sign(y - yhat)` with `sign(0) = 0`,
///   zero blocks;
/// - cross entropy: gradient `-yhat/y + (1-yhat)/(1-y)`, diagonal blocks
///   `yhat/y^2 + (1-yhat)/(1-y)^2`; predictions must lie strictly in (0, 1).
pub fn loss_seed(
    loss: LossId,
    y: &Matrix,
    yhat: &Matrix,
) -> Result<(Matrix, PerSampleBlocks), CurvatureError> {
    if y.shape() != yhat.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "loss_seed",
            left_rows: y.rows(),
            left_cols: y.cols(),
            right_rows: yhat.rows(),
            right_cols: yhat.cols(),
        }
        .into());
    }
    let (n, m) = y.shape();
    match loss {
        LossId::Square => {
            let grad = y.sub(yhat)?;
            Ok((grad, PerSampleBlocks::identities(n, m)))
        }
        LossId::Absolute => {
            let grad = Matrix::from_fn(n, m, |i, j| {
                let d = y.get(i, j) - yhat.get(i, j);
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            });
            Ok((grad, PerSampleBlocks::zeros(n, m)))
        }
        LossId::CrossEntropy => {
            for &v in y.data() {
                if !(v > 0.0 && v < 1.0) {
                    return Err(CurvatureError::CrossEntropyDomain { value: v });
                }
            }
            for &t in yhat.data() {
                if !(0.0..=1.0).contains(&t) {
                    return Err(CurvatureError::CrossEntropyLabel { value: t });
                }
            }
            let grad = Matrix::from_fn(n, m, |i, j| {
                let (p, t) = (y.get(i, j), yhat.get(i, j));
                -t / p + (1.0 - t) / (1.0 - p)
            });
            let mut blocks = Vec::with_capacity(m);
            for j in 0..m {
                let mut b = Matrix::zeros(n, n);
                for i in 0..n {
                    let (p, t) = (y.get(i, j), yhat.get(i, j));
                    b.set(i, i, t / (p * p) + (1.0 - t) / ((1.0 - p) * (1.0 - p)));
                }
                blocks.push(b);
            }
            Ok((grad, PerSampleBlocks::from_blocks(blocks)?))
        }
    }
}
