//! Adaptive-decay parameter updates with momentum and L2 regularization.
//!
//! Per step, with `g` the regularized gradient:
//!
//! ```text
//! E[g^2]  <- rho E[g^2]  + (1 - rho) g^2
//! dx      <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
//! E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
//! v       <- momentum v + dx
//! theta   <- theta + v
//! ```

use super::{OptimConfig, TrainError};
use crate::tensor::Matrix;

/// Running accumulators for one parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaDeltaState {
    avg_sq_grad: Matrix,
    avg_sq_update: Matrix,
    velocity: Matrix,
}

impl AdaDeltaState {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        AdaDeltaState {
            avg_sq_grad: Matrix::zeros(rows, cols),
            avg_sq_update: Matrix::zeros(rows, cols),
            velocity: Matrix::zeros(rows, cols),
        }
    }
}

/// Applies one update in place. The L2 term `l2 * theta` is added to the raw
/// gradient before the accumulators see it. Non-finite gradients abort the
/// step so the caller can flag the run as diverged.
pub fn adadelta_step(
    param: &mut Matrix,
    grad: &Matrix,
    state: &mut AdaDeltaState,
    cfg: &OptimConfig,
) -> Result<(), TrainError> {
    if !grad.all_finite() {
        return Err(TrainError::NonFiniteGradient { param: String::from("<unnamed>") });
    }
    let (rows, cols) = param.shape();
    debug_assert_eq!(grad.shape(), (rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            let g = grad.get(i, j) + cfg.l2 * param.get(i, j);
            let eg2 = cfg.rho * state.avg_sq_grad.get(i, j) + (1.0 - cfg.rho) * g * g;
            state.avg_sq_grad.set(i, j, eg2);
            let dx = -((state.avg_sq_update.get(i, j) + cfg.eps).sqrt()
                / (eg2 + cfg.eps).sqrt())
                * g;
            state
                .avg_sq_update
                .set(i, j, cfg.rho * state.avg_sq_update.get(i, j) + (1.0 - cfg.rho) * dx * dx);
            let v = cfg.momentum * state.velocity.get(i, j) + dx;
            state.velocity.set(i, j, v);
            param.set(i, j, param.get(i, j) + v);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> OptimConfig {
        OptimConfig { rho: 0.95, eps: 1e-6, momentum: 0.6, l2: 0.0, ..OptimConfig::default() }
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = Matrix::from_vec(1, 2, vec![0.3, -0.7]).unwrap();
        let before = p.clone();
        let mut state = AdaDeltaState::zeros(1, 2);
        adadelta_step(&mut p, &Matrix::zeros(1, 2), &mut state, &cfg()).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_scalar_step_matches_hand_evaluation() {
        // g = 1, fresh state: dx = -sqrt(1e-6)/sqrt(0.05 + 1e-6)
        let mut p = Matrix::from_vec(1, 1, vec![0.0]).unwrap();
        let mut state = AdaDeltaState::zeros(1, 1);
        adadelta_step(&mut p, &Matrix::from_vec(1, 1, vec![1.0]).unwrap(), &mut state, &cfg())
            .unwrap();
        let expected = -(1e-6f64).sqrt() / (0.05f64 + 1e-6).sqrt();
        assert!((p.get(0, 0) - expected).abs() < 1e-12);
        assert!((p.get(0, 0) - (-0.0044721)).abs() < 1e-6);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut p = Matrix::from_vec(2, 1, vec![0.5, -0.25]).unwrap();
            let mut state = AdaDeltaState::zeros(2, 1);
            let c = cfg();
            for step in 0..25 {
                let g = Matrix::from_vec(2, 1, vec![(step as f64 * 0.1).sin(), 0.2]).unwrap();
                adadelta_step(&mut p, &g, &mut state, &c).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = Matrix::zeros(1, 1);
        let mut state = AdaDeltaState::zeros(1, 1);
        let g = Matrix::from_vec(1, 1, vec![f64::NAN]).unwrap();
        assert!(matches!(
            adadelta_step(&mut p, &g, &mut state, &cfg()),
            Err(TrainError::NonFiniteGradient { .. })
        ));
    }
}
