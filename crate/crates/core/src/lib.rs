//! Convexity certificates for computation graphs.
//!
//! The crate evaluates neural-style computation graphs, propagates
//! per-sample second-order curvature blocks backward from the loss to a
//! chosen variable, checks a per-sample eigenvalue margin at every
//! nonlinearity on the way, and reports whether the objective is certifiably
//! convex in that variable at the evaluated point. A scale-factor search
//! shrinks nonlinearities (`s(x) -> s(delta * x)`) until the certificate
//! holds, a finite-difference oracle provides independent ground truth, and a
//! small training harness runs seeded variance/convergence experiments.

pub mod chart;
pub mod curvature;
pub mod graph;
pub mod oracle;
pub mod rng;
pub mod sampling;
pub mod tensor;
pub mod train;

pub use graph::{
    apply_scale, conv_valid, detect_circles, forward, Activations, Bindings, CirclePath,
    FunctionId, Graph, GraphBuilder, GraphError, LossId, NodeId, NodeKind,
};
pub use tensor::{matmul, quadform, sym_eig_min, sym_eig_values, Matrix, PerSampleBlocks, TensorError};
