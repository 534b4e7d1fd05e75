//! Backward curvature propagation and per-variable convexity certificates.
//!
//! Starting from the loss, first-order gradients and per-sample second-order
//! blocks are pushed back along the unique loss-to-variable path. Operator
//! nodes transform the blocks by congruence with their (linear) local maps;
//! each function node contributes a diagonal term and is scored by the
//! eigenvalue margin checked in [`function_margin`]. A point is certified for
//! a variable when every margin along the path is nonnegative and no circle
//! exists.

mod blocks;
mod certify;
mod gradient;
mod margin;
mod report;
mod seed;

pub use blocks::{assemble_hessian, backprop_blocks, loss_to_variable_path};
pub use certify::{certify, search_delta, GridEntry, ScaleSearchOutcome};
pub use gradient::gradients;
pub use margin::function_margin;
pub use report::{certificate_document, margins_csv, CertificateDocument, PointReport};
pub use seed::loss_seed;

use crate::graph::{Graph, GraphError, NodeId};
use crate::tensor::{Matrix, PerSampleBlocks, TensorError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurvatureError {
    #[error("variable '{variable}' reaches the loss through a circle meeting at '{meet}'")]
    Circle { variable: String, meet: String },
    #[error("loss does not depend on variable '{variable}'")]
    NoPathToLoss { variable: String },
    #[error("loss label depends on variable '{variable}'; labels must be constants")]
    LabelDependsOnVariable { variable: String },
    #[error("cross entropy seed: prediction entry {value} outside (0, 1)")]
    CrossEntropyDomain { value: f64 },
    #[error("cross entropy seed: label entry {value} outside [0, 1]")]
    CrossEntropyLabel { value: f64 },
    #[error("function node '{node}': first derivative vanishes at entry ({row},{col}) with nonzero curvature; margin undefined")]
    SingularDerivative { node: String, row: usize, col: usize },
    #[error("scale grid {reason}")]
    InvalidGrid { reason: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// How the stored blocks of a node relate to its activation matrix.
///
/// Blocks stay per-column (one symmetric block per batch sample) while every
/// step between the node and the loss maps columns to columns. Crossing a
/// column-mixing step (a product with the variable side on the left, or a
/// convolution) collapses them into a single block over the row-major
/// flattened node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockLayout {
    PerColumn,
    Flattened,
}

pub(crate) fn block_layout(blocks: &PerSampleBlocks, shape: (usize, usize)) -> BlockLayout {
    if blocks.sample_count() == shape.1 && blocks.block_dim() == shape.0 {
        BlockLayout::PerColumn
    } else {
        debug_assert_eq!(blocks.sample_count(), 1);
        debug_assert_eq!(blocks.block_dim(), shape.0 * shape.1);
        BlockLayout::Flattened
    }
}

/// First-order gradients and second-order blocks gathered along one
/// loss-to-variable path.
#[derive(Debug, Clone)]
pub struct CurvatureState {
    pub(crate) grads: BTreeMap<NodeId, Matrix>,
    pub(crate) blocks: BTreeMap<NodeId, PerSampleBlocks>,
    pub(crate) path: Vec<NodeId>,
}

impl CurvatureState {
    /// Gradient of the loss with respect to a path node.
    pub fn grad(&self, id: NodeId) -> Option<&Matrix> {
        self.grads.get(&id)
    }

    /// Second-order blocks of the loss with respect to a path node.
    pub fn blocks_at(&self, id: NodeId) -> Option<&PerSampleBlocks> {
        self.blocks.get(&id)
    }

    /// Nodes from the loss down to the variable, inclusive.
    pub fn path(&self) -> &[NodeId] {
        &self.path
    }

    pub fn layout(&self, g: &Graph, id: NodeId) -> Option<BlockLayout> {
        self.blocks.get(&id).map(|b| block_layout(b, g.shape(id)))
    }
}

/// Verdict floor for margin signs. The eigensolver stops at an absolute
/// off-diagonal norm of 1e-10, so an exactly-zero eigenvalue of a singular
/// positive-semidefinite block can legitimately come back as a tiny negative;
/// treating anything above this floor as nonnegative keeps verdicts stable
/// without touching the recorded values.
pub const MARGIN_FLOOR: f64 = -1e-9;

/// Margin of the convexity inequality at one function node, per sample.
///
/// `margin[j] == lambda_min[j] + correction[j]` exactly as computed;
/// `correction[j]` is the minimum over entries of `g * s'' / (s')^2` for
/// sample `j` (a single entry spans the whole flattened node when the blocks
/// are [`BlockLayout::Flattened`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRecord {
    pub node: String,
    pub lambda_min: Vec<f64>,
    pub correction: Vec<f64>,
    #[serde(rename = "per_sample")]
    pub margin: Vec<f64>,
}

impl MarginRecord {
    pub fn min_margin(&self) -> f64 {
        self.margin.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Nonnegative up to [`MARGIN_FLOOR`].
    pub fn all_nonnegative(&self) -> bool {
        self.margin.iter().all(|&m| m >= MARGIN_FLOOR)
    }
}

/// Outcome of certifying one variable at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    MarginViolated { node: String },
    CircleUncertified { meet: String },
}

impl Verdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, Verdict::Certified)
    }
}

/// Serializable mirror of a [`crate::graph::CirclePath`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleReport {
    pub variable: String,
    pub meet: String,
    pub branches: Vec<Vec<String>>,
}

/// Pointwise certificate for one variable: margins along the loss-to-variable
/// path, detected circles, and the resulting verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub variable: String,
    pub point_id: String,
    pub verdict: Verdict,
    pub margins: Vec<MarginRecord>,
    pub circles: Vec<CircleReport>,
}

impl CertificateReport {
    pub fn min_margin(&self) -> Option<f64> {
        if self.margins.is_empty() {
            None
        } else {
            Some(self.margins.iter().map(MarginRecord::min_margin).fold(f64::INFINITY, f64::min))
        }
    }

    pub fn margin_for(&self, node: &str) -> Option<&MarginRecord> {
        self.margins.iter().find(|m| m.node == node)
    }
}

pub(crate) fn circle_reports(g: &Graph, circles: &[crate::graph::CirclePath]) -> Vec<CircleReport> {
    circles
        .iter()
        .map(|c| CircleReport {
            variable: g.name(c.variable).to_string(),
            meet: g.name(c.meet).to_string(),
            branches: c
                .branches
                .iter()
                .map(|b| b.iter().map(|&id| g.name(id).to_string()).collect())
                .collect(),
        })
        .collect()
}
