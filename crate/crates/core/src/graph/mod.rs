//! Computation-graph vocabulary and the immutable [`Graph`] value.
//!
//! A graph is a DAG of input, parameter, operator, function and loss nodes,
//! stored in topological order with shapes resolved at construction time.
//! Recurrent models are represented by explicit unrolling with shared
//! parameter nodes, so "one parameter feeding a node through two or more
//! branches" is the only cycle-like structure that can occur; see
//! [`detect_circles`].

mod builder;
mod circles;
mod forward;
mod json;
mod scale;

pub use builder::GraphBuilder;
pub use circles::{detect_circles, CirclePath};
pub use forward::{conv_valid, forward, Activations};
pub use json::{graph_from_json, graph_to_json, load_graph, save_graph, GraphIoError};
pub use scale::{apply_scale, uniform_scale_plan};

use crate::tensor::TensorError;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Stable handle for a node inside one [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Bindings supply matrices for every input and parameter node.
pub type Bindings = BTreeMap<NodeId, crate::tensor::Matrix>;

/// Element-wise nonlinearity with analytic first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionId {
    Sigmoid,
    Tanh,
    Relu,
    Sin,
    Square,
}

impl FunctionId {
    pub const ALL: [FunctionId; 5] = [
        FunctionId::Sigmoid,
        FunctionId::Tanh,
        FunctionId::Relu,
        FunctionId::Sin,
        FunctionId::Square,
    ];

    pub fn value(self, x: f64) -> f64 {
        match self {
            FunctionId::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            FunctionId::Tanh => x.tanh(),
            FunctionId::Relu => x.max(0.0),
            FunctionId::Sin => x.sin(),
            FunctionId::Square => x * x,
        }
    }

    /// First derivative. The rectifier's subgradient at exactly zero is 0.
    pub fn d1(self, x: f64) -> f64 {
        match self {
            FunctionId::Sigmoid => {
                let s = self.value(x);
                s * (1.0 - s)
            }
            FunctionId::Tanh => {
                let s = x.tanh();
                1.0 - s * s
            }
            FunctionId::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            FunctionId::Sin => x.cos(),
            FunctionId::Square => 2.0 * x,
        }
    }

    /// Second derivative. The rectifier's distributional spike at zero is
    /// ignored; it is treated as zero everywhere.
    pub fn d2(self, x: f64) -> f64 {
        match self {
            FunctionId::Sigmoid => {
                let s = self.value(x);
                (1.0 - 2.0 * s) * s * (1.0 - s)
            }
            FunctionId::Tanh => {
                let s = x.tanh();
                -2.0 * s * (1.0 - s * s)
            }
            FunctionId::Relu => 0.0,
            FunctionId::Sin => -x.sin(),
            FunctionId::Square => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FunctionId::Sigmoid => "sigmoid",
            FunctionId::Tanh => "tanh",
            FunctionId::Relu => "relu",
            FunctionId::Sin => "sin",
            FunctionId::Square => "square",
        }
    }

    pub fn parse(s: &str) -> Option<FunctionId> {
        match s {
            "sigmoid" => Some(FunctionId::Sigmoid),
            "tanh" => Some(FunctionId::Tanh),
            "relu" => Some(FunctionId::Relu),
            "sin" => Some(FunctionId::Sin),
            "square" => Some(FunctionId::Square),
            _ => None,
        }
    }
}

/// Loss attached to the designated sink node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossId {
    Square,
    Absolute,
    CrossEntropy,
}

impl LossId {
    pub fn name(self) -> &'static str {
        match self {
            LossId::Square => "square",
            LossId::Absolute => "absolute",
            LossId::CrossEntropy => "cross_entropy",
        }
    }

    pub fn parse(s: &str) -> Option<LossId> {
        match s {
            "square" => Some(LossId::Square),
            "absolute" => Some(LossId::Absolute),
            "cross_entropy" => Some(LossId::CrossEntropy),
            _ => None,
        }
    }
}

/// Node vocabulary. `Conv` is a valid-mode, single-channel 2-D
/// cross-correlation of `inputs[0]` (image) with `inputs[1]` (kernel).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    Input,
    Parameter,
    Plus,
    ElemMul,
    MatMul,
    Conv,
    /// Element-wise `s(delta * x)` with `delta` in (0, 1]; 1 means unscaled.
    Func { func: FunctionId, delta: f64 },
    Loss(LossId),
}

impl NodeKind {
    pub fn kind_name(&self) -> &'static str {
        match self {
            NodeKind::Input => "input",
            NodeKind::Parameter => "parameter",
            NodeKind::Plus => "plus",
            NodeKind::ElemMul => "elem_mul",
            NodeKind::MatMul => "matmul",
            NodeKind::Conv => "conv",
            NodeKind::Func { .. } => "func",
            NodeKind::Loss(_) => "loss",
        }
    }

    pub fn is_bindable(&self) -> bool {
        matches!(self, NodeKind::Input | NodeKind::Parameter)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub(crate) name: String,
    pub(crate) kind: NodeKind,
    pub(crate) inputs: Vec<NodeId>,
    pub(crate) shape: (usize, usize),
}

/// Immutable DAG with resolved shapes and a designated loss sink.
///
/// Nodes are stored in topological order; construction goes through
/// [`GraphBuilder`] or the JSON loader, both of which validate shape
/// consistency per node kind.
#[derive(Debug, Clone)]
pub struct Graph {
    pub(crate) nodes: Vec<Node>,
    pub(crate) loss: NodeId,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        if self.loss != other.loss || self.nodes.len() != other.nodes.len() {
            return false;
        }
        self.nodes.iter().zip(&other.nodes).all(|(a, b)| {
            a.name == b.name && a.kind == b.kind && a.inputs == b.inputs && a.shape == b.shape
        })
    }
}

impl Graph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Node ids in topological order.
    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn kind(&self, id: NodeId) -> &NodeKind {
        &self.nodes[id.0].kind
    }

    pub fn inputs(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].inputs
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].shape
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id.0].name
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(NodeId)
    }

    pub fn loss_node(&self) -> NodeId {
        self.loss
    }

    pub fn loss_id(&self) -> LossId {
        match self.nodes[self.loss.0].kind {
            NodeKind::Loss(id) => id,
            _ => unreachable!("loss node has loss kind by construction"),
        }
    }

    /// Prediction input of the loss node (its first input).
    pub fn prediction_node(&self) -> NodeId {
        self.nodes[self.loss.0].inputs[0]
    }

    /// Label input of the loss node (its second input).
    pub fn label_node(&self) -> NodeId {
        self.nodes[self.loss.0].inputs[1]
    }

    pub fn parameters(&self) -> Vec<NodeId> {
        self.ids().filter(|&id| matches!(self.kind(id), NodeKind::Parameter)).collect()
    }

    pub fn func_nodes(&self) -> Vec<NodeId> {
        self.ids().filter(|&id| matches!(self.kind(id), NodeKind::Func { .. })).collect()
    }

    /// Nodes that must be bound before a forward pass.
    pub fn bindable_nodes(&self) -> Vec<NodeId> {
        self.ids().filter(|&id| self.kind(id).is_bindable()).collect()
    }

    /// Per-node flag: does `id`'s subtree contain `target` (including
    /// `id == target`)?
    pub(crate) fn depends_on(&self, target: NodeId) -> Vec<bool> {
        let mut dep = vec![false; self.nodes.len()];
        dep[target.0] = true;
        for idx in 0..self.nodes.len() {
            if dep[idx] {
                continue;
            }
            dep[idx] = self.nodes[idx].inputs.iter().any(|input| dep[input.0]);
        }
        dep
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("duplicate node name '{0}'")]
    DuplicateName(String),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("node '{node}' expects {expected} inputs, got {got}")]
    ArityMismatch { node: String, expected: usize, got: usize },
    #[error("node '{node}': input shapes {left_rows}x{left_cols} and {right_rows}x{right_cols} are incompatible")]
    ShapeMismatch {
        node: String,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("conv kernel {kernel_rows}x{kernel_cols} larger than image {image_rows}x{image_cols}")]
    KernelTooLarge {
        image_rows: usize,
        image_cols: usize,
        kernel_rows: usize,
        kernel_cols: usize,
    },
    #[error("node '{node}': scale factor {delta} outside (0, 1]")]
    InvalidDelta { node: String, delta: f64 },
    #[error("loss node '{node}' must be a sink (it feeds other nodes)")]
    LossNotSink { node: String },
    #[error("loss label '{node}' must be an input node")]
    LabelNotInput { node: String },
    #[error("graph has no loss node")]
    MissingLoss,
    #[error("graph has more than one loss node ('{first}' and '{second}')")]
    MultipleLoss { first: String, second: String },
    #[error("node '{node}' is not bound")]
    UnboundNode { node: String },
    #[error("binding for '{node}' has shape {got_rows}x{got_cols}, declared {rows}x{cols}")]
    BindingShape { node: String, rows: usize, cols: usize, got_rows: usize, got_cols: usize },
    #[error("node '{node}' is not bindable (only input and parameter nodes take bindings)")]
    NotBindable { node: String },
    #[error("non-finite value produced at node '{node}'")]
    NonFinite { node: String },
    #[error("cross entropy at '{node}': prediction entry {value} outside (0, 1)")]
    CrossEntropyDomain { node: String, value: f64 },
    #[error("cross entropy at '{node}': label entry {value} outside [0, 1]")]
    CrossEntropyLabel { node: String, value: f64 },
    #[error("node '{node}' is not a function node")]
    NotAFunctionNode { node: String },
    #[error("'{node}' is not a parameter node")]
    VariableNotParameter { node: String },
    #[error("unknown node kind '{kind}'")]
    UnknownKind { kind: String },
    #[error("unknown function '{name}'")]
    UnknownFunction { name: String },
    #[error("unknown loss '{name}'")]
    UnknownLoss { name: String },
    #[error("node '{node}': missing required field '{field}'")]
    MissingField { node: String, field: &'static str },
    #[error("node '{node}' references '{input}' before it is defined (nodes must be listed in evaluation order)")]
    ForwardReference { node: String, input: String },
    #[error("invalid shape for node '{node}': dimensions must be positive")]
    InvalidShape { node: String },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        // Central differences of the value map; the rectifier kink at zero is
        // excluded because no finite-difference stencil is valid across it.
        let mut x = -5.0f64;
        let mut points = Vec::new();
        while x <= 5.0 {
            points.push(x);
            x += 0.101;
        }
        for f in FunctionId::ALL {
            for &x in &points {
                if f == FunctionId::Relu && x.abs() < 1e-3 {
                    continue;
                }
                let h1 = 1e-6;
                let fd1 = (f.value(x + h1) - f.value(x - h1)) / (2.0 * h1);
                let d1 = f.d1(x);
                assert!(
                    (fd1 - d1).abs() <= 1e-6 * d1.abs().max(1.0),
                    "{}: d1 mismatch at {x}: fd {fd1} vs analytic {d1}",
                    f.name()
                );
                let h2 = 1e-4;
                let fd2 = (f.value(x + h2) - 2.0 * f.value(x) + f.value(x - h2)) / (h2 * h2);
                let d2 = f.d2(x);
                assert!(
                    (fd2 - d2).abs() <= 1e-6 * d2.abs().max(1.0),
                    "{}: d2 mismatch at {x}: fd {fd2} vs analytic {d2}",
                    f.name()
                );
            }
        }
    }

    #[test]
    fn relu_subgradient_at_zero() {
        assert_eq!(FunctionId::Relu.d1(0.0), 0.0);
        assert_eq!(FunctionId::Relu.d2(0.0), 0.0);
    }

    #[test]
    fn function_names_round_trip() {
        for f in FunctionId::ALL {
            assert_eq!(FunctionId::parse(f.name()), Some(f));
        }
        assert_eq!(FunctionId::parse("gelu"), None);
    }
}
