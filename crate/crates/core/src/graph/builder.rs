//! Shape-checked construction of [`Graph`] values.

use super::{FunctionId, Graph, GraphError, LossId, Node, NodeId, NodeKind};

/// Appends nodes in evaluation order; every method validates shapes eagerly
/// so a built graph never fails shape checks at forward time.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        GraphBuilder { nodes: Vec::new() }
    }

    fn push(&mut self, name: &str, kind: NodeKind, inputs: Vec<NodeId>, shape: (usize, usize)) -> Result<NodeId, GraphError> {
        if self.nodes.iter().any(|n| n.name == name) {
            return Err(GraphError::DuplicateName(name.to_string()));
        }
        if shape.0 == 0 || shape.1 == 0 {
            return Err(GraphError::InvalidShape { node: name.to_string() });
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { name: name.to_string(), kind, inputs, shape });
        Ok(id)
    }

    fn shape_of(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].shape
    }

    fn same_shape(&self, name: &str, a: NodeId, b: NodeId) -> Result<(usize, usize), GraphError> {
        let (ar, ac) = self.shape_of(a);
        let (br, bc) = self.shape_of(b);
        if (ar, ac) != (br, bc) {
            return Err(GraphError::ShapeMismatch {
                node: name.to_string(),
                left_rows: ar,
                left_cols: ac,
                right_rows: br,
                right_cols: bc,
            });
        }
        Ok((ar, ac))
    }

    pub fn input(&mut self, name: &str, rows: usize, cols: usize) -> Result<NodeId, GraphError> {
        self.push(name, NodeKind::Input, vec![], (rows, cols))
    }

    pub fn parameter(&mut self, name: &str, rows: usize, cols: usize) -> Result<NodeId, GraphError> {
        self.push(name, NodeKind::Parameter, vec![], (rows, cols))
    }

    pub fn plus(&mut self, name: &str, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let shape = self.same_shape(name, a, b)?;
        self.push(name, NodeKind::Plus, vec![a, b], shape)
    }

    pub fn elem_mul(&mut self, name: &str, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let shape = self.same_shape(name, a, b)?;
        self.push(name, NodeKind::ElemMul, vec![a, b], shape)
    }

    pub fn matmul(&mut self, name: &str, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let (ar, ac) = self.shape_of(a);
        let (br, bc) = self.shape_of(b);
        if ac != br {
            return Err(GraphError::ShapeMismatch {
                node: name.to_string(),
                left_rows: ar,
                left_cols: ac,
                right_rows: br,
                right_cols: bc,
            });
        }
        self.push(name, NodeKind::MatMul, vec![a, b], (ar, bc))
    }

    /// Valid-mode cross-correlation of `image` with `kernel`.
    pub fn conv(&mut self, name: &str, image: NodeId, kernel: NodeId) -> Result<NodeId, GraphError> {
        let (ir, ic) = self.shape_of(image);
        let (kr, kc) = self.shape_of(kernel);
        if kr > ir || kc > ic {
            return Err(GraphError::KernelTooLarge {
                image_rows: ir,
                image_cols: ic,
                kernel_rows: kr,
                kernel_cols: kc,
            });
        }
        self.push(name, NodeKind::Conv, vec![image, kernel], (ir - kr + 1, ic - kc + 1))
    }

    pub fn func(&mut self, name: &str, func: FunctionId, delta: f64, x: NodeId) -> Result<NodeId, GraphError> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(GraphError::InvalidDelta { node: name.to_string(), delta });
        }
        let shape = self.shape_of(x);
        self.push(name, NodeKind::Func { func, delta }, vec![x], shape)
    }

    /// Loss over `(prediction, label)`. The label must be an input node; it is
    /// a constant for differentiation.
    pub fn loss(&mut self, name: &str, loss: LossId, prediction: NodeId, label: NodeId) -> Result<NodeId, GraphError> {
        self.same_shape(name, prediction, label)?;
        if !matches!(self.nodes[label.0].kind, NodeKind::Input) {
            return Err(GraphError::LabelNotInput { node: self.nodes[label.0].name.clone() });
        }
        self.push(name, NodeKind::Loss(loss), vec![prediction, label], (1, 1))
    }

    /// Finalizes the graph: exactly one loss node, and it must be a sink.
    pub fn build(self) -> Result<Graph, GraphError> {
        let mut loss: Option<usize> = None;
        for (idx, node) in self.nodes.iter().enumerate() {
            if matches!(node.kind, NodeKind::Loss(_)) {
                if let Some(first) = loss {
                    return Err(GraphError::MultipleLoss {
                        first: self.nodes[first].name.clone(),
                        second: node.name.clone(),
                    });
                }
                loss = Some(idx);
            }
        }
        let loss = loss.ok_or(GraphError::MissingLoss)?;
        for node in &self.nodes {
            if node.inputs.iter().any(|i| i.0 == loss) {
                return Err(GraphError::LossNotSink { node: self.nodes[loss].name.clone() });
            }
        }
        Ok(Graph { nodes: self.nodes, loss: NodeId(loss) })
    }
}
