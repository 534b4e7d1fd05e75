//! Model specifications and their graph realizations.

use crate::graph::{FunctionId, Graph, GraphBuilder, GraphError, NodeId};
use crate::rng::SeedStreams;
use crate::tensor::Matrix;
use rand::Rng;

/// A buildable model family. Graphs carry the batch size in their input
/// shapes, so one spec is instantiated once per distinct batch size.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// Dense feed-forward chain `x -> W1 -> f -> ... -> Wk -> sigmoid`.
    /// The output layer always applies a sigmoid so square and cross-entropy
    /// losses and argmax accuracy are well defined.
    Mlp { input: usize, hidden: Vec<usize>, output: usize, func: FunctionId },
    /// Recurrence `h_t = f(W h_{t-1} + U x_t)` unrolled for a fixed number of
    /// steps with shared weights, read out through `sigmoid(V h_T)`. The
    /// shared `W` makes every outer step a circle for certification.
    UnrolledRnn { steps: usize, hidden: usize, func: FunctionId },
}

/// A built model: the graph plus the node handles training needs.
#[derive(Debug, Clone)]
pub struct ModelGraph {
    pub graph: Graph,
    pub params: Vec<NodeId>,
    /// Tabular models bind one feature input; unrolled recurrences bind one
    /// input per step followed by the initial state.
    pub feature_inputs: Vec<NodeId>,
    pub label: NodeId,
    pub output: NodeId,
}

impl ModelSpec {
    /// Parameter names and shapes, independent of batch size.
    pub fn param_shapes(&self) -> Vec<(String, usize, usize)> {
        match self {
            ModelSpec::Mlp { input, hidden, output, .. } => {
                let mut dims = vec![*input];
                dims.extend_from_slice(hidden);
                dims.push(*output);
                dims.windows(2)
                    .enumerate()
                    .map(|(i, w)| (format!("w{}", i + 1), w[1], w[0]))
                    .collect()
            }
            ModelSpec::UnrolledRnn { hidden, .. } => vec![
                ("w".to_string(), *hidden, *hidden),
                ("u".to_string(), *hidden, 1),
                ("v".to_string(), 1, *hidden),
            ],
        }
    }

    /// Seeded initial parameter values, uniform in `[-1/fan_in, 1/fan_in]`.
    pub fn init_params(&self, streams: &SeedStreams) -> Vec<(String, Matrix)> {
        self.param_shapes()
            .into_iter()
            .enumerate()
            .map(|(idx, (name, rows, cols))| {
                let mut rng = streams.stream("init", idx as u64);
                let bound = 1.0 / cols as f64;
                (name, Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound)))
            })
            .collect()
    }

    pub fn build(&self, batch: usize) -> Result<ModelGraph, GraphError> {
        match self {
            ModelSpec::Mlp { input, hidden, output, func } => {
                let mut b = GraphBuilder::new();
                let x = b.input("x", *input, batch)?;
                let mut dims = vec![*input];
                dims.extend_from_slice(hidden);
                dims.push(*output);
                let mut params = Vec::new();
                let mut current = x;
                for (i, w) in dims.windows(2).enumerate() {
                    let layer = i + 1;
                    let weight = b.parameter(&format!("w{layer}"), w[1], w[0])?;
                    params.push(weight);
                    let z = b.matmul(&format!("z{layer}"), weight, current)?;
                    let act_fn = if layer == dims.len() - 1 { FunctionId::Sigmoid } else { *func };
                    current = b.func(&format!("a{layer}"), act_fn, 1.0, z)?;
                }
                let label = b.input("label", *output, batch)?;
                b.loss("loss", crate::graph::LossId::Square, current, label)?;
                Ok(ModelGraph {
                    graph: b.build()?,
                    params,
                    feature_inputs: vec![x],
                    label,
                    output: current,
                })
            }
            ModelSpec::UnrolledRnn { steps, hidden, func } => {
                let mut b = GraphBuilder::new();
                let w = b.parameter("w", *hidden, *hidden)?;
                let u = b.parameter("u", *hidden, 1)?;
                let v = b.parameter("v", 1, *hidden)?;
                let h0 = b.input("h0", *hidden, batch)?;
                let mut inputs = Vec::with_capacity(*steps + 1);
                let mut h = h0;
                for t in 1..=*steps {
                    let xt = b.input(&format!("x{t}"), 1, batch)?;
                    inputs.push(xt);
                    let wh = b.matmul(&format!("wh{t}"), w, h)?;
                    let ux = b.matmul(&format!("ux{t}"), u, xt)?;
                    let pre = b.plus(&format!("pre{t}"), wh, ux)?;
                    h = b.func(&format!("h{t}"), *func, 1.0, pre)?;
                }
                let vz = b.matmul("vz", v, h)?;
                let y = b.func("y", FunctionId::Sigmoid, 1.0, vz)?;
                let label = b.input("label", 1, batch)?;
                b.loss("loss", crate::graph::LossId::Square, y, label)?;
                inputs.push(h0);
                Ok(ModelGraph {
                    graph: b.build()?,
                    params: vec![w, u, v],
                    feature_inputs: inputs,
                    label,
                    output: y,
                })
            }
        }
    }
}
