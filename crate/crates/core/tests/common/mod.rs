//! Shared test support: seeded random tree-structured graphs with bindings,
//! and relative-error helpers.

#![allow(dead_code)]

use convexcert_core::graph::{
    forward, Bindings, FunctionId, Graph, GraphBuilder, LossId, NodeId, NodeKind,
};
use convexcert_core::tensor::Matrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct SampledGraph {
    pub graph: Graph,
    pub variable: NodeId,
    pub bindings: Bindings,
}

#[derive(Debug, Clone, Copy)]
pub struct GeneratorOptions {
    pub max_layers: usize,
    pub max_units: usize,
    pub max_batch: usize,
    /// Restrict to functions with smooth second derivatives (finite
    /// differences cannot probe across the rectifier kink).
    pub smooth_only: bool,
    pub allow_cross_entropy: bool,
    /// Keep the flattened variable at or below this many entries.
    pub variable_entry_cap: usize,
    /// Resample bindings until every rectifier pre-activation is at least
    /// this far from its kink.
    pub relu_kink_guard: f64,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions {
            max_layers: 4,
            max_units: 16,
            max_batch: 4,
            smooth_only: true,
            allow_cross_entropy: true,
            variable_entry_cap: 256,
            relu_kink_guard: 1e-3,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..=hi)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| uniform(rng, -scale, scale))
}

fn pick_function(rng: &mut ChaCha8Rng, smooth_only: bool) -> FunctionId {
    let smooth = [FunctionId::Sigmoid, FunctionId::Tanh, FunctionId::Sin];
    if smooth_only {
        smooth[rng.random_range(0..smooth.len())]
    } else {
        let all = [FunctionId::Sigmoid, FunctionId::Tanh, FunctionId::Sin, FunctionId::Relu];
        all[rng.random_range(0..all.len())]
    }
}

/// Chain of dense layers with optional shift/gate inputs, a function after
/// every product, and a randomly chosen weight (or the input-space parameter)
/// as the certified variable.
fn chain_graph(rng: &mut ChaCha8Rng, opt: &GeneratorOptions) -> SampledGraph {
    let batch = rng.random_range(1..=opt.max_batch);
    let layers = rng.random_range(1..=opt.max_layers);
    let cross_entropy = opt.allow_cross_entropy && rng.random_range(0..3) == 0;

    // Keep every weight under the entry cap.
    let dim = |rng: &mut ChaCha8Rng| -> usize {
        let hi = opt.max_units.min((opt.variable_entry_cap as f64).sqrt() as usize).max(1);
        rng.random_range(1..=hi)
    };

    let mut b = GraphBuilder::new();
    let in_dim = dim(rng);
    // Sometimes the variable is the input-space parameter itself.
    let variable_is_input = rng.random_range(0..4) == 0;
    let x = if variable_is_input {
        b.parameter("x", in_dim, batch).unwrap()
    } else {
        b.input("x", in_dim, batch).unwrap()
    };
    let mut bindings = Bindings::new();
    bindings.insert(x, random_matrix(rng, in_dim, batch, 1.0));

    let mut weights = Vec::new();
    let mut current = x;
    let mut current_dim = in_dim;
    for layer in 1..=layers {
        let out_dim = dim(rng);
        let w = b.parameter(&format!("w{layer}"), out_dim, current_dim).unwrap();
        bindings.insert(w, random_matrix(rng, out_dim, current_dim, 1.0));
        weights.push(w);
        current = b.matmul(&format!("z{layer}"), w, current).unwrap();
        current_dim = out_dim;
        if rng.random_range(0..3) == 0 {
            let shift = b.input(&format!("shift{layer}"), out_dim, batch).unwrap();
            bindings.insert(shift, random_matrix(rng, out_dim, batch, 0.5));
            current = b.plus(&format!("p{layer}"), current, shift).unwrap();
        }
        if rng.random_range(0..3) == 0 {
            let gate = b.input(&format!("gate{layer}"), out_dim, batch).unwrap();
            bindings.insert(gate, random_matrix(rng, out_dim, batch, 1.0));
            current = b.elem_mul(&format!("g{layer}"), current, gate).unwrap();
        }
        let func = if cross_entropy && layer == layers {
            FunctionId::Sigmoid
        } else {
            pick_function(rng, opt.smooth_only)
        };
        let delta = if rng.random_range(0..2) == 0 { 1.0 } else { uniform(rng, 0.3, 1.0) };
        current = b.func(&format!("a{layer}"), func, delta, current).unwrap();
    }
    let label = b.input("label", current_dim, batch).unwrap();
    let label_value = if cross_entropy {
        Matrix::from_fn(current_dim, batch, |_, _| uniform(rng, 0.05, 0.95))
    } else {
        random_matrix(rng, current_dim, batch, 1.0)
    };
    bindings.insert(label, label_value);
    let loss = if cross_entropy { LossId::CrossEntropy } else { LossId::Square };
    b.loss("loss", loss, current, label).unwrap();
    let graph = b.build().unwrap();

    let variable = if variable_is_input {
        x
    } else {
        weights[rng.random_range(0..weights.len())]
    };
    SampledGraph { graph, variable, bindings }
}

/// Convolution of an image with a kernel, a function, and a square loss;
/// the variable is either side of the convolution.
fn conv_graph(rng: &mut ChaCha8Rng, opt: &GeneratorOptions) -> SampledGraph {
    let ir = rng.random_range(3..=5);
    let ic = rng.random_range(3..=5);
    let kr = rng.random_range(1..=ir.min(3));
    let kc = rng.random_range(1..=ic.min(3));
    let kernel_is_variable = rng.random_range(0..2) == 0;

    let mut b = GraphBuilder::new();
    let mut bindings = Bindings::new();
    let (image, kernel) = if kernel_is_variable {
        let img = b.input("img", ir, ic).unwrap();
        let ker = b.parameter("ker", kr, kc).unwrap();
        (img, ker)
    } else {
        let img = b.parameter("img", ir, ic).unwrap();
        let ker = b.input("ker", kr, kc).unwrap();
        (img, ker)
    };
    bindings.insert(image, random_matrix(rng, ir, ic, 1.0));
    bindings.insert(kernel, random_matrix(rng, kr, kc, 1.0));
    let mut current = b.conv("conv", image, kernel).unwrap();
    let (or, oc) = (ir - kr + 1, ic - kc + 1);
    let func = pick_function(rng, opt.smooth_only);
    current = b.func("a", func, 1.0, current).unwrap();
    let label = b.input("label", or, oc).unwrap();
    bindings.insert(label, random_matrix(rng, or, oc, 1.0));
    b.loss("loss", LossId::Square, current, label).unwrap();
    let graph = b.build().unwrap();
    let variable = if kernel_is_variable { kernel } else { image };
    SampledGraph { graph, variable, bindings }
}

/// Seeded random tree-structured graph with valid bindings. Rectifier
/// pre-activations are guarded away from the kink by resampling.
pub fn random_tree_graph(seed: u64, opt: &GeneratorOptions) -> SampledGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..64 {
        let _ = attempt;
        let sample = if rng.random_range(0..4) == 0 {
            conv_graph(&mut rng, opt)
        } else {
            chain_graph(&mut rng, opt)
        };
        if relu_guard_ok(&sample, opt.relu_kink_guard) {
            return sample;
        }
    }
    panic!("could not sample a kink-guarded graph for seed {seed}");
}

fn relu_guard_ok(sample: &SampledGraph, guard: f64) -> bool {
    let acts = match forward(&sample.graph, &sample.bindings) {
        Ok(a) => a,
        Err(_) => return false,
    };
    for id in sample.graph.ids() {
        if let NodeKind::Func { func: FunctionId::Relu, delta } = sample.graph.kind(id) {
            let input = sample.graph.inputs(id)[0];
            let x = acts.get(input);
            for &v in x.data() {
                if (delta * v).abs() < guard {
                    return false;
                }
            }
        }
    }
    true
}

/// Relative error with an absolute floor to keep near-zero entries honest.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Comparison floor for per-entry gradient checks: entries below a thousandth
/// of the gradient's scale are compared at that scale, since the mandated
/// probe step leaves truncation residue far above machine precision.
pub fn gradient_floor(a: &Matrix, b: &Matrix) -> f64 {
    1e-3 * 1.0f64.max(a.max_abs()).max(b.max_abs())
}

pub fn max_rel_err(a: &Matrix, b: &Matrix, floor: f64) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| rel_err(x, y, floor))
        .fold(0.0, f64::max)
}

/// `||a - b||_F / max(||b||_F, floor)`.
pub fn rel_frobenius(a: &Matrix, b: &Matrix) -> f64 {
    let diff = a.sub(b).expect("same shape");
    diff.frobenius_norm() / b.frobenius_norm().max(1e-12)
}
