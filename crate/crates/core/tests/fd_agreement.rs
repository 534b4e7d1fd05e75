//! Cross-validation of the analytic propagation against the
//! finite-difference oracle on seeded random graphs.

mod common;

use common::{max_rel_err, random_tree_graph, rel_frobenius, GeneratorOptions};
use convexcert_core::curvature::{assemble_hessian, backprop_blocks, gradients};
use convexcert_core::graph::{forward, GraphBuilder, LossId};
use convexcert_core::oracle::{fd_gradient, fd_hessian, FdConfig};
use convexcert_core::tensor::Matrix;

#[test]
fn backprop_gradients_match_central_differences() {
    let opt = GeneratorOptions::default();
    let cfg = FdConfig::default();
    for seed in 0..50 {
        let sample = random_tree_graph(1000 + seed, &opt);
        let acts = forward(&sample.graph, &sample.bindings).unwrap();
        let grads = gradients(&sample.graph, &acts).unwrap();
        let analytic = &grads[sample.variable.index()];
        let fd = fd_gradient(&sample.graph, &sample.bindings, sample.variable, &cfg).unwrap();
        let err = max_rel_err(analytic, &fd, 1e-6);
        assert!(
            err <= 1e-5,
            "seed {seed}: gradient mismatch {err:.3e} at variable '{}'",
            sample.graph.name(sample.variable)
        );
    }
}

#[test]
fn propagated_blocks_match_fd_hessian() {
    let opt = GeneratorOptions { variable_entry_cap: 64, ..GeneratorOptions::default() };
    // A larger Hessian step keeps probe rounding noise below the tolerance
    // even for deep chains whose curvature norm is strongly damped; the
    // smooth test functions keep the added truncation error negligible.
    let cfg = FdConfig { hess_step: 1e-3, ..FdConfig::default() };
    for seed in 0..20 {
        let sample = random_tree_graph(2000 + seed, &opt);
        let acts = forward(&sample.graph, &sample.bindings).unwrap();
        let state = backprop_blocks(&sample.graph, &acts, sample.variable).unwrap();
        let analytic = assemble_hessian(&sample.graph, &state, sample.variable).unwrap();
        let fd = fd_hessian(&sample.graph, &sample.bindings, sample.variable, &cfg).unwrap();
        let err = rel_frobenius(&analytic, &fd);
        assert!(
            err <= 1e-4,
            "seed {seed}: hessian mismatch {err:.3e} at variable '{}' ({} entries)",
            sample.graph.name(sample.variable),
            analytic.rows()
        );
    }
}

#[test]
fn linear_square_loss_hessian_is_exact_gauss_newton() {
    // For a purely quadratic objective the four-point stencil has no
    // truncation error, so a large step drowns the rounding noise.
    let cfg = FdConfig { grad_step: 1e-5, hess_step: 1e-2 };
    let mut b = GraphBuilder::new();
    let w = b.parameter("w", 3, 4).unwrap();
    let x = b.input("x", 4, 2).unwrap();
    let y = b.matmul("y", w, x).unwrap();
    let t = b.input("t", 3, 2).unwrap();
    b.loss("loss", LossId::Square, y, t).unwrap();
    let g = b.build().unwrap();

    let mut lcg = 0x2545f4914f6cdd1du64;
    let mut next = move || {
        lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((lcg >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let bindings: convexcert_core::graph::Bindings = [
        (w, Matrix::from_fn(3, 4, |_, _| next())),
        (x, Matrix::from_fn(4, 2, |_, _| next())),
        (t, Matrix::from_fn(3, 2, |_, _| next())),
    ]
    .into_iter()
    .collect();

    let acts = forward(&g, &bindings).unwrap();
    let state = backprop_blocks(&g, &acts, w).unwrap();
    let analytic = assemble_hessian(&g, &state, w).unwrap();
    let fd = fd_hessian(&g, &bindings, w, &cfg).unwrap();
    let err = rel_frobenius(&fd, &analytic);
    assert!(err <= 1e-10, "linear-model hessian relative error {err:.3e}");

    // The same Hessian in closed form: H[(i,k),(i',k')] = d_ii' sum_j x_kj x_k'j.
    let xv = &bindings[&x];
    let k_dim = 4;
    let closed = Matrix::from_fn(12, 12, |p, q| {
        let (i, k) = (p / k_dim, p % k_dim);
        let (i2, k2) = (q / k_dim, q % k_dim);
        if i == i2 {
            (0..2).map(|j| xv.get(k, j) * xv.get(k2, j)).sum()
        } else {
            0.0
        }
    });
    assert!(rel_frobenius(&analytic, &closed) <= 1e-12);
}

#[test]
fn two_layer_gradients_agree_for_each_named_function() {
    // Spot check per function id, two compositions deep.
    use convexcert_core::graph::FunctionId;
    let cfg = FdConfig::default();
    for (idx, func) in [FunctionId::Square, FunctionId::Sigmoid, FunctionId::Tanh]
        .into_iter()
        .enumerate()
    {
        let mut b = GraphBuilder::new();
        let x = b.parameter("x", 2, 1).unwrap();
        let f1 = b.func("f1", func, 1.0, x).unwrap();
        let f2 = b.func("f2", func, 0.7, f1).unwrap();
        let t = b.input("t", 2, 1).unwrap();
        b.loss("loss", LossId::Square, f2, t).unwrap();
        let g = b.build().unwrap();
        let bindings: convexcert_core::graph::Bindings = [
            (x, Matrix::column(&[0.4 + idx as f64 * 0.1, -0.8])),
            (t, Matrix::column(&[0.1, 0.2])),
        ]
        .into_iter()
        .collect();
        let acts = forward(&g, &bindings).unwrap();
        let analytic = gradients(&g, &acts).unwrap()[x.index()].clone();
        let fd = fd_gradient(&g, &bindings, x, &cfg).unwrap();
        assert!(max_rel_err(&analytic, &fd, 1e-6) <= 1e-5, "{:?}", func);
    }
}

#[test]
fn shared_weight_residual_shrinks_with_the_scale_factor() {
    // W sigmoid(W x): the outer use survives scaling (sigmoid keeps a finite
    // value at the origin), so the per-use sum tracks the true curvature
    // better and better as the factor shrinks.
    use convexcert_core::oracle::residual_ratio;
    use convexcert_core::rng::SeedStreams;
    use rand::Rng;

    for seed in 0..3u64 {
        let streams = SeedStreams::new(seed);
        let mut rng = streams.stream("wswx", 0);
        let mut b = GraphBuilder::new();
        let w = b.parameter("w", 2, 2).unwrap();
        let x = b.input("x", 2, 1).unwrap();
        let inner = b.matmul("inner", w, x).unwrap();
        let s = b.func("s", convexcert_core::graph::FunctionId::Sigmoid, 1.0, inner).unwrap();
        let outer = b.matmul("outer", w, s).unwrap();
        let label = b.input("label", 2, 1).unwrap();
        b.loss("loss", LossId::Square, outer, label).unwrap();
        let g = b.build().unwrap();
        let bindings: convexcert_core::graph::Bindings = [
            (w, Matrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..=1.0))),
            (x, Matrix::from_fn(2, 1, |_, _| rng.random_range(-1.0..=1.0))),
            (label, Matrix::from_fn(2, 1, |_, _| rng.random_range(-1.0..=1.0))),
        ]
        .into_iter()
        .collect();
        let cfg = FdConfig::default();
        let points = residual_ratio(&g, &bindings, w, &[1.0, 0.1], &cfg).unwrap();
        assert!(
            points[1].ratio < points[0].ratio,
            "seed {seed}: ratio(0.1) = {} not below ratio(1.0) = {}",
            points[1].ratio,
            points[0].ratio
        );
        // Same seed and config, same numbers, bit for bit.
        let again = residual_ratio(&g, &bindings, w, &[1.0, 0.1], &cfg).unwrap();
        assert_eq!(points, again);
    }
}

#[test]
fn training_gradient_with_l2_matches_fd_of_regularized_objective() {
    // The optimizer adds l2 * theta to the raw gradient; that must equal the
    // central difference of E + (l2/2) ||theta||^2 probed directly.
    use convexcert_core::graph::FunctionId;

    let l2 = 1e-3;
    let mut b = GraphBuilder::new();
    let w = b.parameter("w", 2, 2).unwrap();
    let x = b.input("x", 2, 1).unwrap();
    let z = b.matmul("z", w, x).unwrap();
    let a = b.func("a", FunctionId::Tanh, 1.0, z).unwrap();
    let t = b.input("t", 2, 1).unwrap();
    b.loss("loss", LossId::Square, a, t).unwrap();
    let g = b.build().unwrap();
    let wv = Matrix::from_rows(&[vec![0.4, -0.8], vec![0.3, 0.9]]).unwrap();
    let bindings: convexcert_core::graph::Bindings = [
        (w, wv.clone()),
        (x, Matrix::column(&[0.7, -0.2])),
        (t, Matrix::column(&[0.1, -0.4])),
    ]
    .into_iter()
    .collect();

    let acts = forward(&g, &bindings).unwrap();
    let mut training_grad = gradients(&g, &acts).unwrap()[w.index()].clone();
    training_grad.add_scaled(&wv, l2).unwrap();

    let eps = 1e-5;
    let mut fd = Matrix::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            let regularized_loss = |shift: f64| -> f64 {
                let mut probe = bindings.clone();
                let mut wp = wv.clone();
                wp.set(i, j, wv.get(i, j) + shift);
                let reg = 0.5 * l2 * wp.data().iter().map(|v| v * v).sum::<f64>();
                probe.insert(w, wp);
                forward(&g, &probe).unwrap().loss_value(&g) + reg
            };
            fd.set(i, j, (regularized_loss(eps) - regularized_loss(-eps)) / (2.0 * eps));
        }
    }
    assert!(max_rel_err(&training_grad, &fd, 1e-6) <= 1e-5);
}

#[test]
fn fd_hessian_is_symmetric_before_symmetrization_forcing() {
    let opt = GeneratorOptions { variable_entry_cap: 16, ..GeneratorOptions::default() };
    let cfg = FdConfig::default();
    let sample = random_tree_graph(31, &opt);
    let fd = fd_hessian(&sample.graph, &sample.bindings, sample.variable, &cfg).unwrap();
    // Output is symmetrized; asymmetry of the raw stencil is bounded by the
    // same probe noise, so the symmetrized result must be exactly symmetric.
    assert_eq!(fd.max_asymmetry(), 0.0);
}
