//! Binding-point samplers for certification and scale search.

use crate::graph::{Bindings, Graph, LossId, NodeId};
use crate::rng::SeedStreams;
use crate::tensor::Matrix;
use rand::Rng;

/// Draws binding points with every input and parameter entry uniform in
/// `[-radius, radius]`. Labels (the loss node's second input) are drawn from
/// `[0, 1]` when the loss is a cross entropy, since its predictions and
/// labels live in the unit interval.
#[derive(Debug, Clone, Copy)]
pub struct HypercubeSampler {
    pub radius: f64,
    pub points: usize,
}

impl Default for HypercubeSampler {
    fn default() -> Self {
        HypercubeSampler { radius: 2.0, points: 16 }
    }
}

impl HypercubeSampler {
    pub fn sample(&self, g: &Graph, streams: &SeedStreams) -> Vec<Bindings> {
        let label = g.label_node();
        let cross_entropy = matches!(g.loss_id(), LossId::CrossEntropy);
        (0..self.points)
            .map(|p| {
                let mut rng = streams.stream("sampler", p as u64);
                let mut bindings = Bindings::new();
                for id in g.bindable_nodes() {
                    let (r, c) = g.shape(id);
                    let m = if id == label && cross_entropy {
                        Matrix::from_fn(r, c, |_, _| rng.random_range(0.0..=1.0))
                    } else {
                        Matrix::from_fn(r, c, |_, _| rng.random_range(-self.radius..=self.radius))
                    };
                    bindings.insert(id, m);
                }
                bindings
            })
            .collect()
    }
}

/// Feature and label columns backing dataset-driven sampling.
#[derive(Debug, Clone, Copy)]
pub struct DatasetBatches<'a> {
    pub features: &'a Matrix,
    pub labels: &'a Matrix,
}

/// Binding points built from dataset batches: the designated input and label
/// nodes take consecutive sample slices (wrapping around the dataset),
/// remaining parameters are drawn from the hypercube.
pub fn dataset_points(
    g: &Graph,
    streams: &SeedStreams,
    input: NodeId,
    label: NodeId,
    data: DatasetBatches<'_>,
    radius: f64,
    points: usize,
) -> Vec<Bindings> {
    let (_, batch) = g.shape(input);
    let total = data.features.cols();
    (0..points)
        .map(|p| {
            let mut rng = streams.stream("sampler", p as u64);
            let mut bindings = Bindings::new();
            let start = (p * batch) % total.max(1);
            let x = Matrix::from_fn(g.shape(input).0, batch, |i, j| {
                data.features.get(i, (start + j) % total)
            });
            let y = Matrix::from_fn(g.shape(label).0, batch, |i, j| {
                data.labels.get(i, (start + j) % total)
            });
            bindings.insert(input, x);
            bindings.insert(label, y);
            for id in g.bindable_nodes() {
                if id == input || id == label {
                    continue;
                }
                let (r, c) = g.shape(id);
                bindings.insert(id, Matrix::from_fn(r, c, |_, _| rng.random_range(-radius..=radius)));
            }
            bindings
        })
        .collect()
}

/// Evenly spaced scalar grid over `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2, "need at least both endpoints");
    let step = (hi - lo) / (count as f64 - 1.0);
    (0..count).map(|k| lo + step * k as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphBuilder, LossId};

    #[test]
    fn hypercube_sampling_is_deterministic_and_in_range() {
        let mut b = GraphBuilder::new();
        let x = b.parameter("x", 3, 2).unwrap();
        let t = b.input("t", 3, 2).unwrap();
        b.loss("loss", LossId::Square, x, t).unwrap();
        let g = b.build().unwrap();
        let streams = SeedStreams::new(7);
        let sampler = HypercubeSampler { radius: 2.0, points: 4 };
        let a = sampler.sample(&g, &streams);
        let b2 = sampler.sample(&g, &streams);
        assert_eq!(a, b2);
        for point in &a {
            assert!(point[&x].max_abs() <= 2.0);
        }
    }

    #[test]
    fn cross_entropy_labels_live_in_unit_interval() {
        let mut b = GraphBuilder::new();
        let x = b.parameter("x", 2, 1).unwrap();
        let s = b.func("s", crate::graph::FunctionId::Sigmoid, 1.0, x).unwrap();
        let t = b.input("t", 2, 1).unwrap();
        b.loss("loss", LossId::CrossEntropy, s, t).unwrap();
        let g = b.build().unwrap();
        let streams = SeedStreams::new(3);
        for point in (HypercubeSampler { radius: 2.0, points: 8 }).sample(&g, &streams) {
            for &v in point[&t].data() {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn linspace_includes_endpoints() {
        let xs = linspace(-2.0, 2.0, 100);
        assert_eq!(xs.len(), 100);
        assert_eq!(xs[0], -2.0);
        assert!((xs[99] - 2.0).abs() < 1e-12);
        assert!(xs.iter().all(|&x| x != 0.0), "even count avoids exactly zero");
    }
}
