//! Built-in desk-scale datasets: Gaussian blobs, two moons, a synthetic 8x8
//! digit set with a CSV loader, and exhaustive sequence-parity data for the
//! unrolled recurrent model.

use super::TrainError;
use crate::rng::SeedStreams;
use crate::tensor::Matrix;
use rand::seq::SliceRandom;
use rand::Rng;

/// Feature columns with one-hot label columns; `classes[j]` is the class
/// index of sample `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    pub features: Matrix,
    pub labels: Matrix,
    pub classes: Vec<usize>,
}

impl TabularDataset {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.rows()
    }

    pub fn class_count(&self) -> usize {
        self.labels.rows()
    }

    pub fn subset(&self, idx: &[usize]) -> TabularDataset {
        TabularDataset {
            features: Matrix::from_fn(self.features.rows(), idx.len(), |i, j| {
                self.features.get(i, idx[j])
            }),
            labels: Matrix::from_fn(self.labels.rows(), idx.len(), |i, j| {
                self.labels.get(i, idx[j])
            }),
            classes: idx.iter().map(|&j| self.classes[j]).collect(),
        }
    }

    /// Deterministic shuffled split into (train, eval).
    pub fn split(&self, eval_fraction: f64, streams: &SeedStreams) -> (TabularDataset, TabularDataset) {
        let idx = shuffled_indices(self.len(), streams);
        let eval_n = ((self.len() as f64) * eval_fraction).round() as usize;
        let eval_n = eval_n.clamp(1, self.len().saturating_sub(1).max(1));
        (self.subset(&idx[eval_n..]), self.subset(&idx[..eval_n]))
    }
}

/// Per-step scalar inputs (`steps[t]` is `1 x n`) with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub steps: Vec<Matrix>,
    pub labels: Matrix,
    pub classes: Vec<usize>,
}

impl SequenceDataset {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn subset(&self, idx: &[usize]) -> SequenceDataset {
        SequenceDataset {
            steps: self
                .steps
                .iter()
                .map(|s| Matrix::from_fn(1, idx.len(), |_, j| s.get(0, idx[j])))
                .collect(),
            labels: Matrix::from_fn(1, idx.len(), |_, j| self.labels.get(0, idx[j])),
            classes: idx.iter().map(|&j| self.classes[j]).collect(),
        }
    }

    pub fn split(&self, eval_fraction: f64, streams: &SeedStreams) -> (SequenceDataset, SequenceDataset) {
        let idx = shuffled_indices(self.len(), streams);
        let eval_n = ((self.len() as f64) * eval_fraction).round() as usize;
        let eval_n = eval_n.clamp(1, self.len().saturating_sub(1).max(1));
        (self.subset(&idx[eval_n..]), self.subset(&idx[..eval_n]))
    }
}

fn shuffled_indices(n: usize, streams: &SeedStreams) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut streams.stream("split", 0));
    idx
}

fn one_hot(classes: &[usize], class_count: usize) -> Matrix {
    Matrix::from_fn(class_count, classes.len(), |i, j| if classes[j] == i { 1.0 } else { 0.0 })
}

/// Isotropic Gaussian-ish blobs: one random center per class, uniform noise
/// around it. High-dimensional random centers are far apart, so the task is
/// cleanly separable at moderate spread.
pub fn gaussian_blobs(
    dim: usize,
    class_count: usize,
    per_class: usize,
    spread: f64,
    streams: &SeedStreams,
) -> TabularDataset {
    let centers: Vec<Vec<f64>> = (0..class_count)
        .map(|c| {
            let mut rng = streams.stream("blob_centers", c as u64);
            (0..dim).map(|_| rng.random_range(-1.5..=1.5)).collect()
        })
        .collect();
    let n = class_count * per_class;
    let mut features = Matrix::zeros(dim, n);
    let mut classes = Vec::with_capacity(n);
    for c in 0..class_count {
        let mut rng = streams.stream("blob_noise", c as u64);
        for s in 0..per_class {
            let j = c * per_class + s;
            for i in 0..dim {
                // Sum of three uniforms approximates a normal draw.
                let noise: f64 = (0..3).map(|_| rng.random_range(-spread..=spread)).sum::<f64>() / 3.0;
                features.set(i, j, centers[c][i] + noise);
            }
            classes.push(c);
        }
    }
    TabularDataset { features, labels: one_hot(&classes, class_count), classes }
}

/// Two interleaving half-circles in the plane.
pub fn two_moons(per_class: usize, noise: f64, streams: &SeedStreams) -> TabularDataset {
    let n = per_class * 2;
    let mut features = Matrix::zeros(2, n);
    let mut rng = streams.stream("moons", 0);
    for s in 0..per_class {
        let t = std::f64::consts::PI * s as f64 / (per_class.max(2) - 1) as f64;
        features.set(0, s, t.cos() + rng.random_range(-noise..=noise));
        features.set(1, s, t.sin() + rng.random_range(-noise..=noise));
        let j = per_class + s;
        features.set(0, j, 1.0 - t.cos() + rng.random_range(-noise..=noise));
        features.set(1, j, 0.5 - t.sin() + rng.random_range(-noise..=noise));
    }
    let classes: Vec<usize> = (0..n).map(|j| usize::from(j >= per_class)).collect();
    // Interleave the classes sample by sample.
    let order: Vec<usize> = (0..per_class).flat_map(|s| [s, per_class + s]).collect();
    let ds = TabularDataset { features, labels: one_hot(&classes, 2), classes };
    ds.subset(&order)
}

/// 8x8 glyph templates for the synthetic digit set ('#' = ink).
const DIGIT_GLYPHS: [[&str; 8]; 10] = [
    ["..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", "..####.."],
    ["...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "...##...", ".######."],
    ["..####..", ".#....#.", "......#.", ".....#..", "....#...", "...#....", "..#.....", ".######."],
    ["..####..", ".#....#.", "......#.", "...###..", "......#.", "......#.", ".#....#.", "..####.."],
    ["....##..", "...#.#..", "..#..#..", ".#...#..", ".######.", ".....#..", ".....#..", ".....#.."],
    [".######.", ".#......", ".#......", ".#####..", "......#.", "......#.", ".#....#.", "..####.."],
    ["..####..", ".#......", ".#......", ".#####..", ".#....#.", ".#....#.", ".#....#.", "..####.."],
    [".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....", "...#...."],
    ["..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", ".#....#.", "..####.."],
    ["..####..", ".#....#.", ".#....#.", "..#####.", "......#.", "......#.", "......#.", "..####.."],
];

/// Synthetic 8x8 digit images: glyph templates carrying per-sample intensity
/// and pixel noise, clamped to [0, 1]. 64 features per sample, 10 classes.
pub fn synthetic_digits(per_class: usize, streams: &SeedStreams) -> TabularDataset {
    let n = per_class * 10;
    let mut features = Matrix::zeros(64, n);
    let mut classes = Vec::with_capacity(n);
    for digit in 0..10 {
        let mut rng = streams.stream("digits", digit as u64);
        for s in 0..per_class {
            let j = digit * per_class + s;
            let intensity: f64 = rng.random_range(0.7..=1.0);
            for row in 0..8 {
                let glyph = DIGIT_GLYPHS[digit][row].as_bytes();
                for col in 0..8 {
                    let ink = if glyph[col] == b'#' { intensity } else { 0.0 };
                    let noisy = (ink + rng.random_range(-0.15..=0.15)).clamp(0.0, 1.0);
                    features.set(row * 8 + col, j, noisy);
                }
            }
            classes.push(digit);
        }
    }
    TabularDataset { features, labels: one_hot(&classes, 10), classes }
}

/// Writes a digit dataset as CSV: `label,p0,...,p63` per row.
pub fn digits_csv(ds: &TabularDataset) -> String {
    let mut out = String::from("label");
    for p in 0..64 {
        out.push_str(&format!(",p{p}"));
    }
    out.push('\n');
    for j in 0..ds.len() {
        out.push_str(&ds.classes[j].to_string());
        for i in 0..64 {
            out.push_str(&format!(",{}", ds.features.get(i, j)));
        }
        out.push('\n');
    }
    out
}

/// Loads a digit CSV produced by [`digits_csv`] (or any file with the same
/// `label,p0..p63` layout).
pub fn load_digits_csv(text: &str) -> Result<TabularDataset, TrainError> {
    let mut classes = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 65 {
            return Err(TrainError::Csv {
                line: lineno + 1,
                reason: format!("expected 65 fields, got {}", fields.len()),
            });
        }
        let label: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| TrainError::Csv { line: lineno + 1, reason: "bad label".to_string() })?;
        if label > 9 {
            return Err(TrainError::Csv { line: lineno + 1, reason: format!("label {label} > 9") });
        }
        let pixels: Result<Vec<f64>, _> = fields[1..].iter().map(|f| f.trim().parse()).collect();
        let pixels = pixels
            .map_err(|_| TrainError::Csv { line: lineno + 1, reason: "bad pixel".to_string() })?;
        classes.push(label);
        columns.push(pixels);
    }
    if classes.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let features = Matrix::from_fn(64, classes.len(), |i, j| columns[j][i]);
    Ok(TabularDataset { features, labels: one_hot(&classes, 10), classes })
}

/// Reassigns a seeded fraction of samples to a different class, uniformly
/// over the remaining classes. Label noise keeps desk-scale tasks from being
/// fit exactly, so trained models retain nonzero residuals.
pub fn flip_labels(ds: &TabularDataset, fraction: f64, streams: &SeedStreams) -> TabularDataset {
    let mut rng = streams.stream("labelflip", 0);
    let k = ds.class_count();
    let mut classes = ds.classes.clone();
    for c in classes.iter_mut() {
        if k > 1 && rng.random_range(0.0..1.0) < fraction {
            *c = (*c + rng.random_range(1..k)) % k;
        }
    }
    TabularDataset {
        features: ds.features.clone(),
        labels: one_hot(&classes, k),
        classes,
    }
}

/// All binary sequences of the given length with parity labels. Inputs are
/// mapped to -1/+1; the label is 1 when the number of ones is odd.
pub fn parity_sequences(len: usize) -> SequenceDataset {
    assert!((1..=16).contains(&len), "sequence length out of desk-scale range");
    let n = 1usize << len;
    let mut steps = vec![Matrix::zeros(1, n); len];
    let mut classes = Vec::with_capacity(n);
    for s in 0..n {
        let mut ones = 0;
        for (t, step) in steps.iter_mut().enumerate() {
            let bit = (s >> t) & 1;
            ones += bit;
            step.set(0, s, if bit == 1 { 1.0 } else { -1.0 });
        }
        classes.push(ones % 2);
    }
    let labels = Matrix::from_fn(1, n, |_, j| classes[j] as f64);
    SequenceDataset { steps, labels, classes }
}
