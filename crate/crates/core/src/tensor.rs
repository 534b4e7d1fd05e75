//! Dense matrix arithmetic, per-sample symmetric curvature blocks, and a
//! cyclic-Jacobi symmetric eigensolver.
//!
//! Everything downstream (graph evaluation, curvature propagation, the
//! finite-difference oracle) is built on these types. Storage is row-major
//! `f64`; columns of an activation matrix are independent batch samples.

use thiserror::Error;

/// Absolute tolerance used when accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Off-diagonal Frobenius norm at which Jacobi sweeps stop.
pub const JACOBI_TOL: f64 = 1e-10;

/// Hard cap on Jacobi sweeps; reaching it is reported as non-convergence.
pub const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {left_rows}x{left_cols} and {right_rows}x{right_cols}")]
    ShapeMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("data length {got} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, got: usize },
    #[error("{op}: matrix must be square, got {rows}x{cols}")]
    NotSquare { op: &'static str, rows: usize, cols: usize },
    #[error("{op}: matrix is asymmetric beyond tolerance (max deviation {max_dev:.3e})")]
    Asymmetric { op: &'static str, max_dev: f64 },
    #[error("quadform: vector length {got} does not match matrix dimension {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("jacobi eigensolver did not converge within {sweeps} sweeps (off-norm {off_norm:.3e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("non-finite entry at ({row},{col}) in {op}")]
    NonFinite { op: &'static str, row: usize, col: usize },
}

/// Dense real matrix, row-major storage. Columns are batch samples wherever a
/// matrix carries activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix. Panics on zero dimensions; shapes come from validated
    /// graph metadata, so a zero here is a programming error.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if data.len() != rows * cols {
            return Err(TensorError::DataLength { rows, cols, got: data.len() });
        }
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TensorError> {
        assert!(!rows.is_empty(), "matrix dimensions must be positive");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(TensorError::DataLength { rows: rows.len(), cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Column vector from a slice.
    pub fn column(values: &[f64]) -> Self {
        Matrix::from_vec(values.len(), 1, values.to_vec()).expect("length matches by construction")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false // dimensions are always positive
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Row-major flattened index of entry (i, j).
    #[inline]
    pub fn flat_index(&self, i: usize, j: usize) -> usize {
        i * self.cols + j
    }

    pub fn col_slice(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, TensorError> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix, TensorError> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// Element-wise product.
    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix, TensorError> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    fn zip_with(
        &self,
        other: &Matrix,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Matrix, TensorError> {
        if self.shape() != other.shape() {
            return Err(TensorError::ShapeMismatch {
                op,
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|x| x * s)
    }

    pub fn add_scaled(&mut self, other: &Matrix, s: f64) -> Result<(), TensorError> {
        if self.shape() != other.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "add_scaled",
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// First non-finite entry, if any.
    pub fn find_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|x| !x.is_finite())
            .map(|p| (p / self.cols, p % self.cols))
    }

    /// Enforces `h <- (h + h^T)/2`; cheap guard against drift in symmetric
    /// accumulations.
    pub fn symmetrize(&mut self) {
        debug_assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, avg);
                self.set(j, i, avg);
            }
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                dev = dev.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        dev
    }
}

/// Standard product `c_ij = sum_k a_ik b_kj`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix, TensorError> {
    if a.cols != b.rows {
        return Err(TensorError::ShapeMismatch {
            op: "matmul",
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: b.rows,
            right_cols: b.cols,
        });
    }
    let mut c = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            for j in 0..b.cols {
                c.data[i * c.cols + j] += aik * b.get(k, j);
            }
        }
    }
    Ok(c)
}

/// Quadratic form `v^T h v`.
pub fn quadform(h: &Matrix, v: &[f64]) -> Result<f64, TensorError> {
    if h.rows != h.cols {
        return Err(TensorError::NotSquare { op: "quadform", rows: h.rows, cols: h.cols });
    }
    if v.len() != h.rows {
        return Err(TensorError::LengthMismatch { expected: h.rows, got: v.len() });
    }
    let mut acc = 0.0;
    for i in 0..h.rows {
        let mut row = 0.0;
        for j in 0..h.cols {
            row += h.get(i, j) * v[j];
        }
        acc += v[i] * row;
    }
    Ok(acc)
}

fn off_diagonal_norm(h: &Matrix) -> f64 {
    let n = h.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let x = h.get(i, j);
                acc += x * x;
            }
        }
    }
    acc.sqrt()
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, in
/// unsorted diagonal order. Sweeps run until the off-diagonal Frobenius norm
/// drops below `tol`.
pub fn sym_eig_values(h: &Matrix, tol: f64) -> Result<Vec<f64>, TensorError> {
    if h.rows() != h.cols() {
        return Err(TensorError::NotSquare { op: "sym_eig", rows: h.rows(), cols: h.cols() });
    }
    let dev = h.max_asymmetry();
    if dev > SYMMETRY_TOL {
        return Err(TensorError::Asymmetric { op: "sym_eig", max_dev: dev });
    }
    let n = h.rows();
    let mut a = h.clone();
    a.symmetrize();
    if n == 1 {
        return Ok(vec![a.get(0, 0)]);
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) < tol {
            return Ok((0..n).map(|i| a.get(i, i)).collect());
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta.abs() > 1e150 {
                    // Rotation angle underflows; 1/(2*theta) avoids theta^2 overflow.
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        let new_kp = akp - s * (akq + tau * akp);
                        let new_kq = akq + s * (akp - tau * akq);
                        a.set(k, p, new_kp);
                        a.set(p, k, new_kp);
                        a.set(k, q, new_kq);
                        a.set(q, k, new_kq);
                    }
                }
            }
        }
    }
    let off = off_diagonal_norm(&a);
    if off < tol {
        return Ok((0..n).map(|i| a.get(i, i)).collect());
    }
    Err(TensorError::NoConvergence { sweeps: JACOBI_MAX_SWEEPS, off_norm: off })
}

/// Smallest eigenvalue of a symmetric matrix, accurate to `tol`.
pub fn sym_eig_min(h: &Matrix, tol: f64) -> Result<f64, TensorError> {
    let vals = sym_eig_values(h, tol)?;
    Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
}

/// Per-sample second-order blocks: `m` symmetric `n x n` matrices, one per
/// batch column of the node they describe. Cross-sample entries are
/// structurally zero and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct PerSampleBlocks {
    n: usize,
    m: usize,
    blocks: Vec<Matrix>,
}

impl PerSampleBlocks {
    pub fn zeros(n: usize, m: usize) -> Self {
        PerSampleBlocks { n, m, blocks: vec![Matrix::zeros(n, n); m] }
    }

    pub fn identities(n: usize, m: usize) -> Self {
        PerSampleBlocks { n, m, blocks: vec![Matrix::identity(n); m] }
    }

    /// Builds from raw blocks; each block is symmetrized on entry.
    pub fn from_blocks(blocks: Vec<Matrix>) -> Result<Self, TensorError> {
        assert!(!blocks.is_empty(), "at least one block required");
        let n = blocks[0].rows();
        for b in &blocks {
            if b.rows() != b.cols() {
                return Err(TensorError::NotSquare { op: "per-sample block", rows: b.rows(), cols: b.cols() });
            }
            if b.rows() != n {
                return Err(TensorError::ShapeMismatch {
                    op: "per-sample block",
                    left_rows: n,
                    left_cols: n,
                    right_rows: b.rows(),
                    right_cols: b.cols(),
                });
            }
        }
        let m = blocks.len();
        let mut blocks = blocks;
        for b in &mut blocks {
            b.symmetrize();
        }
        Ok(PerSampleBlocks { n, m, blocks })
    }

    pub fn block_dim(&self) -> usize {
        self.n
    }

    pub fn sample_count(&self) -> usize {
        self.m
    }

    pub fn block(&self, j: usize) -> &Matrix {
        &self.blocks[j]
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    /// Applies `f` to block `j` and re-symmetrizes the result.
    pub fn update_block(&mut self, j: usize, f: impl FnOnce(&Matrix) -> Matrix) {
        let mut b = f(&self.blocks[j]);
        assert_eq!(b.shape(), (self.n, self.n), "block update must preserve shape");
        b.symmetrize();
        self.blocks[j] = b;
    }

    /// Congruence `block_j <- t^T block_j t` applied to every block.
    pub fn congruence(&self, t: &Matrix) -> Result<PerSampleBlocks, TensorError> {
        let tt = t.transpose();
        let mut out = Vec::with_capacity(self.m);
        for b in &self.blocks {
            let mut nb = matmul(&tt, &matmul(b, t)?)?;
            nb.symmetrize();
            out.push(nb);
        }
        PerSampleBlocks::from_blocks(out)
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.blocks.iter().map(Matrix::max_asymmetry).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matmul_reference(a: &Matrix, b: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                c.set(i, j, acc);
            }
        }
        c
    }

    #[test]
    fn matmul_identity() {
        let i2 = Matrix::identity(2);
        let b = Matrix::from_rows(&[vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(matmul(&i2, &b).unwrap(), b);
    }

    #[test]
    fn matmul_row_times_column() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.shape(), (1, 1));
        assert_eq!(c.get(0, 0), 11.0);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let a = Matrix::from_fn(3, 4, |_, _| next());
        let b = Matrix::from_fn(4, 2, |_, _| next());
        let c = matmul(&a, &b).unwrap();
        let r = matmul_reference(&a, &b);
        for i in 0..3 {
            for j in 0..2 {
                assert!((c.get(i, j) - r.get(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn matmul_rejects_mismatched_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        let err = matmul(&a, &b).unwrap_err();
        match err {
            TensorError::ShapeMismatch { left_cols, right_rows, .. } => {
                assert_eq!((left_cols, right_rows), (3, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn eig_min_diagonal() {
        let h = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 5.0]]).unwrap();
        assert!((sym_eig_min(&h, JACOBI_TOL).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eig_min_offdiagonal_pair() {
        // Characteristic polynomial lambda^2 - 1 = 0.
        let h = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((sym_eig_min(&h, JACOBI_TOL).unwrap() - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let h = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.0]]).unwrap();
        assert!(matches!(sym_eig_min(&h, JACOBI_TOL), Err(TensorError::Asymmetric { .. })));
    }

    #[test]
    fn quadform_identity_vector() {
        let h = Matrix::identity(3);
        let got = quadform(&h, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(got, 14.0);
    }

    #[test]
    fn quadform_expands_cross_term() {
        // v^T [[0,1],[1,0]] v = 2 v1 v2
        let h = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(quadform(&h, &[1.0, -1.0]).unwrap(), -2.0);
    }

    #[test]
    fn quadform_zero_vector() {
        let h = Matrix::from_rows(&[vec![3.0, 1.0], vec![1.0, -2.0]]).unwrap();
        assert_eq!(quadform(&h, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn quadform_rejects_length_mismatch() {
        let h = Matrix::identity(3);
        assert!(matches!(
            quadform(&h, &[1.0, 2.0]),
            Err(TensorError::LengthMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn blocks_symmetrized_on_entry() {
        let raw = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let blocks = PerSampleBlocks::from_blocks(vec![raw]).unwrap();
        assert_eq!(blocks.block(0).get(0, 1), 1.0);
        assert_eq!(blocks.block(0).get(1, 0), 1.0);
        assert!(blocks.max_asymmetry() == 0.0);
    }

    #[test]
    fn congruence_identity_is_noop() {
        let b = PerSampleBlocks::from_blocks(vec![
            Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap(),
        ])
        .unwrap();
        let t = Matrix::identity(2);
        assert_eq!(b.congruence(&t).unwrap(), b);
    }
}
