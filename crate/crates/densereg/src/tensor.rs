//! Dense row-major matrices and a seeded pseudo-random generator.
//!
//! Everything numeric in this crate runs through [`Matrix`]: 64-bit floats,
//! row-major, with reductions performed in a fixed left-to-right order so any
//! seeded pipeline replays bit-identically.

use crate::error::{Error, Result};

/// Dense 2-D row-major matrix of `f64`.
///
/// `data.len() == rows * cols` always holds. Row vectors (biases, batch-norm
/// parameters) are represented as `1 x n` matrices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Checked constructor used at ingestion boundaries: rejects length
    /// mismatches and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "from_vec",
                left: format!("{rows}x{cols}"),
                right: format!("len {}", data.len()),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite entry {} at flat index {pos}",
                data[pos]
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::ShapeMismatch {
                    op: "from_rows",
                    left: format!("row len {c}"),
                    right: format!("row len {}", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Matrix::from_vec(r, c, data)
    }

    /// 1 x n row vector.
    pub fn row_vector(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Matrix::from_vec(1, n, values)
    }

    /// n x 1 column vector.
    pub fn col_vector(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Matrix::from_vec(n, 1, values)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
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

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Standard matrix product. Per output entry the sum runs over `k`
    /// ascending, so results are bit-reproducible.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: format!("{}x{}", self.rows, self.cols),
                right: format!("{}x{}", other.rows, other.cols),
            });
        }
        let (n, k_dim, m) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(n, m);
        // i-k-j loop order: cache friendly, and each out[i][j] still
        // accumulates its k terms in ascending order.
        for i in 0..n {
            let a_row = &self.data[i * k_dim..(i + 1) * k_dim];
            let o_row = &mut out.data[i * m..(i + 1) * m];
            for (k, &a) in a_row.iter().enumerate() {
                let b_row = &other.data[k * m..(k + 1) * m];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op: "add",
                left: format!("{}x{}", self.rows, self.cols),
                right: format!("{}x{}", other.rows, other.cols),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Gather the given rows into a new matrix, in the given order.
    pub fn gather_rows(&self, indices: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(indices.len(), self.cols);
        for (dst, &src) in indices.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }
}

/// Seeded pseudo-random generator: xoshiro256++ with splitmix64 seed
/// expansion.
///
/// The algorithm, its constants, and the draw order below are part of this
/// crate's stability contract: a given seed produces the same stream on every
/// platform and in every release. Floats in `[0, 1)` take the top 53 bits of
/// one 64-bit output; bounded integers use the multiply-shift reduction of a
/// single 64-bit output.
#[derive(Debug, Clone)]
pub struct Rng {
    state: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        // splitmix64 expands the seed into the four state words; it cannot
        // produce the all-zero state xoshiro must avoid.
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^ (z >> 31)
        };
        Rng {
            state: [next(), next(), next(), next()],
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0]
            .wrapping_add(s[3])
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `n` uniform draws in `[lo, hi)`.
    pub fn uniform(&mut self, n: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Domain(format!(
                "uniform requires lo < hi, got [{lo}, {hi})"
            )));
        }
        Ok((0..n).map(|_| lo + self.next_f64() * (hi - lo)).collect())
    }

    /// Uniform index in `[0, bound)` via Lemire multiply-shift. Slightly
    /// biased for astronomically large bounds; exact enough for shuffling.
    pub fn index(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.index(i + 1);
            slice.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert_eq, proptest};

    fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
        let data = rng.uniform(rows * cols, -1.0, 1.0).unwrap();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let i2 = Matrix::identity(2);
        let v = Matrix::col_vector(vec![3.0, 5.0]).unwrap();
        assert_eq!(i2.matmul(&v).unwrap(), v);
    }

    #[test]
    fn matmul_dot_product() {
        let a = Matrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        let b = Matrix::col_vector(vec![3.0, 4.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), (1, 1));
        assert_eq!(c.get(0, 0), 11.0);
    }

    #[test]
    fn matmul_matches_naive_triple_loop() {
        let mut rng = Rng::new(17);
        let a = random_matrix(&mut rng, 5, 4);
        let b = random_matrix(&mut rng, 4, 3);
        let c = a.matmul(&b).unwrap();
        // Independent brute-force oracle.
        for i in 0..5 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += a.get(i, k) * b.get(k, j);
                }
                assert!((c.get(i, j) - s).abs() < 1e-12, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("4x2"), "{msg}");
    }

    #[test]
    fn matmul_associative_on_random_triples() {
        let mut rng = Rng::new(3);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 3, 4);
            let b = random_matrix(&mut rng, 4, 2);
            let c = random_matrix(&mut rng, 2, 5);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            for (l, r) in left.iter().zip(right.iter()) {
                let scale = l.abs().max(r.abs()).max(1.0);
                assert!((l - r).abs() / scale < 1e-9);
            }
        }
    }

    #[test]
    fn from_vec_rejects_non_finite() {
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![f64::INFINITY, 0.0]).is_err());
        assert!(Matrix::from_vec(1, 3, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn uniform_empty_and_deterministic() {
        let mut rng = Rng::new(99);
        assert!(rng.uniform(0, 0.0, 4.0).unwrap().is_empty());

        let a = Rng::new(5).uniform(3, 0.0, 4.0).unwrap();
        let b = Rng::new(5).uniform(3, 0.0, 4.0).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&v| (0.0..4.0).contains(&v)));
    }

    #[test]
    fn uniform_rejects_bad_interval() {
        let mut rng = Rng::new(0);
        assert!(rng.uniform(1, 4.0, 4.0).is_err());
        assert!(rng.uniform(1, 5.0, 4.0).is_err());
    }

    #[test]
    fn uniform_sample_mean_law_of_large_numbers() {
        let mut rng = Rng::new(2024);
        let draws = rng.uniform(100_000, 0.0, 4.0).unwrap();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 2.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = Rng::new(8);
        let mut v: Vec<usize> = (0..100).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(v, (0..100).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn transpose_round_trip(rows in 1usize..8, cols in 1usize..8, seed in 0u64..1000) {
            let mut rng = Rng::new(seed);
            let m = random_matrix(&mut rng, rows, cols);
            prop_assert_eq!(m.transpose().transpose(), m);
        }
    }
}
