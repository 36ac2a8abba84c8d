//! Dense row-major matrices and a seeded, platform-stable random stream.
//!
//! Everything downstream (network weights, feature maps, data generators,
//! fold shuffles) draws from [`RandomStream`], so a single 64-bit seed pins
//! an entire experiment. The generator is ChaCha12 seeded through SplitMix64;
//! the uniform and normal transforms below are fixed and must never change,
//! since stored expected values in the test suite depend on the exact draws.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense matrix, row-major storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data. All entries must be finite and
    /// `data.len()` must equal `rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite matrix entry {v}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from a slice of equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has length {} but row 0 has length {d}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Matrix::new(n, d, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a contiguous slice.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Matrix-vector product `self * x`.
    pub fn mat_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "mat_vec: matrix is {}x{} but vector has length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let mut out = vec![0.0; self.rows];
        for (i, out_i) in out.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            *out_i = acc;
        }
        Ok(out)
    }

    /// Keeps only the rows listed in `indices`, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::InvalidArgument(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(indices.len(), self.cols, data)
    }
}

/// SplitMix64 mixing step; used for seed derivation.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic random stream.
///
/// Backed by ChaCha12 (`rand_chacha`), which produces the same sequence on
/// every platform. Uniform doubles take the top 53 bits of a `u64`; normals
/// use the Box-Muller cosine branch, consuming exactly two uniforms per draw.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha12Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent child stream from (seed, tags).
    ///
    /// Each tag is absorbed through SplitMix64, so `derive(&[a, b])` and
    /// `derive(&[b, a])` differ. Used to give folds, repeats, and networks
    /// their own streams without sharing state.
    pub fn derive(&self, tags: &[u64]) -> RandomStream {
        let mut s = splitmix64(self.seed);
        for &t in tags {
            s = splitmix64(s ^ t);
        }
        RandomStream::new(s)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`. Uses a plain modulus; the bias is
    /// far below anything observable at the sizes used here.
    pub fn uniform_index(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        (self.next_u64() % bound as u64) as usize
    }

    /// `n` uniform draws on `[lo, hi)`.
    pub fn sample_uniform(&mut self, n: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
        if lo > hi {
            return Err(Error::InvalidArgument(format!(
                "uniform bounds reversed: lo={lo} > hi={hi}"
            )));
        }
        Ok((0..n).map(|_| lo + (hi - lo) * self.uniform()).collect())
    }

    /// One standard normal draw (Box-Muller cosine branch).
    pub fn standard_normal(&mut self) -> f64 {
        // u1 in (0, 1] keeps the log finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// `n` draws from N(mean, std^2).
    pub fn sample_normal(&mut self, n: usize, mean: f64, std: f64) -> Result<Vec<f64>> {
        if std < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "normal std must be >= 0, got {std}"
            )));
        }
        Ok((0..n).map(|_| mean + std * self.standard_normal()).collect())
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.uniform_index(i + 1);
            items.swap(i, j);
        }
    }

    /// A shuffled permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mat_vec_identity() {
        let w = Matrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(w.mat_vec(&[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn mat_vec_zero() {
        let w = Matrix::zeros(2, 2);
        assert_eq!(w.mat_vec(&[4.0, 7.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn mat_vec_hand_case() {
        let w = Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(w.mat_vec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn mat_vec_dimension_error_names_both_shapes() {
        let w = Matrix::zeros(2, 3);
        let err = w.mat_vec(&[1.0, 2.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains('2'), "{msg}");
    }

    #[test]
    fn matrix_rejects_non_finite() {
        assert!(Matrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn mat_vec_is_linear() {
        let mut rng = RandomStream::new(7);
        for _ in 0..20 {
            let data = rng.sample_normal(12, 0.0, 1.0).unwrap();
            let w = Matrix::new(3, 4, data).unwrap();
            let x = rng.sample_normal(4, 0.0, 1.0).unwrap();
            let y = rng.sample_normal(4, 0.0, 1.0).unwrap();
            let (a, b) = (rng.uniform() * 4.0 - 2.0, rng.uniform() * 4.0 - 2.0);
            let combo: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + b * yi).collect();
            let lhs = w.mat_vec(&combo).unwrap();
            let wx = w.mat_vec(&x).unwrap();
            let wy = w.mat_vec(&y).unwrap();
            for i in 0..3 {
                let rhs = a * wx[i] + b * wy[i];
                let scale = lhs[i].abs().max(rhs.abs()).max(1.0);
                assert!((lhs[i] - rhs).abs() / scale < 1e-12);
            }
        }
    }

    #[test]
    fn normal_std_zero_is_degenerate() {
        let mut rng = RandomStream::new(1);
        assert_eq!(rng.sample_normal(3, 5.0, 0.0).unwrap(), vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn normal_rejects_negative_std() {
        let mut rng = RandomStream::new(1);
        assert!(rng.sample_normal(1, 0.0, -1.0).is_err());
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RandomStream::new(42);
        let mut b = RandomStream::new(42);
        assert_eq!(
            a.sample_normal(4, 0.0, 1.0).unwrap(),
            b.sample_normal(4, 0.0, 1.0).unwrap()
        );
        assert_eq!(
            a.sample_uniform(4, -1.0, 1.0).unwrap(),
            b.sample_uniform(4, -1.0, 1.0).unwrap()
        );
    }

    #[test]
    fn normal_moments_match_population() {
        let mut rng = RandomStream::new(99);
        let xs = rng.sample_normal(100_000, 0.0, 1.0).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "sample mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.02, "sample std {}", var.sqrt());
    }

    #[test]
    fn uniform_moments_and_degenerate_interval() {
        let mut rng = RandomStream::new(3);
        let xs = rng.sample_uniform(100_000, 0.0, 1.0).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "sample mean {mean}");
        assert_eq!(rng.sample_uniform(2, 1.0, 1.0).unwrap(), vec![1.0, 1.0]);
        assert!(rng.sample_uniform(1, 2.0, 1.0).is_err());
    }

    #[test]
    fn derive_depends_on_tag_order() {
        let root = RandomStream::new(5);
        let mut a = root.derive(&[1, 2]);
        let mut b = root.derive(&[2, 1]);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut rng = RandomStream::new(11);
        let mut p = rng.permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
