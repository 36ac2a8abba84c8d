//! Feature standardization and random-Fourier-feature kernel approximation.
//!
//! The RFF map lets a single-layer linear network stand in for an RBF-kernel
//! regressor: with `omega ~ N(0, 2*gamma*I)` and phases uniform on
//! `[0, 2*pi)`, the features `z(x) = sqrt(2/D) * cos(omega x + b)` satisfy
//! `E[z(x).z(y)] = exp(-gamma * ||x - y||^2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RandomStream};

/// Per-column affine normalization fitted on training data.
///
/// Uses the population convention (divide by n). Constant columns get their
/// std replaced by 1 so degenerate CSV columns stay harmless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.rows() < 2 {
            return Err(Error::Data(format!(
                "standardizer needs at least 2 rows, got {}",
                x.rows()
            )));
        }
        let n = x.rows() as f64;
        let d = x.cols();
        let mut means = vec![0.0; d];
        for i in 0..x.rows() {
            for (j, m) in means.iter_mut().enumerate() {
                *m += x.get(i, j);
            }
        }
        for m in means.iter_mut() {
            *m /= n;
        }
        let mut stds = vec![0.0; d];
        for i in 0..x.rows() {
            for (j, s) in stds.iter_mut().enumerate() {
                let dlt = x.get(i, j) - means[j];
                *s += dlt * dlt;
            }
        }
        for s in stds.iter_mut() {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Ok(Self { means, stds })
    }

    /// Fits on a single column of values (used for target scaling).
    pub fn fit_column(values: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        Standardizer::fit(&Matrix::from_rows(&rows)?)
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    /// `(x - mean) / std`, elementwise.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.means.len() {
            return Err(Error::ShapeMismatch(format!(
                "standardizer fitted on {} columns, input has {}",
                self.means.len(),
                x.len()
            )));
        }
        Ok(x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    /// Inverse of [`Standardizer::apply`].
    pub fn invert(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.means.len() {
            return Err(Error::ShapeMismatch(format!(
                "standardizer fitted on {} columns, input has {}",
                self.means.len(),
                z.len()
            )));
        }
        Ok(z.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| v * s + m)
            .collect())
    }

    /// Scalar helpers for one-column scalers.
    pub fn apply_scalar(&self, v: f64) -> f64 {
        (v - self.means[0]) / self.stds[0]
    }

    pub fn invert_scalar(&self, z: f64) -> f64 {
        z * self.stds[0] + self.means[0]
    }

    pub fn apply_matrix(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Vec::with_capacity(x.rows() * x.cols());
        for i in 0..x.rows() {
            out.extend(self.apply(x.row(i))?);
        }
        Matrix::new(x.rows(), x.cols(), out)
    }
}

/// Random Fourier feature map approximating the RBF kernel
/// `k(x, y) = exp(-gamma * ||x - y||^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RffMap {
    /// Frequencies, one row per output feature: shape `(dim, input_dim)`.
    omega: Matrix,
    /// Phase offsets in `[0, 2*pi)`, length `dim`.
    phase: Vec<f64>,
    gamma: f64,
}

impl RffMap {
    /// Samples a map with `dim` output features for `input_dim`-dimensional
    /// inputs. Frequencies are i.i.d. `N(0, 2*gamma)`.
    pub fn sample(input_dim: usize, dim: usize, gamma: f64, rng: &mut RandomStream) -> Result<Self> {
        if input_dim == 0 || dim == 0 {
            return Err(Error::InvalidArgument(
                "RFF map needs input_dim >= 1 and dim >= 1".into(),
            ));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "RFF gamma must be > 0, got {gamma}"
            )));
        }
        let std = (2.0 * gamma).sqrt();
        let omega = Matrix::new(dim, input_dim, rng.sample_normal(dim * input_dim, 0.0, std)?)?;
        let phase = rng.sample_uniform(dim, 0.0, std::f64::consts::TAU)?;
        Ok(Self { omega, phase, gamma })
    }

    pub fn input_dim(&self) -> usize {
        self.omega.cols()
    }

    pub fn dim(&self) -> usize {
        self.omega.rows()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `z(x)[i] = sqrt(2/D) * cos(omega_i . x + phase_i)`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.omega.mat_vec(x)?;
        let scale = (2.0 / self.dim() as f64).sqrt();
        for (zi, b) in z.iter_mut().zip(&self.phase) {
            *zi = scale * (*zi + b).cos();
        }
        Ok(z)
    }
}

/// Median-heuristic RBF width: `gamma = 1 / (2 * median^2)` over pairwise
/// Euclidean distances. Falls back to 1.0 when the median distance is zero.
pub fn median_heuristic_gamma(x: &Matrix) -> f64 {
    let n = x.rows();
    if n < 2 {
        return 1.0;
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc = 0.0;
            for (a, b) in x.row(i).iter().zip(x.row(j)) {
                let d = a - b;
                acc += d * d;
            }
            dists.push(acc.sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = dists[dists.len() / 2];
    if median > 0.0 {
        1.0 / (2.0 * median * median)
    } else {
        1.0
    }
}

/// The feature path stored inside a trained model: optional standardization
/// followed by an optional RFF expansion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureTransform {
    pub standardizer: Option<Standardizer>,
    pub rff: Option<RffMap>,
}

impl FeatureTransform {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn output_dim(&self, raw_dim: usize) -> usize {
        match &self.rff {
            Some(map) => map.dim(),
            None => raw_dim,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let staged = match &self.standardizer {
            Some(s) => s.apply(x)?,
            None => x.to_vec(),
        };
        match &self.rff {
            Some(map) => map.apply(&staged),
            None => Ok(staged),
        }
    }

    pub fn apply_matrix(&self, x: &Matrix) -> Result<Matrix> {
        let mut rows = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            rows.push(self.apply(x.row(i))?);
        }
        Matrix::from_rows(&rows)
    }
}
