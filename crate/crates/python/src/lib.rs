//! Python bindings for the selective-prediction library.
//!
//! Exposes the meta-loss, the prediction losses, the evaluation metrics,
//! the synthetic data generator, and a `RejectiveModel` class that trains
//! a predictor/rejector pair from plain Python lists.
//!
//! Build with `cargo build --release -p lwr-python`; the produced
//! `liblwr.so` imports as the module `lwr` (see `python/smoke_test.py`).

use std::path::{Path, PathBuf};

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use lwr_core::data::Dataset;
use lwr_core::eval;
use lwr_core::experiments;
use lwr_core::losses::{self, PredictionLoss};
use lwr_core::nn::{Activation, OptimizerConfig};
use lwr_core::numerics::{Matrix, RandomStream};
use lwr_core::trainer::{self, Architecture, PipelineConfig, RffConfig, TrainConfig};

fn to_py_err(e: lwr_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_activation(name: &str) -> PyResult<Activation> {
    match name {
        "linear" => Ok(Activation::Linear),
        "tanh" => Ok(Activation::Tanh),
        "relu" => Ok(Activation::Relu),
        other => Err(PyValueError::new_err(format!(
            "unknown activation '{other}' (expected linear, tanh, or relu)"
        ))),
    }
}

fn parse_loss(kind: &str, epsilon: f64) -> PyResult<PredictionLoss> {
    match kind {
        "hinge" => Ok(PredictionLoss::Hinge),
        "squared_error" => Ok(PredictionLoss::SquaredError),
        "epsilon_insensitive" => Ok(PredictionLoss::EpsilonInsensitive { epsilon }),
        other => Err(PyValueError::new_err(format!(
            "unknown loss '{other}' (expected hinge, squared_error, or epsilon_insensitive)"
        ))),
    }
}

fn dataset_from_rows(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Dataset> {
    let features = Matrix::from_rows(&x).map_err(to_py_err)?;
    Dataset::new("python", features, y, None).map_err(to_py_err)
}

/// Meta-loss `max(0, r + l, c * (1 - r))`.
///
/// Returns `(value, dvalue_dloss, dvalue_dr, branch)` where branch is one
/// of "zero", "accept", "reject".
#[pyfunction]
fn meta_loss(l: f64, r: f64, c: f64) -> PyResult<(f64, f64, f64, String)> {
    let m = losses::meta_loss(l, r, c).map_err(to_py_err)?;
    let branch = match m.branch {
        losses::MetaBranch::Zero => "zero",
        losses::MetaBranch::Accept => "accept",
        losses::MetaBranch::Reject => "reject",
    };
    Ok((m.value, m.dvalue_dloss, m.dvalue_dr, branch.to_string()))
}

/// Prediction loss and its derivative with respect to the prediction.
#[pyfunction]
#[pyo3(signature = (kind, h, y, epsilon = 0.1))]
fn prediction_loss(kind: &str, h: f64, y: f64, epsilon: f64) -> PyResult<(f64, f64)> {
    let lv = parse_loss(kind, epsilon)?.evaluate(h, y).map_err(to_py_err)?;
    Ok((lv.loss, lv.dloss_dh))
}

/// Rank-based AUC with midrank tie handling; positives are labels > 0.
#[pyfunction]
fn auc_roc(scores: Vec<f64>, labels: Vec<f64>) -> PyResult<f64> {
    eval::auc_roc(&scores, &labels).map_err(to_py_err)
}

/// Acceptance mask under the sign rule: `r > 0` keeps the example.
#[pyfunction]
fn accept_mask(r_scores: Vec<f64>) -> Vec<bool> {
    eval::accept_mask(&r_scores)
}

/// Acceptance mask that drops the `round(fraction * n)` lowest scores.
#[pyfunction]
fn reject_fraction_mask(r_scores: Vec<f64>, fraction: f64) -> PyResult<Vec<bool>> {
    eval::reject_fraction_mask(&r_scores, fraction).map_err(to_py_err)
}

/// `(mse, rmse)` between predictions and targets.
#[pyfunction]
fn regression_errors(preds: Vec<f64>, targets: Vec<f64>) -> PyResult<(f64, f64)> {
    eval::regression_errors(&preds, &targets).map_err(to_py_err)
}

/// Fraction of sign mismatches; a score of 0 classifies as +1.
#[pyfunction]
fn classification_error(h_scores: Vec<f64>, labels: Vec<f64>) -> PyResult<f64> {
    eval::classification_error(&h_scores, &labels).map_err(to_py_err)
}

/// Two Gaussian clouds labeled +1/-1; returns `(features, labels)`.
#[pyfunction]
#[pyo3(signature = (n_per_class, sigma = 1.0, seed = 0,
                    center_pos = (0.5, 0.5), center_neg = (-0.5, -0.5)))]
fn gen_synthetic_gaussian(
    n_per_class: usize,
    sigma: f64,
    seed: u64,
    center_pos: (f64, f64),
    center_neg: (f64, f64),
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut rng = RandomStream::new(seed);
    let data = lwr_core::data::gen_synthetic_gaussian(
        n_per_class,
        [center_pos.0, center_pos.1],
        [center_neg.0, center_neg.1],
        sigma,
        &mut rng,
    )
    .map_err(to_py_err)?;
    let rows = (0..data.len()).map(|i| data.row(i).to_vec()).collect();
    Ok((rows, data.targets().to_vec()))
}

/// Run a bundled experiment preset; returns the output directory.
#[pyfunction]
#[pyo3(signature = (name, out_dir, seed = 0, data = None))]
fn run_preset(name: &str, out_dir: PathBuf, seed: u64, data: Option<PathBuf>) -> PyResult<PathBuf> {
    let mut config = experiments::preset(name, seed, &out_dir).map_err(to_py_err)?;
    if let Some(path) = data {
        match &mut config.source {
            experiments::DataSource::Csv { schema } => schema.path = path,
            experiments::DataSource::Synthetic { .. } => {
                return Err(PyValueError::new_err(
                    "data path applies only to CSV-backed presets",
                ))
            }
        }
    }
    experiments::run(&config).map_err(to_py_err)?;
    Ok(config.out_dir)
}

/// A trained predictor/rejector pair.
#[pyclass]
struct RejectiveModel {
    inner: trainer::RejectiveModel,
}

#[pymethods]
impl RejectiveModel {
    /// Train on feature rows `x` and targets `y`.
    ///
    /// Classification uses hinge loss with labels in {-1, +1}; regression
    /// uses squared_error or epsilon_insensitive.
    #[staticmethod]
    #[pyo3(signature = (x, y, *, loss = "hinge", c = 2.0, epochs = 500, batch_size = 32,
                        learning_rate = 1e-3, epsilon = 0.1,
                        h_hidden = vec![], r_hidden = vec![],
                        h_activation = "relu", r_activation = "tanh",
                        standardize_features = false, standardize_targets = false,
                        rff_dim = None, gamma = None, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        loss: &str,
        c: f64,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        epsilon: f64,
        h_hidden: Vec<usize>,
        r_hidden: Vec<usize>,
        h_activation: &str,
        r_activation: &str,
        standardize_features: bool,
        standardize_targets: bool,
        rff_dim: Option<usize>,
        gamma: Option<f64>,
        seed: u64,
    ) -> PyResult<Self> {
        let data = dataset_from_rows(x, y)?;
        let config = TrainConfig {
            rejection_cost: c,
            loss: parse_loss(loss, epsilon)?,
            epochs,
            batch_size,
            optimizer: OptimizerConfig::adaptive(learning_rate),
            seed,
        };
        let pipeline = PipelineConfig {
            standardize_features,
            standardize_targets,
            rff: rff_dim.map(|dim| RffConfig { dim, gamma }),
        };
        let h_arch = Architecture::new(&h_hidden, parse_activation(h_activation)?);
        let r_arch = Architecture::new(&r_hidden, parse_activation(r_activation)?);
        let (inner, _) = trainer::fit_rejective(&data, &h_arch, &r_arch, &pipeline, &config)
            .map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// `(h_score, r_score)` for one raw feature vector. The prediction is
    /// accepted when `r_score > 0`.
    fn predict(&self, x: Vec<f64>) -> PyResult<(f64, f64)> {
        self.inner.predict(&x).map_err(to_py_err)
    }

    /// Scores for a batch of rows: `(h_scores, r_scores)`.
    fn predict_batch(&self, x: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let mut h_scores = Vec::with_capacity(x.len());
        let mut r_scores = Vec::with_capacity(x.len());
        for row in &x {
            let (h, r) = self.inner.predict(row).map_err(to_py_err)?;
            h_scores.push(h);
            r_scores.push(r);
        }
        Ok((h_scores, r_scores))
    }

    /// Mean meta-loss over a dataset, computed as during training.
    fn mean_meta_loss(&self, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<f64> {
        let data = dataset_from_rows(x, y)?;
        self.inner.mean_meta_loss(&data).map_err(to_py_err)
    }

    /// Rejection cost the model was trained with.
    #[getter]
    fn rejection_cost(&self) -> f64 {
        self.inner.config.rejection_cost
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(Path::new(&path)).map_err(to_py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: trainer::RejectiveModel::load(Path::new(&path)).map_err(to_py_err)?,
        })
    }
}

#[pymodule]
fn lwr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(meta_loss, m)?)?;
    m.add_function(wrap_pyfunction!(prediction_loss, m)?)?;
    m.add_function(wrap_pyfunction!(auc_roc, m)?)?;
    m.add_function(wrap_pyfunction!(accept_mask, m)?)?;
    m.add_function(wrap_pyfunction!(reject_fraction_mask, m)?)?;
    m.add_function(wrap_pyfunction!(regression_errors, m)?)?;
    m.add_function(wrap_pyfunction!(classification_error, m)?)?;
    m.add_function(wrap_pyfunction!(gen_synthetic_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    m.add_class::<RejectiveModel>()?;
    Ok(())
}
