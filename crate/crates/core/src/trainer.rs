//! Joint training of the predictor and the rejector.
//!
//! Each minibatch evaluates both networks on every example, feeds the
//! prediction loss and rejection score through the meta-loss, and chains the
//! meta-loss subgradients back into both networks: `dL/dl * dl/dh` drives
//! the predictor, `dL/dr` drives the rejector. Both networks take one
//! optimizer step per batch; gradients are averaged over the batch.
//!
//! Stream derivation tags (fixed): 1 = predictor init, 2 = rejector init,
//! 3 = per-epoch shuffle, 4 = feature-map sampling.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::ScoredBatch;
use crate::features::{median_heuristic_gamma, FeatureTransform, RffMap, Standardizer};
use crate::losses::{meta_loss, PredictionLoss};
use crate::nn::{Activation, Gradients, MlpModel, MlpSpec, OptimizerConfig, OptimizerState};
use crate::numerics::RandomStream;

/// Everything that shapes one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Rejection cost c: larger values penalize rejections more, so fewer
    /// examples end up rejected.
    pub rejection_cost: f64,
    pub loss: PredictionLoss,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            rejection_cost: 2.0,
            loss: PredictionLoss::Hinge,
            epochs: 500,
            batch_size: 32,
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.rejection_cost > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rejection cost must be > 0, got {}",
                self.rejection_cost
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Hidden-layer shape of one scoring network; the output layer is always a
/// single linear neuron.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Architecture {
    pub fn linear() -> Self {
        Self {
            hidden: vec![],
            activation: Activation::Linear,
        }
    }

    pub fn new(hidden: &[usize], activation: Activation) -> Self {
        Self {
            hidden: hidden.to_vec(),
            activation,
        }
    }

    pub fn spec(&self, input_dim: usize) -> Result<MlpSpec> {
        MlpSpec::scorer(input_dim, &self.hidden, self.activation)
    }
}

/// Optional feature/target preprocessing fitted on the training split.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub standardize_features: bool,
    /// Standardize regression targets before the loss; reported errors are
    /// rescaled back to original units.
    #[serde(default)]
    pub standardize_targets: bool,
    #[serde(default)]
    pub rff: Option<RffConfig>,
}

/// Random-Fourier-feature settings; `gamma: None` selects the median
/// heuristic on the (standardized) training features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RffConfig {
    pub dim: usize,
    #[serde(default)]
    pub gamma: Option<f64>,
}

/// Gradients of the meta-loss for one example, chained through both
/// networks. Exposed so the finite-difference tests can exercise exactly
/// the path the trainer uses.
pub fn joint_example_gradients(
    predictor: &MlpModel,
    rejector: &MlpModel,
    loss: PredictionLoss,
    rejection_cost: f64,
    x: &[f64],
    y: f64,
) -> Result<(f64, Option<Gradients>, Option<Gradients>)> {
    let (h_score, h_cache) = predictor.forward(x)?;
    let (r_score, r_cache) = rejector.forward(x)?;
    if !h_score.is_finite() || !r_score.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite network score (h={h_score}, r={r_score})"
        )));
    }
    let loss_value = loss.evaluate(h_score, y)?;
    let meta = meta_loss(loss_value.loss, r_score, rejection_cost)?;
    let upstream_h = meta.dvalue_dloss * loss_value.dloss_dh;
    let h_grads = if upstream_h != 0.0 {
        Some(predictor.backward(&h_cache, upstream_h)?)
    } else {
        None
    };
    let r_grads = if meta.dvalue_dr != 0.0 {
        Some(rejector.backward(&r_cache, meta.dvalue_dr)?)
    } else {
        None
    };
    Ok((meta.value, h_grads, r_grads))
}

/// Outcome of [`train_joint`]: the two trained networks and the mean
/// meta-loss per epoch.
#[derive(Debug, Clone)]
pub struct JointTraining {
    pub predictor: MlpModel,
    pub rejector: MlpModel,
    pub epoch_losses: Vec<f64>,
}

/// Minimizes the summed meta-loss over `data` by minibatch subgradient
/// descent through both networks simultaneously.
///
/// The data is used as-is: callers apply feature/target transforms first
/// (see [`fit_rejective`]). Example order per epoch is a deterministic
/// function of `(seed, epoch)`.
pub fn train_joint(
    data: &Dataset,
    h_spec: &MlpSpec,
    r_spec: &MlpSpec,
    config: &TrainConfig,
) -> Result<JointTraining> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    if h_spec.input_dim() != data.dim() || r_spec.input_dim() != data.dim() {
        return Err(Error::ShapeMismatch(format!(
            "data has {} features but networks expect {} (predictor) and {} (rejector)",
            data.dim(),
            h_spec.input_dim(),
            r_spec.input_dim()
        )));
    }

    let root = RandomStream::new(config.seed);
    let mut predictor = MlpModel::build(h_spec, &mut root.derive(&[1]));
    let mut rejector = MlpModel::build(r_spec, &mut root.derive(&[2]));
    // The rejector starts accepting everything (output bias +1). Starting
    // at 0 can trap training: with every example on the reject branch the
    // predictor receives no gradient, so losses never fall below c and
    // nothing ever gets accepted again.
    let last = rejector.spec().layers().len() - 1;
    rejector.bias_mut(last)[0] = 1.0;
    let mut h_opt = OptimizerState::new(config.optimizer, &predictor);
    let mut r_opt = OptimizerState::new(config.optimizer, &rejector);

    let n = data.len();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut shuffle_rng = root.derive(&[3, epoch as u64]);
        let order = shuffle_rng.permutation(n);
        let mut loss_sum = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let mut h_grads = Gradients::zeros_like(&predictor);
            let mut r_grads = Gradients::zeros_like(&rejector);
            for &i in batch {
                let (value, hg, rg) = joint_example_gradients(
                    &predictor,
                    &rejector,
                    config.loss,
                    config.rejection_cost,
                    data.row(i),
                    data.targets()[i],
                )
                .map_err(|e| {
                    Error::Numeric(format!("epoch {epoch}, batch {batch_idx}: {e}"))
                })?;
                loss_sum += value;
                if let Some(g) = hg {
                    h_grads.add_assign(&g);
                }
                if let Some(g) = rg {
                    r_grads.add_assign(&g);
                }
            }
            let scale = 1.0 / batch.len() as f64;
            h_grads.scale(scale);
            r_grads.scale(scale);
            h_opt.step(&mut predictor, &h_grads).map_err(|e| {
                Error::Numeric(format!("epoch {epoch}, batch {batch_idx} (predictor): {e}"))
            })?;
            r_opt.step(&mut rejector, &r_grads).map_err(|e| {
                Error::Numeric(format!("epoch {epoch}, batch {batch_idx} (rejector): {e}"))
            })?;
        }
        epoch_losses.push(loss_sum / n as f64);
    }

    Ok(JointTraining {
        predictor,
        rejector,
        epoch_losses,
    })
}

/// A trained predictor/rejector pair along with the transforms needed to
/// score raw feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectiveModel {
    pub predictor: MlpModel,
    pub rejector: MlpModel,
    pub feature_transform: FeatureTransform,
    /// Present when targets were standardized for training; predictions are
    /// mapped back through it.
    pub target_scaler: Option<Standardizer>,
    pub config: TrainConfig,
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: RejectiveModel,
}

impl RejectiveModel {
    /// Raw feature dimension this model expects before any transform.
    pub fn raw_input_dim(&self) -> usize {
        if let Some(s) = &self.feature_transform.standardizer {
            s.dim()
        } else if let Some(m) = &self.feature_transform.rff {
            m.input_dim()
        } else {
            self.predictor.input_dim()
        }
    }

    /// Applies the stored transform and both networks. The predictor score
    /// comes back in original target units; the rejection score is raw.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.raw_input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} features but the model expects {}",
                x.len(),
                self.raw_input_dim()
            )));
        }
        let z = self.feature_transform.apply(x)?;
        let h_model = self.predictor.score(&z)?;
        let r = self.rejector.score(&z)?;
        let h = match &self.target_scaler {
            Some(s) => s.invert_scalar(h_model),
            None => h_model,
        };
        Ok((h, r))
    }

    /// Scores every row of `data`; targets pass through in original units.
    pub fn score_batch(&self, data: &Dataset) -> Result<ScoredBatch> {
        let mut h_scores = Vec::with_capacity(data.len());
        let mut r_scores = Vec::with_capacity(data.len());
        for i in 0..data.len() {
            let (h, r) = self.predict(data.row(i))?;
            h_scores.push(h);
            r_scores.push(r);
        }
        ScoredBatch::new(h_scores, r_scores, data.targets().to_vec())
    }

    /// Mean meta-loss over `data`, computed exactly as during training
    /// (transforms applied, targets in model units); no parameters change.
    pub fn mean_meta_loss(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Data("cannot evaluate an empty dataset".into()));
        }
        let mut acc = 0.0;
        for i in 0..data.len() {
            let z = self.feature_transform.apply(data.row(i))?;
            let h = self.predictor.score(&z)?;
            let r = self.rejector.score(&z)?;
            let y = match &self.target_scaler {
                Some(s) => s.apply_scalar(data.targets()[i]),
                None => data.targets()[i],
            };
            let lv = self.config.loss.evaluate(h, y)?;
            acc += meta_loss(lv.loss, r, self.config.rejection_cost)?.value;
        }
        Ok(acc / data.len() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        let json = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RejectiveModel> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("cannot read model {}: {e}", path.display())))?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Data(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        file.model.predictor.validate()?;
        file.model.rejector.validate()?;
        Ok(file.model)
    }
}

/// Fits transforms on the training data, trains both networks on the
/// transformed features, and packages the result.
pub fn fit_rejective(
    data: &Dataset,
    h_arch: &Architecture,
    r_arch: &Architecture,
    pipeline: &PipelineConfig,
    config: &TrainConfig,
) -> Result<(RejectiveModel, Vec<f64>)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Data("cannot fit on an empty dataset".into()));
    }

    let root = RandomStream::new(config.seed);
    let standardizer = if pipeline.standardize_features {
        Some(Standardizer::fit(data.features())?)
    } else {
        None
    };
    let staged = match &standardizer {
        Some(s) => s.apply_matrix(data.features())?,
        None => data.features().clone(),
    };
    let rff = match &pipeline.rff {
        Some(cfg) => {
            let gamma = match cfg.gamma {
                Some(g) => g,
                None => median_heuristic_gamma(&staged),
            };
            let mut rff_rng = root.derive(&[4]);
            Some(RffMap::sample(staged.cols(), cfg.dim, gamma, &mut rff_rng)?)
        }
        None => None,
    };
    let feature_transform = FeatureTransform { standardizer, rff };
    let transformed = match &feature_transform.rff {
        Some(map) => {
            let mut rows = Vec::with_capacity(staged.rows());
            for i in 0..staged.rows() {
                rows.push(map.apply(staged.row(i))?);
            }
            crate::numerics::Matrix::from_rows(&rows)?
        }
        None => staged,
    };

    let target_scaler = if pipeline.standardize_targets {
        if config.loss.is_classification() {
            return Err(Error::InvalidArgument(
                "target standardization only applies to regression losses".into(),
            ));
        }
        Some(Standardizer::fit_column(data.targets())?)
    } else {
        None
    };
    let targets: Vec<f64> = match &target_scaler {
        Some(s) => data.targets().iter().map(|&y| s.apply_scalar(y)).collect(),
        None => data.targets().to_vec(),
    };

    let train_data = Dataset::new(data.name(), transformed, targets, None)?;
    let input_dim = train_data.dim();
    let outcome = train_joint(
        &train_data,
        &h_arch.spec(input_dim)?,
        &r_arch.spec(input_dim)?,
        config,
    )?;

    Ok((
        RejectiveModel {
            predictor: outcome.predictor,
            rejector: outcome.rejector,
            feature_transform,
            target_scaler,
            config: config.clone(),
        },
        outcome.epoch_losses,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    fn toy_separable() -> Dataset {
        let x = Matrix::from_rows(&[
            vec![1.0, 1.0],
            vec![1.5, 0.5],
            vec![-1.0, -1.0],
            vec![-0.5, -1.5],
        ])
        .unwrap();
        Dataset::new("toy", x, vec![1.0, 1.0, -1.0, -1.0], None).unwrap()
    }

    fn toy_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            rejection_cost: 2.0,
            loss: PredictionLoss::Hinge,
            epochs,
            batch_size: 4,
            optimizer: OptimizerConfig::adaptive(2e-3),
            seed: 7,
        }
    }

    #[test]
    fn zero_epochs_returns_seeded_initialization() {
        let data = toy_separable();
        let h_spec = MlpSpec::scorer(2, &[], Activation::Linear).unwrap();
        let r_spec = MlpSpec::scorer(2, &[2], Activation::Tanh).unwrap();
        let cfg = toy_config(0);
        let out = train_joint(&data, &h_spec, &r_spec, &cfg).unwrap();
        let root = RandomStream::new(cfg.seed);
        let expect_h = MlpModel::build(&h_spec, &mut root.derive(&[1]));
        let mut expect_r = MlpModel::build(&r_spec, &mut root.derive(&[2]));
        expect_r.bias_mut(1)[0] = 1.0;
        assert_eq!(out.predictor, expect_h);
        assert_eq!(out.rejector, expect_r);
        assert!(out.epoch_losses.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_separable();
        let h_spec = MlpSpec::scorer(2, &[], Activation::Linear).unwrap();
        let r_spec = MlpSpec::scorer(2, &[2], Activation::Tanh).unwrap();
        let cfg = toy_config(50);
        let a = train_joint(&data, &h_spec, &r_spec, &cfg).unwrap();
        let b = train_joint(&data, &h_spec, &r_spec, &cfg).unwrap();
        assert_eq!(a.predictor, b.predictor);
        assert_eq!(a.rejector, b.rejector);
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }

    /// On a separable toy set the loss can reach its analytic floor
    /// c/(1+c): zero prediction loss with every example accepted at
    /// r = c/(1+c).
    #[test]
    fn toy_set_reaches_per_example_optimum() {
        let data = toy_separable();
        let h_spec = MlpSpec::scorer(2, &[], Activation::Linear).unwrap();
        let r_spec = MlpSpec::scorer(2, &[2], Activation::Tanh).unwrap();
        let cfg = toy_config(2000);
        let out = train_joint(&data, &h_spec, &r_spec, &cfg).unwrap();
        let floor = 2.0 / 3.0;
        let last = *out.epoch_losses.last().unwrap();
        assert!(
            (last - floor).abs() < 0.05,
            "final mean meta-loss {last} vs floor {floor}"
        );
        for i in 0..data.len() {
            let r = out.rejector.score(data.row(i)).unwrap();
            assert!(r > 0.0, "example {i} rejected with r={r}");
        }
        // Training progressed relative to the start.
        assert!(out.epoch_losses.last().unwrap() <= out.epoch_losses.first().unwrap());
    }

    #[test]
    fn toy_loss_is_non_increasing_late_in_training() {
        let data = toy_separable();
        let h_spec = MlpSpec::scorer(2, &[], Activation::Linear).unwrap();
        let r_spec = MlpSpec::scorer(2, &[2], Activation::Tanh).unwrap();
        let out = train_joint(&data, &h_spec, &r_spec, &toy_config(1000)).unwrap();
        let tail = &out.epoch_losses[500..];
        for w in tail.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-3,
                "late-epoch loss rose from {} to {}",
                w[0],
                w[1]
            );
        }
    }

    /// End-to-end gradient check: the chained meta-loss gradients match
    /// central finite differences of the full per-example pipeline.
    #[test]
    fn joint_gradients_match_finite_differences() {
        let mut rng = RandomStream::new(99);
        let losses = [
            PredictionLoss::Hinge,
            PredictionLoss::SquaredError,
            PredictionLoss::EpsilonInsensitive { epsilon: 0.1 },
        ];
        let mut checked = 0;
        let mut attempt = 0;
        while checked < 40 {
            attempt += 1;
            let loss = losses[attempt % losses.len()];
            let c = 0.5 + rng.uniform() * 2.0;
            let h_spec = MlpSpec::scorer(3, &[4], Activation::Tanh).unwrap();
            let r_spec = MlpSpec::scorer(3, &[3], Activation::Tanh).unwrap();
            let mut h = MlpModel::build(&h_spec, &mut rng.derive(&[attempt as u64, 1]));
            let mut r = MlpModel::build(&r_spec, &mut rng.derive(&[attempt as u64, 2]));
            let x = rng.sample_normal(3, 0.0, 1.0).unwrap();
            let y = if loss.is_classification() {
                if rng.uniform() < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            } else {
                rng.sample_normal(1, 0.0, 1.0).unwrap()[0]
            };

            // Skip configurations near a meta-loss tie or a loss kink,
            // where finite differences straddle non-smooth points.
            let h_score = h.score(&x).unwrap();
            let r_score = r.score(&x).unwrap();
            let lv = loss.evaluate(h_score, y).unwrap();
            let accept = r_score + lv.loss;
            let reject = c * (1.0 - r_score);
            let branch_gaps =
                [(accept - reject).abs(), accept.abs(), reject.abs()];
            if branch_gaps.iter().filter(|g| **g < 1e-3).count() > 1 {
                continue;
            }
            let kink_gap = match loss {
                PredictionLoss::Hinge => (1.0 - y * h_score).abs(),
                PredictionLoss::EpsilonInsensitive { epsilon } => {
                    ((h_score - y).abs() - epsilon).abs()
                }
                PredictionLoss::SquaredError => 1.0,
            };
            if kink_gap < 1e-3 {
                continue;
            }

            let (_, hg, rg) = joint_example_gradients(&h, &r, loss, c, &x, y).unwrap();
            let step = 1e-5;
            let pipeline = |h: &MlpModel, r: &MlpModel| -> f64 {
                let lv = loss.evaluate(h.score(&x).unwrap(), y).unwrap();
                meta_loss(lv.loss, r.score(&x).unwrap(), c).unwrap().value
            };

            for (model_idx, grads) in [(0, &hg), (1, &rg)] {
                let Some(grads) = grads else { continue };
                for k in 0..grads.d_weights.len() {
                    let (rows, cols) = (grads.d_weights[k].rows(), grads.d_weights[k].cols());
                    for i in 0..rows {
                        for j in 0..cols {
                            let target = if model_idx == 0 { &mut h } else { &mut r };
                            let orig = target.weights()[k].get(i, j);
                            target.weight_mut(k).set(i, j, orig + step);
                            let up = pipeline(&h, &r);
                            let target = if model_idx == 0 { &mut h } else { &mut r };
                            target.weight_mut(k).set(i, j, orig - step);
                            let down = pipeline(&h, &r);
                            let target = if model_idx == 0 { &mut h } else { &mut r };
                            target.weight_mut(k).set(i, j, orig);
                            let numeric = (up - down) / (2.0 * step);
                            let analytic = grads.d_weights[k].get(i, j);
                            if analytic.abs() < 1e-8 && numeric.abs() < 1e-8 {
                                continue;
                            }
                            let rel = (analytic - numeric).abs()
                                / analytic.abs().max(numeric.abs());
                            assert!(
                                rel <= 1e-4,
                                "attempt {attempt} model {model_idx} layer {k} ({i},{j}): \
                                 analytic {analytic} vs numeric {numeric}"
                            );
                        }
                    }
                }
            }
            checked += 1;
        }
    }

    #[test]
    fn smaller_cost_rejects_at_least_as_many() {
        let mut rng = RandomStream::new(123);
        let data =
            crate::data::gen_synthetic_gaussian(60, [0.5, 0.5], [-0.5, -0.5], 1.0, &mut rng)
                .unwrap();
        let h_spec = MlpSpec::scorer(2, &[], Activation::Linear).unwrap();
        let r_spec = MlpSpec::scorer(2, &[2], Activation::Tanh).unwrap();
        let count_rejections = |cost: f64| {
            let cfg = TrainConfig {
                rejection_cost: cost,
                loss: PredictionLoss::Hinge,
                epochs: 400,
                batch_size: 120,
                optimizer: OptimizerConfig::adaptive(1e-2),
                seed: 5,
            };
            let out = train_joint(&data, &h_spec, &r_spec, &cfg).unwrap();
            (0..data.len())
                .filter(|&i| out.rejector.score(data.row(i)).unwrap() <= 0.0)
                .count()
        };
        let low_c = count_rejections(0.1);
        let high_c = count_rejections(10.0);
        assert!(
            low_c >= high_c,
            "c=0.1 rejected {low_c}, c=10 rejected {high_c}"
        );
    }

    #[test]
    fn mean_meta_loss_hand_cases() {
        // All-zero networks, squared loss, y = 0, c = 2: every example sits
        // on the reject branch with L = 2.
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap();
        let data = Dataset::new("zeros", x, vec![0.0, 0.0], None).unwrap();
        let spec = MlpSpec::scorer(2, &[], Activation::Linear).unwrap();
        let zero = MlpModel::from_parameters(
            spec.clone(),
            vec![Matrix::zeros(1, 2)],
            vec![vec![0.0]],
        )
        .unwrap();
        let model = RejectiveModel {
            predictor: zero.clone(),
            rejector: zero,
            feature_transform: FeatureTransform::identity(),
            target_scaler: None,
            config: TrainConfig {
                rejection_cost: 2.0,
                loss: PredictionLoss::SquaredError,
                ..TrainConfig::default()
            },
        };
        assert_eq!(model.mean_meta_loss(&data).unwrap(), 2.0);
    }

    #[test]
    fn mean_meta_loss_single_example_matches_meta_loss() {
        // h = 0 vs y = 1 under squared loss gives l = 1; rejector emits -1;
        // c = 2 puts the example on the reject branch at L = 4.
        let x = Matrix::from_rows(&[vec![3.0]]).unwrap();
        let data = Dataset::new("one", x, vec![1.0], None).unwrap();
        let spec = MlpSpec::scorer(1, &[], Activation::Linear).unwrap();
        let predictor = MlpModel::from_parameters(
            spec.clone(),
            vec![Matrix::zeros(1, 1)],
            vec![vec![0.0]],
        )
        .unwrap();
        let rejector = MlpModel::from_parameters(
            spec,
            vec![Matrix::zeros(1, 1)],
            vec![vec![-1.0]],
        )
        .unwrap();
        let model = RejectiveModel {
            predictor,
            rejector,
            feature_transform: FeatureTransform::identity(),
            target_scaler: None,
            config: TrainConfig {
                rejection_cost: 2.0,
                loss: PredictionLoss::SquaredError,
                ..TrainConfig::default()
            },
        };
        assert_eq!(model.mean_meta_loss(&data).unwrap(), 4.0);
    }

    #[test]
    fn training_lowers_mean_meta_loss_from_initialization() {
        let data = toy_separable();
        let h_arch = Architecture::linear();
        let r_arch = Architecture::new(&[2], Activation::Tanh);
        let cfg = toy_config(500);
        let (trained, _) =
            fit_rejective(&data, &h_arch, &r_arch, &PipelineConfig::default(), &cfg).unwrap();
        let (initial, _) = fit_rejective(
            &data,
            &h_arch,
            &r_arch,
            &PipelineConfig::default(),
            &TrainConfig { epochs: 0, ..cfg },
        )
        .unwrap();
        assert!(
            trained.mean_meta_loss(&data).unwrap() <= initial.mean_meta_loss(&data).unwrap()
        );
    }

    #[test]
    fn predict_applies_transform_and_networks() {
        // Hand-built single-layer predictor picks out the first feature.
        let spec = MlpSpec::scorer(2, &[], Activation::Linear).unwrap();
        let predictor = MlpModel::from_parameters(
            spec.clone(),
            vec![Matrix::new(1, 2, vec![1.0, 0.0]).unwrap()],
            vec![vec![0.0]],
        )
        .unwrap();
        let rejector = MlpModel::from_parameters(
            spec,
            vec![Matrix::zeros(1, 2)],
            vec![vec![0.0]],
        )
        .unwrap();
        let model = RejectiveModel {
            predictor,
            rejector,
            feature_transform: FeatureTransform::identity(),
            target_scaler: None,
            config: TrainConfig::default(),
        };
        let (h, r) = model.predict(&[3.0, 7.0]).unwrap();
        assert_eq!((h, r), (3.0, 0.0));
        let again = model.predict(&[3.0, 7.0]).unwrap();
        assert_eq!(again, (h, r));
        assert!(model.predict(&[1.0]).is_err());
    }

    #[test]
    fn model_save_load_round_trip_is_bit_exact() {
        let mut rng = RandomStream::new(2);
        let data =
            crate::data::gen_synthetic_gaussian(30, [0.5, 0.5], [-0.5, -0.5], 1.0, &mut rng)
                .unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 60,
            seed: 3,
            ..TrainConfig::default()
        };
        let pipeline = PipelineConfig {
            standardize_features: true,
            standardize_targets: false,
            rff: Some(RffConfig {
                dim: 16,
                gamma: None,
            }),
        };
        let (model, _) = fit_rejective(
            &data,
            &Architecture::linear(),
            &Architecture::new(&[2], Activation::Tanh),
            &pipeline,
            &cfg,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let loaded = RejectiveModel::load(&path).unwrap();
        assert_eq!(model, loaded);
        // Scores agree bit-for-bit on raw inputs.
        let (h1, r1) = model.predict(data.row(0)).unwrap();
        let (h2, r2) = loaded.predict(data.row(0)).unwrap();
        assert_eq!((h1, r1), (h2, r2));
    }
}
