//! Evaluation protocol harnesses: repeated (stratified) k-fold
//! cross-validation, repeated random train/test splits, and
//! leave-one-group-out cross-validation.
//!
//! Every fold trains a fresh predictor/rejector pair on its training rows
//! only (transforms included), scores the held-out rows, and records the
//! metric at each requested rejection fraction plus the sign-rule (`r > 0`)
//! value. Folds are independent and run in parallel; per-fold seeds are
//! derived from `(seed, repeat, fold)`, so results do not depend on
//! scheduling order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{accept_mask, risk_coverage_curve, MetricKind, RejectionMode};
use crate::numerics::RandomStream;
use crate::trainer::{fit_rejective, Architecture, PipelineConfig, TrainConfig};

/// Everything needed to train and evaluate one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub h_arch: Architecture,
    pub r_arch: Architecture,
    pub pipeline: PipelineConfig,
    /// Training settings; the seed field is replaced by the per-fold seed.
    pub train: TrainConfig,
    pub metric: MetricKind,
    /// Also evaluate this many uniformly random rejection sets per fraction,
    /// for the random-rejection baseline curves.
    #[serde(default)]
    pub random_baseline_trials: Option<usize>,
}

/// Metrics for one train/evaluate cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    /// Group key for leave-one-group-out folds.
    pub group: Option<String>,
    pub n_train: usize,
    pub n_test: usize,
    /// Metric on the accepted subset at each requested fraction, parallel
    /// to the summary's fraction list. Fraction 0 is the no-rejection value.
    pub metric_by_fraction: Vec<f64>,
    /// Metric after dropping `r <= 0` examples; `None` when undefined on
    /// the accepted subset (everything rejected, or single-class AUC).
    pub accept_rule_metric: Option<f64>,
    /// Fraction of test examples the sign rule rejected.
    pub accept_rule_fraction: f64,
    /// Random-rejection baseline per fraction, when requested.
    #[serde(default)]
    pub random_by_fraction: Option<Vec<f64>>,
}

/// Aggregates across folds: mean and population standard deviation per
/// fraction, with the per-fold values retained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub protocol: String,
    pub seed: u64,
    pub metric: MetricKind,
    pub fractions: Vec<f64>,
    pub mean_by_fraction: Vec<f64>,
    pub std_by_fraction: Vec<f64>,
    pub accept_rule_mean: Option<f64>,
    pub accept_rule_std: Option<f64>,
    pub accept_rule_fraction_mean: f64,
    /// Mean random-rejection baseline per fraction, when every fold has one.
    #[serde(default)]
    pub random_mean_by_fraction: Option<Vec<f64>>,
    pub folds: Vec<FoldResult>,
}

impl ProtocolSummary {
    /// Mean metric at a given fraction, if it was requested.
    pub fn mean_at(&self, fraction: f64) -> Option<f64> {
        self.fractions
            .iter()
            .position(|&f| f == fraction)
            .map(|i| self.mean_by_fraction[i])
    }
}

/// A fold's metrics together with the raw test scores that produced them.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub fold: FoldResult,
    pub batch: crate::eval::ScoredBatch,
}

/// Trains on `train`, scores `test`, and sweeps the rejection fractions.
pub fn evaluate_split(
    train: &Dataset,
    test: &Dataset,
    spec: &PipelineSpec,
    fold_seed: u64,
    fractions: &[f64],
) -> Result<SplitOutcome> {
    let cfg = TrainConfig {
        seed: fold_seed,
        ..spec.train.clone()
    };
    let (model, _) = fit_rejective(train, &spec.h_arch, &spec.r_arch, &spec.pipeline, &cfg)?;
    let batch = model.score_batch(test)?;

    let curve = risk_coverage_curve(&batch, fractions, spec.metric, RejectionMode::Learned)?;
    let metric_by_fraction = curve.points.iter().map(|p| p.value).collect();

    let random_by_fraction = match spec.random_baseline_trials {
        Some(trials) => {
            let curve = risk_coverage_curve(
                &batch,
                fractions,
                spec.metric,
                RejectionMode::Random {
                    trials,
                    seed: RandomStream::new(fold_seed).derive(&[13]).seed(),
                },
            )?;
            Some(curve.points.iter().map(|p| p.value).collect())
        }
        None => None,
    };

    let mask = accept_mask(&batch.r_scores);
    let n_accepted = mask.iter().filter(|&&m| m).count();
    let accept_rule_metric = if n_accepted == 0 {
        None
    } else {
        spec.metric.compute_masked(&batch, &mask).ok()
    };
    let fold = FoldResult {
        repeat: 0,
        fold: 0,
        group: None,
        n_train: train.len(),
        n_test: test.len(),
        metric_by_fraction,
        accept_rule_metric,
        accept_rule_fraction: 1.0 - n_accepted as f64 / test.len() as f64,
        random_by_fraction,
    };
    Ok(SplitOutcome { fold, batch })
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn summarize(
    protocol: String,
    seed: u64,
    metric: MetricKind,
    fractions: &[f64],
    folds: Vec<FoldResult>,
) -> ProtocolSummary {
    let mut mean_by_fraction = Vec::with_capacity(fractions.len());
    let mut std_by_fraction = Vec::with_capacity(fractions.len());
    for fi in 0..fractions.len() {
        let values: Vec<f64> = folds.iter().map(|f| f.metric_by_fraction[fi]).collect();
        let (m, s) = mean_and_std(&values);
        mean_by_fraction.push(m);
        std_by_fraction.push(s);
    }
    let rule_values: Vec<f64> = folds.iter().filter_map(|f| f.accept_rule_metric).collect();
    let (accept_rule_mean, accept_rule_std) = if rule_values.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_and_std(&rule_values);
        (Some(m), Some(s))
    };
    let rule_fractions: Vec<f64> = folds.iter().map(|f| f.accept_rule_fraction).collect();
    let random_mean_by_fraction = if folds.iter().all(|f| f.random_by_fraction.is_some()) {
        Some(
            (0..fractions.len())
                .map(|fi| {
                    mean_and_std(
                        &folds
                            .iter()
                            .map(|f| f.random_by_fraction.as_ref().unwrap()[fi])
                            .collect::<Vec<_>>(),
                    )
                    .0
                })
                .collect(),
        )
    } else {
        None
    };
    ProtocolSummary {
        protocol,
        seed,
        metric,
        fractions: fractions.to_vec(),
        mean_by_fraction,
        std_by_fraction,
        accept_rule_mean,
        accept_rule_std,
        accept_rule_fraction_mean: mean_and_std(&rule_fractions).0,
        random_mean_by_fraction,
        folds,
    }
}

/// One fold assignment: which rows to train on and which to test.
struct FoldJob {
    repeat: usize,
    fold: usize,
    group: Option<String>,
    train_idx: Vec<usize>,
    test_idx: Vec<usize>,
    fold_seed: u64,
}

fn run_jobs(
    data: &Dataset,
    spec: &PipelineSpec,
    fractions: &[f64],
    jobs: Vec<FoldJob>,
) -> Result<Vec<FoldResult>> {
    jobs.into_par_iter()
        .map(|job| {
            let (train, test) = data.split_rows(&job.train_idx, &job.test_idx)?;
            let outcome = evaluate_split(&train, &test, spec, job.fold_seed, fractions)?;
            let mut result = outcome.fold;
            result.repeat = job.repeat;
            result.fold = job.fold;
            result.group = job.group;
            Ok(result)
        })
        .collect()
}

/// Partition `0..n` into `k` folds; classification data is stratified by
/// label so each fold keeps the class ratio.
fn kfold_partition(
    labels: Option<&[f64]>,
    n: usize,
    k: usize,
    rng: &mut RandomStream,
) -> Result<Vec<Vec<usize>>> {
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    match labels {
        Some(labels) => {
            let mut classes: Vec<f64> = labels.to_vec();
            classes.sort_by(|a, b| a.partial_cmp(b).unwrap());
            classes.dedup();
            for class in classes {
                let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
                if members.len() < k {
                    return Err(Error::Data(format!(
                        "class {class} has {} members, fewer than k={k}",
                        members.len()
                    )));
                }
                rng.shuffle(&mut members);
                for (pos, idx) in members.into_iter().enumerate() {
                    folds[pos % k].push(idx);
                }
            }
        }
        None => {
            let mut order = rng.permutation(n);
            for (pos, idx) in order.drain(..).enumerate() {
                folds[pos % k].push(idx);
            }
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// `repeats` runs of `k`-fold cross-validation.
///
/// Classification tasks (hinge loss) are stratified by class. Each fold's
/// transforms and networks are fitted on its training rows only.
pub fn kfold_repeated(
    data: &Dataset,
    k: usize,
    repeats: usize,
    spec: &PipelineSpec,
    fractions: &[f64],
    seed: u64,
) -> Result<ProtocolSummary> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    let root = RandomStream::new(seed);
    let stratify = spec.train.loss.is_classification();
    let mut jobs = Vec::with_capacity(k * repeats);
    for repeat in 0..repeats {
        let mut shuffle_rng = root.derive(&[5, repeat as u64]);
        let folds = kfold_partition(
            stratify.then(|| data.targets()),
            data.len(),
            k,
            &mut shuffle_rng,
        )?;
        for (fold_idx, test_idx) in folds.iter().enumerate() {
            let train_idx: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != fold_idx)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            jobs.push(FoldJob {
                repeat,
                fold: fold_idx,
                group: None,
                train_idx,
                test_idx: test_idx.clone(),
                fold_seed: root.derive(&[6, repeat as u64, fold_idx as u64]).seed(),
            });
        }
    }
    let folds = run_jobs(data, spec, fractions, jobs)?;
    Ok(summarize(
        format!("kfold k={k} repeats={repeats} stratified={stratify}"),
        seed,
        spec.metric,
        fractions,
        folds,
    ))
}

/// `repeats` random train/test splits with the given training fraction.
pub fn repeated_split(
    data: &Dataset,
    train_fraction: f64,
    repeats: usize,
    spec: &PipelineSpec,
    fractions: &[f64],
    seed: u64,
) -> Result<ProtocolSummary> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    let n = data.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Data(format!(
            "split of {n} rows at fraction {train_fraction} leaves an empty side"
        )));
    }
    let root = RandomStream::new(seed);
    let mut jobs = Vec::with_capacity(repeats);
    for repeat in 0..repeats {
        let mut shuffle_rng = root.derive(&[7, repeat as u64]);
        let perm = shuffle_rng.permutation(n);
        let mut train_idx = perm[..n_train].to_vec();
        let mut test_idx = perm[n_train..].to_vec();
        train_idx.sort_unstable();
        test_idx.sort_unstable();
        jobs.push(FoldJob {
            repeat,
            fold: 0,
            group: None,
            train_idx,
            test_idx,
            fold_seed: root.derive(&[8, repeat as u64]).seed(),
        });
    }
    let folds = run_jobs(data, spec, fractions, jobs)?;
    Ok(summarize(
        format!("repeated-split train_fraction={train_fraction} repeats={repeats}"),
        seed,
        spec.metric,
        fractions,
        folds,
    ))
}

/// One fold per distinct group key: test on the group, train on the rest.
/// Groups fold in sorted key order.
pub fn leave_one_group_out(
    data: &Dataset,
    spec: &PipelineSpec,
    fractions: &[f64],
    seed: u64,
) -> Result<ProtocolSummary> {
    let by_group = data.group_index()?;
    if by_group.len() < 2 {
        return Err(Error::Data(format!(
            "leave-one-group-out needs at least 2 groups, found {}",
            by_group.len()
        )));
    }
    let root = RandomStream::new(seed);
    let mut jobs = Vec::with_capacity(by_group.len());
    for (fold_idx, (group, test_idx)) in by_group.iter().enumerate() {
        let train_idx: Vec<usize> = by_group
            .iter()
            .filter(|(g, _)| *g != group)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        jobs.push(FoldJob {
            repeat: 0,
            fold: fold_idx,
            group: Some(group.clone()),
            train_idx,
            test_idx: test_idx.clone(),
            fold_seed: root.derive(&[9, fold_idx as u64]).seed(),
        });
    }
    let folds = run_jobs(data, spec, fractions, jobs)?;
    Ok(summarize(
        format!("leave-one-group-out groups={}", by_group.len()),
        seed,
        spec.metric,
        fractions,
        folds,
    ))
}
