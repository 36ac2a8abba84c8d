//! Acceptance rules, rejection masks, metrics, and risk-coverage curves.
//!
//! All mask functions return acceptance masks: `mask[i]` is `true` when
//! example `i` is kept. The sign rule accepts strictly positive rejection
//! scores (`r = 0` rejects); fraction-based rejection drops the
//! `round(fraction * n)` examples with the lowest rejection scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RandomStream;

/// Test-time scores for a batch: predictor output, rejector output, target.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredBatch {
    pub h_scores: Vec<f64>,
    pub r_scores: Vec<f64>,
    pub targets: Vec<f64>,
}

impl ScoredBatch {
    pub fn new(h_scores: Vec<f64>, r_scores: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if h_scores.len() != r_scores.len() || h_scores.len() != targets.len() {
            return Err(Error::ShapeMismatch(format!(
                "scored batch lengths differ: h={}, r={}, y={}",
                h_scores.len(),
                r_scores.len(),
                targets.len()
            )));
        }
        if h_scores
            .iter()
            .chain(&r_scores)
            .chain(&targets)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Numeric("non-finite value in scored batch".into()));
        }
        Ok(Self {
            h_scores,
            r_scores,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.h_scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h_scores.is_empty()
    }
}

/// Sign acceptance rule: accept exactly the examples with `r > 0`.
pub fn accept_mask(r_scores: &[f64]) -> Vec<bool> {
    r_scores.iter().map(|&r| r > 0.0).collect()
}

/// Fraction-based rejection: rejects the `round(fraction * n)` examples with
/// the lowest rejection scores (ties broken by original index) and returns
/// the acceptance mask.
pub fn reject_fraction_mask(r_scores: &[f64], fraction: f64) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "rejection fraction must be in [0, 1], got {fraction}"
        )));
    }
    let n = r_scores.len();
    let k = (fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        r_scores[a]
            .partial_cmp(&r_scores[b])
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    let mut mask = vec![true; n];
    for &i in order.iter().take(k) {
        mask[i] = false;
    }
    Ok(mask)
}

fn masked<'a>(values: &'a [f64], mask: &'a [bool]) -> impl Iterator<Item = f64> + 'a {
    values
        .iter()
        .zip(mask)
        .filter(|(_, keep)| **keep)
        .map(|(v, _)| *v)
}

/// Rank-based (Mann-Whitney) AUC with midrank tie handling.
///
/// Labels must contain both classes; positives are `y > 0`.
pub fn auc_roc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&y| y > 0.0).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Data(format!(
            "AUC undefined: {n_pos} positive and {n_neg} negative examples"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // Midranks over tied score runs; rank sum of the positive class gives
    // the Mann-Whitney statistic.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] > 0.0 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Mean squared error and its square root, in the units of the inputs.
pub fn regression_errors(preds: &[f64], targets: &[f64]) -> Result<(f64, f64)> {
    if preds.is_empty() {
        return Err(Error::InvalidArgument(
            "regression errors need at least one example".into(),
        ));
    }
    if preds.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions but {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let mse = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / preds.len() as f64;
    Ok((mse, mse.sqrt()))
}

/// Fraction of sign disagreements; a score of exactly 0 classifies as +1.
pub fn classification_error(h_scores: &[f64], labels: &[f64]) -> Result<f64> {
    if h_scores.is_empty() {
        return Err(Error::InvalidArgument(
            "classification error needs at least one example".into(),
        ));
    }
    if h_scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores but {} labels",
            h_scores.len(),
            labels.len()
        )));
    }
    let wrong = h_scores
        .iter()
        .zip(labels)
        .filter(|(&h, &y)| {
            let predicted = if h >= 0.0 { 1.0 } else { -1.0 };
            let actual = if y > 0.0 { 1.0 } else { -1.0 };
            predicted != actual
        })
        .count();
    Ok(wrong as f64 / h_scores.len() as f64)
}

/// Which metric a curve or table reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    AucRoc,
    Mse,
    Rmse,
    ClassificationError,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::AucRoc => "auc_roc",
            MetricKind::Mse => "mse",
            MetricKind::Rmse => "rmse",
            MetricKind::ClassificationError => "classification_error",
        }
    }

    /// Larger values are better for AUC; smaller for the error metrics.
    pub fn higher_is_better(&self) -> bool {
        matches!(self, MetricKind::AucRoc)
    }

    /// Evaluates the metric over the masked subset of a batch.
    pub fn compute_masked(&self, batch: &ScoredBatch, mask: &[bool]) -> Result<f64> {
        let h: Vec<f64> = masked(&batch.h_scores, mask).collect();
        let y: Vec<f64> = masked(&batch.targets, mask).collect();
        if h.is_empty() {
            return Err(Error::InvalidArgument(
                "all examples rejected; metric undefined".into(),
            ));
        }
        match self {
            MetricKind::AucRoc => auc_roc(&h, &y),
            MetricKind::Mse => Ok(regression_errors(&h, &y)?.0),
            MetricKind::Rmse => Ok(regression_errors(&h, &y)?.1),
            MetricKind::ClassificationError => classification_error(&h, &y),
        }
    }

    pub fn compute(&self, batch: &ScoredBatch) -> Result<f64> {
        self.compute_masked(batch, &vec![true; batch.len()])
    }
}

/// How examples are selected for rejection when sweeping fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RejectionMode {
    /// Reject the lowest rejection scores.
    Learned,
    /// Reject uniformly random subsets of the same size, averaged over
    /// `trials` draws; deterministic under `seed`.
    Random { trials: usize, seed: u64 },
}

impl RejectionMode {
    pub fn label(&self) -> &'static str {
        match self {
            RejectionMode::Learned => "learned",
            RejectionMode::Random { .. } => "random",
        }
    }
}

/// One point on a risk-coverage curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub value: f64,
    pub n_accepted: usize,
}

/// A metric swept over rejection fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCoverageCurve {
    pub metric: MetricKind,
    pub mode: RejectionMode,
    pub points: Vec<CurvePoint>,
}

/// Sweeps the metric over the given rejection fractions.
///
/// Fractions must be strictly increasing within `[0, 1]`. In learned mode
/// the lowest rejection scores go first; in random mode the metric is the
/// mean over `trials` uniformly random rejection sets of the same size.
pub fn risk_coverage_curve(
    batch: &ScoredBatch,
    fractions: &[f64],
    metric: MetricKind,
    mode: RejectionMode,
) -> Result<RiskCoverageCurve> {
    if fractions.is_empty() {
        return Err(Error::InvalidArgument("no rejection fractions given".into()));
    }
    for w in fractions.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidArgument(format!(
                "fractions must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    let n = batch.len();
    let mut points = Vec::with_capacity(fractions.len());
    for (f_idx, &fraction) in fractions.iter().enumerate() {
        let k = {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::InvalidArgument(format!(
                    "rejection fraction must be in [0, 1], got {fraction}"
                )));
            }
            (fraction * n as f64).round() as usize
        };
        let value = match mode {
            RejectionMode::Learned => {
                let mask = reject_fraction_mask(&batch.r_scores, fraction)?;
                metric.compute_masked(batch, &mask).map_err(|e| {
                    Error::Data(format!("at fraction {fraction}: {e}"))
                })?
            }
            RejectionMode::Random { trials, seed } => {
                if trials == 0 {
                    return Err(Error::InvalidArgument("random mode needs trials >= 1".into()));
                }
                let root = RandomStream::new(seed);
                let mut acc = 0.0;
                for trial in 0..trials {
                    let mut rng = root.derive(&[f_idx as u64, trial as u64]);
                    let perm = rng.permutation(n);
                    let mut mask = vec![true; n];
                    for &i in perm.iter().take(k) {
                        mask[i] = false;
                    }
                    acc += metric.compute_masked(batch, &mask).map_err(|e| {
                        Error::Data(format!("at fraction {fraction}: {e}"))
                    })?;
                }
                acc / trials as f64
            }
        };
        points.push(CurvePoint {
            fraction,
            value,
            n_accepted: n - k,
        });
    }
    Ok(RiskCoverageCurve {
        metric,
        mode,
        points,
    })
}
