//! Prediction losses and the rejection meta-loss.
//!
//! The meta-loss couples a prediction loss `l` with a rejection score `r`:
//!
//! ```text
//! L(l, r; c) = max{ 0,  r + l,  c * (1 - r) }
//! ```
//!
//! Minimizing L drives the predictor toward small `l` on accepted examples
//! and drives `r` negative exactly where the expected loss exceeds the
//! rejection cost `c`. For fixed `l`, the minimizer over `r` sits at
//! `r* = (c - l) / (1 + c)`, so `r*` crosses zero at `l = c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Pointwise prediction loss `l(h, y)` with a fixed subgradient convention:
/// at kink points the flat-side value 0 is returned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictionLoss {
    /// `max(0, 1 - y*h)` for labels in {-1, +1}.
    Hinge,
    /// `(h - y)^2`.
    SquaredError,
    /// `max(0, |h - y| - epsilon)`.
    EpsilonInsensitive { epsilon: f64 },
}

impl PredictionLoss {
    /// Default tube half-width for the epsilon-insensitive loss, in
    /// standardized-target units.
    pub const DEFAULT_EPSILON: f64 = 0.1;

    pub fn epsilon_insensitive() -> Self {
        PredictionLoss::EpsilonInsensitive {
            epsilon: Self::DEFAULT_EPSILON,
        }
    }

    /// Hinge loss marks a classification task; the other losses are
    /// regression losses.
    pub fn is_classification(&self) -> bool {
        matches!(self, PredictionLoss::Hinge)
    }

    /// Loss value and its derivative with respect to the prediction `h`.
    pub fn evaluate(&self, h: f64, y: f64) -> Result<LossValue> {
        match *self {
            PredictionLoss::Hinge => {
                if y != 1.0 && y != -1.0 {
                    return Err(Error::InvalidArgument(format!(
                        "hinge loss needs labels in {{-1, +1}}, got {y}"
                    )));
                }
                let margin = 1.0 - y * h;
                if margin > 0.0 {
                    Ok(LossValue { loss: margin, dloss_dh: -y })
                } else {
                    Ok(LossValue { loss: 0.0, dloss_dh: 0.0 })
                }
            }
            PredictionLoss::SquaredError => {
                let d = h - y;
                Ok(LossValue { loss: d * d, dloss_dh: 2.0 * d })
            }
            PredictionLoss::EpsilonInsensitive { epsilon } => {
                if epsilon <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "epsilon-insensitive loss needs epsilon > 0, got {epsilon}"
                    )));
                }
                let d = h - y;
                if d.abs() > epsilon {
                    Ok(LossValue {
                        loss: d.abs() - epsilon,
                        dloss_dh: d.signum(),
                    })
                } else {
                    Ok(LossValue { loss: 0.0, dloss_dh: 0.0 })
                }
            }
        }
    }
}

/// A prediction-loss evaluation: the value and `dl/dh`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    pub dloss_dh: f64,
}

/// Which branch of the max attained the meta-loss value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaBranch {
    /// All branches non-positive except the constant 0.
    Zero,
    /// `r + l` attained the max: the example is treated as accepted.
    Accept,
    /// `c * (1 - r)` attained the max: the example is treated as rejected.
    Reject,
}

/// A meta-loss evaluation: the value, its subgradients with respect to the
/// two inputs, and the active branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaLossValue {
    pub value: f64,
    /// dL/dl: 1 on the accept branch, 0 otherwise.
    pub dvalue_dloss: f64,
    /// dL/dr: 1 on accept, -c on reject, 0 otherwise.
    pub dvalue_dr: f64,
    pub branch: MetaBranch,
}

/// Evaluates `max{0, r + l, c(1 - r)}` and its subgradients.
///
/// Ties are broken with priority accept > reject > zero, which keeps a
/// gradient flowing into both networks at the measure-zero kinks.
pub fn meta_loss(l: f64, r: f64, c: f64) -> Result<MetaLossValue> {
    if !(l >= 0.0) || !l.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "meta-loss needs a finite prediction loss >= 0, got {l}"
        )));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "meta-loss needs rejection cost c > 0, got {c}"
        )));
    }
    if !r.is_finite() {
        return Err(Error::Numeric(format!("non-finite rejection score {r}")));
    }

    let accept = r + l;
    let reject = c * (1.0 - r);
    let value = accept.max(reject).max(0.0);
    let (branch, dvalue_dloss, dvalue_dr) = if accept == value {
        (MetaBranch::Accept, 1.0, 1.0)
    } else if reject == value {
        (MetaBranch::Reject, 0.0, -c)
    } else {
        (MetaBranch::Zero, 0.0, 0.0)
    };
    Ok(MetaLossValue {
        value,
        dvalue_dloss,
        dvalue_dr,
        branch,
    })
}

/// A rectangular grid of meta-loss values over (r, l), row `i` holding the
/// i-th loss value and column `j` the j-th rejection score.
#[derive(Debug, Clone)]
pub struct MetaLossGrid {
    pub loss_values: Vec<f64>,
    pub r_values: Vec<f64>,
    /// `values[i, j] = L(loss_values[i], r_values[j], c)`.
    pub values: Matrix,
    pub cost: f64,
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let h = (hi - lo) / (steps - 1) as f64;
    (0..steps).map(|i| lo + h * i as f64).collect()
}

/// Evaluates the meta-loss on a grid; the CLI serializes this to rebuild the
/// loss heat map.
pub fn meta_loss_grid(
    c: f64,
    r_range: (f64, f64, usize),
    l_range: (f64, f64, usize),
) -> Result<MetaLossGrid> {
    let (r_lo, r_hi, r_steps) = r_range;
    let (l_lo, l_hi, l_steps) = l_range;
    if r_steps < 2 || l_steps < 2 {
        return Err(Error::InvalidArgument(
            "meta-loss grid needs at least 2 steps per axis".into(),
        ));
    }
    if r_lo >= r_hi || l_lo >= l_hi {
        return Err(Error::InvalidArgument(format!(
            "invalid grid ranges r=[{r_lo},{r_hi}] l=[{l_lo},{l_hi}]"
        )));
    }
    if l_lo < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "prediction-loss axis must be >= 0, got lower bound {l_lo}"
        )));
    }
    let r_values = linspace(r_lo, r_hi, r_steps);
    let loss_values = linspace(l_lo, l_hi, l_steps);
    let mut values = Matrix::zeros(l_steps, r_steps);
    for (i, &l) in loss_values.iter().enumerate() {
        for (j, &r) in r_values.iter().enumerate() {
            values.set(i, j, meta_loss(l, r, c)?.value);
        }
    }
    Ok(MetaLossGrid {
        loss_values,
        r_values,
        values,
        cost: c,
    })
}

impl MetaLossGrid {
    /// Grid cell (loss index, r index) holding the smallest value; ties go
    /// to the first cell in row-major order.
    pub fn argmin(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_v = f64::INFINITY;
        for i in 0..self.loss_values.len() {
            for j in 0..self.r_values.len() {
                let v = self.values.get(i, j);
                if v < best_v {
                    best_v = v;
                    best = (i, j);
                }
            }
        }
        best
    }
}
