//! Experiment presets and the end-to-end runner behind the `lwr` CLI.
//!
//! A run resolves its dataset, executes the configured protocol, and writes
//! four artifacts into the output directory:
//!
//! - `config.json`  - the fully resolved configuration (seed included)
//! - `summary.json` - per-fold metrics and aggregates
//! - `curve.csv`    - `scope,mode,fraction,value` risk-coverage rows
//! - `table.csv`    - paper-shaped table when the preset defines one
//!
//! Reruns with the same configuration produce byte-identical files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{gen_synthetic_gaussian, load_csv_dataset, CsvSchema};
use crate::error::{Error, Result};
use crate::eval::{
    accept_mask, auc_roc, regression_errors, risk_coverage_curve, MetricKind, RejectionMode,
};
use crate::losses::{meta_loss_grid, PredictionLoss};
use crate::nn::{Activation, OptimizerConfig};
use crate::numerics::RandomStream;
use crate::protocols::{
    evaluate_split, kfold_repeated, leave_one_group_out, repeated_split, FoldResult,
    PipelineSpec, ProtocolSummary,
};
use crate::trainer::{Architecture, PipelineConfig, RejectiveModel, RffConfig, TrainConfig};

/// Where the experiment's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        n_per_class: usize,
        center_pos: [f64; 2],
        center_neg: [f64; 2],
        sigma: f64,
    },
    Csv {
        schema: CsvSchema,
    },
}

/// Which evaluation protocol drives the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Train on a fresh synthetic draw, test on an independent draw;
    /// repeated with derived seeds. Only valid for synthetic sources.
    SyntheticHoldout { repeats: usize },
    KFold { k: usize, repeats: usize },
    RepeatedSplit { train_fraction: f64, repeats: usize },
    LeaveOneGroupOut,
}

/// Literature reference columns for the paper-shaped tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum TableLayout {
    /// One row: classification error without/with rejection at a fixed
    /// fraction, next to the DHL and CHR literature values.
    Table1 {
        dataset: String,
        fraction: f64,
        dhl: (f64, f64),
        chr: (f64, f64),
    },
    /// One row per fraction: MSE next to the SelectiveNet literature value.
    Table2 { selectivenet: Vec<(f64, f64)> },
    /// One row per group plus a Mean row.
    Table3,
}

/// A fully specified experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(flatten)]
    pub source: DataSource,
    pub h_arch: Architecture,
    pub r_arch: Architecture,
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
    #[serde(flatten)]
    pub protocol: ProtocolKind,
    pub metric: MetricKind,
    pub fractions: Vec<f64>,
    /// Emit a random-rejection baseline curve with this many trials.
    #[serde(default)]
    pub random_baseline_trials: Option<usize>,
    #[serde(default)]
    pub table: Option<TableLayout>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

/// Sign-rule (`r > 0`) statistics recorded for the synthetic experiments,
/// which report both AUC and MSE with and without rejection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignRuleStats {
    pub auc_without: f64,
    /// Mean AUC over the accepted subset; absent if undefined in every
    /// repeat.
    pub auc_with: Option<f64>,
    pub mse_without: f64,
    pub mse_with: Option<f64>,
    pub rejected_fraction: f64,
}

/// Everything a run computed, plus where it was written.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: ProtocolSummary,
    pub sign_rule: Option<SignRuleStats>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    name: &'a str,
    seed: u64,
    summary: &'a ProtocolSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    sign_rule: &'a Option<SignRuleStats>,
}

fn pipeline_spec(config: &ExperimentConfig) -> PipelineSpec {
    PipelineSpec {
        h_arch: config.h_arch.clone(),
        r_arch: config.r_arch.clone(),
        pipeline: config.pipeline.clone(),
        train: config.train.clone(),
        metric: config.metric,
        random_baseline_trials: config.random_baseline_trials,
    }
}

/// One synthetic repeat: fresh train/test draws, one trained model, plus
/// sign-rule statistics in both AUC and MSE.
struct SyntheticRepeat {
    fold: FoldResult,
    auc_without: f64,
    auc_with: Option<f64>,
    mse_without: f64,
    mse_with: Option<f64>,
    rejected_fraction: f64,
}

fn run_synthetic_repeat(
    config: &ExperimentConfig,
    repeat: usize,
) -> Result<SyntheticRepeat> {
    let DataSource::Synthetic {
        n_per_class,
        center_pos,
        center_neg,
        sigma,
    } = &config.source
    else {
        return Err(Error::InvalidArgument(
            "synthetic holdout needs a synthetic data source".into(),
        ));
    };
    let root = RandomStream::new(config.seed);
    let mut train_rng = root.derive(&[10, repeat as u64]);
    let mut test_rng = root.derive(&[11, repeat as u64]);
    let train =
        gen_synthetic_gaussian(*n_per_class, *center_pos, *center_neg, *sigma, &mut train_rng)?;
    let test =
        gen_synthetic_gaussian(*n_per_class, *center_pos, *center_neg, *sigma, &mut test_rng)?;

    let spec = pipeline_spec(config);
    let fold_seed = root.derive(&[12, repeat as u64]).seed();
    let outcome = evaluate_split(&train, &test, &spec, fold_seed, &config.fractions)?;
    let mut fold = outcome.fold;
    let batch = outcome.batch;
    fold.repeat = repeat;

    let mask = accept_mask(&batch.r_scores);
    let kept: Vec<usize> = (0..batch.len()).filter(|&i| mask[i]).collect();
    let h_kept: Vec<f64> = kept.iter().map(|&i| batch.h_scores[i]).collect();
    let y_kept: Vec<f64> = kept.iter().map(|&i| batch.targets[i]).collect();
    let auc_without = auc_roc(&batch.h_scores, &batch.targets)?;
    let mse_without = regression_errors(&batch.h_scores, &batch.targets)?.0;
    let auc_with = auc_roc(&h_kept, &y_kept).ok();
    let mse_with = if kept.is_empty() {
        None
    } else {
        Some(regression_errors(&h_kept, &y_kept)?.0)
    };
    Ok(SyntheticRepeat {
        fold,
        auc_without,
        auc_with,
        mse_without,
        mse_with,
        rejected_fraction: 1.0 - kept.len() as f64 / batch.len() as f64,
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    (m, var.sqrt())
}

fn run_synthetic_holdout(
    config: &ExperimentConfig,
    repeats: usize,
) -> Result<(ProtocolSummary, Option<SignRuleStats>)> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    let runs: Vec<SyntheticRepeat> = (0..repeats)
        .into_par_iter()
        .map(|repeat| run_synthetic_repeat(config, repeat))
        .collect::<Result<Vec<_>>>()?;

    let mut mean_by_fraction = Vec::with_capacity(config.fractions.len());
    let mut std_by_fraction = Vec::with_capacity(config.fractions.len());
    for fi in 0..config.fractions.len() {
        let values: Vec<f64> = runs.iter().map(|r| r.fold.metric_by_fraction[fi]).collect();
        let (m, s) = mean_and_std(&values);
        mean_by_fraction.push(m);
        std_by_fraction.push(s);
    }
    let random_mean_by_fraction = if runs
        .iter()
        .all(|r| r.fold.random_by_fraction.is_some())
    {
        Some(
            (0..config.fractions.len())
                .map(|fi| {
                    mean(
                        &runs
                            .iter()
                            .map(|r| r.fold.random_by_fraction.as_ref().unwrap()[fi])
                            .collect::<Vec<_>>(),
                    )
                })
                .collect(),
        )
    } else {
        None
    };

    let rule_metrics: Vec<f64> = runs.iter().filter_map(|r| r.fold.accept_rule_metric).collect();
    let (accept_rule_mean, accept_rule_std) = if rule_metrics.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_and_std(&rule_metrics);
        (Some(m), Some(s))
    };
    let aucs_with: Vec<f64> = runs.iter().filter_map(|r| r.auc_with).collect();
    let mses_with: Vec<f64> = runs.iter().filter_map(|r| r.mse_with).collect();
    let sign_rule = SignRuleStats {
        auc_without: mean(&runs.iter().map(|r| r.auc_without).collect::<Vec<_>>()),
        auc_with: (!aucs_with.is_empty()).then(|| mean(&aucs_with)),
        mse_without: mean(&runs.iter().map(|r| r.mse_without).collect::<Vec<_>>()),
        mse_with: (!mses_with.is_empty()).then(|| mean(&mses_with)),
        rejected_fraction: mean(
            &runs
                .iter()
                .map(|r| r.rejected_fraction)
                .collect::<Vec<_>>(),
        ),
    };

    let accept_rule_fraction_mean = mean(
        &runs
            .iter()
            .map(|r| r.fold.accept_rule_fraction)
            .collect::<Vec<_>>(),
    );
    let summary = ProtocolSummary {
        protocol: format!("synthetic-holdout repeats={repeats}"),
        seed: config.seed,
        metric: config.metric,
        fractions: config.fractions.clone(),
        mean_by_fraction,
        std_by_fraction,
        accept_rule_mean,
        accept_rule_std,
        accept_rule_fraction_mean,
        random_mean_by_fraction,
        folds: runs.into_iter().map(|r| r.fold).collect(),
    };
    Ok((summary, Some(sign_rule)))
}

/// Runs the configured experiment and writes its artifacts.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    for w in config.fractions.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidArgument(
                "rejection fractions must be strictly increasing".into(),
            ));
        }
    }
    if config.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::InvalidArgument(
            "rejection fractions must lie in [0, 1]".into(),
        ));
    }

    let (summary, sign_rule) = match &config.protocol {
        ProtocolKind::SyntheticHoldout { repeats } => run_synthetic_holdout(config, *repeats)?,
        other => {
            let data = match &config.source {
                DataSource::Csv { schema } => load_csv_dataset(schema)?,
                DataSource::Synthetic {
                    n_per_class,
                    center_pos,
                    center_neg,
                    sigma,
                } => {
                    let mut rng = RandomStream::new(config.seed).derive(&[10, 0]);
                    gen_synthetic_gaussian(*n_per_class, *center_pos, *center_neg, *sigma, &mut rng)?
                }
            };
            let spec = pipeline_spec(config);
            let summary = match other {
                ProtocolKind::KFold { k, repeats } => {
                    kfold_repeated(&data, *k, *repeats, &spec, &config.fractions, config.seed)?
                }
                ProtocolKind::RepeatedSplit {
                    train_fraction,
                    repeats,
                } => repeated_split(
                    &data,
                    *train_fraction,
                    *repeats,
                    &spec,
                    &config.fractions,
                    config.seed,
                )?,
                ProtocolKind::LeaveOneGroupOut => {
                    leave_one_group_out(&data, &spec, &config.fractions, config.seed)?
                }
                ProtocolKind::SyntheticHoldout { .. } => unreachable!(),
            };
            (summary, None)
        }
    };

    std::fs::create_dir_all(&config.out_dir)?;
    let mut files = Vec::new();

    let config_path = config.out_dir.join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(config)?)?;
    files.push(config_path);

    let summary_path = config.out_dir.join("summary.json");
    let file = SummaryFile {
        name: &config.name,
        seed: config.seed,
        summary: &summary,
        sign_rule: &sign_rule,
    };
    std::fs::write(&summary_path, serde_json::to_string_pretty(&file)?)?;
    files.push(summary_path);

    let curve_path = config.out_dir.join("curve.csv");
    std::fs::write(&curve_path, render_curves(&summary))?;
    files.push(curve_path);

    if let Some(layout) = &config.table {
        let table_path = config.out_dir.join("table.csv");
        std::fs::write(&table_path, emit_table(&summary, layout)?)?;
        files.push(table_path);
    }

    Ok(RunReport {
        summary,
        sign_rule,
        files,
    })
}

/// Renders risk-coverage rows: the aggregate curve under scope `mean`, plus
/// one scope per group for grouped protocols.
fn render_curves(summary: &ProtocolSummary) -> String {
    let mut out = String::from("scope,mode,fraction,value\n");
    for (fi, fraction) in summary.fractions.iter().enumerate() {
        out.push_str(&format!(
            "mean,learned,{fraction},{}\n",
            summary.mean_by_fraction[fi]
        ));
    }
    if let Some(random) = &summary.random_mean_by_fraction {
        for (fi, fraction) in summary.fractions.iter().enumerate() {
            out.push_str(&format!("mean,random,{fraction},{}\n", random[fi]));
        }
    }
    for fold in &summary.folds {
        if let Some(group) = &fold.group {
            for (fi, fraction) in summary.fractions.iter().enumerate() {
                out.push_str(&format!(
                    "{group},learned,{fraction},{}\n",
                    fold.metric_by_fraction[fi]
                ));
            }
            if let Some(random) = &fold.random_by_fraction {
                for (fi, fraction) in summary.fractions.iter().enumerate() {
                    out.push_str(&format!(
                        "{group},random,{fraction},{}\n",
                        random[fi]
                    ));
                }
            }
        }
    }
    out
}

/// Renders a paper-shaped CSV table from a protocol summary.
///
/// Literature columns carry reference values copied from prior work; they
/// are marked by the `_literature` suffix and are never recomputed.
pub fn emit_table(summary: &ProtocolSummary, layout: &TableLayout) -> Result<String> {
    if summary.folds.is_empty() {
        return Err(Error::Data("empty summary: no folds to tabulate".into()));
    }
    let require_fraction = |fraction: f64| -> Result<usize> {
        summary
            .fractions
            .iter()
            .position(|&f| f == fraction)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "table layout needs fraction {fraction}, but the run only swept {:?}",
                    summary.fractions
                ))
            })
    };
    match layout {
        TableLayout::Table1 {
            dataset,
            fraction,
            dhl,
            chr,
        } => {
            let f0 = require_fraction(0.0)?;
            let fr = require_fraction(*fraction)?;
            let mut out = String::from(
                "dataset,fraction_rejected,dhl_literature_mean,dhl_literature_std,\
                 chr_literature_mean,chr_literature_std,ours_without_mean,ours_without_std,\
                 ours_with_mean,ours_with_std\n",
            );
            out.push_str(&format!(
                "{dataset},{fraction},{},{},{},{},{},{},{},{}\n",
                dhl.0,
                dhl.1,
                chr.0,
                chr.1,
                summary.mean_by_fraction[f0],
                summary.std_by_fraction[f0],
                summary.mean_by_fraction[fr],
                summary.std_by_fraction[fr],
            ));
            Ok(out)
        }
        TableLayout::Table2 { selectivenet } => {
            let mut out = String::from(
                "fraction_rejected,selectivenet_literature,ours_mean,ours_std\n",
            );
            for (fraction, reference) in selectivenet {
                let fi = require_fraction(*fraction)?;
                out.push_str(&format!(
                    "{fraction},{reference},{},{}\n",
                    summary.mean_by_fraction[fi], summary.std_by_fraction[fi]
                ));
            }
            Ok(out)
        }
        TableLayout::Table3 => {
            let mut out = String::from("group");
            for fraction in &summary.fractions {
                out.push_str(&format!(",{}_f{}", summary.metric.name(), fraction));
            }
            out.push('\n');
            let mut any_group = false;
            for fold in &summary.folds {
                let group = fold.group.as_ref().ok_or_else(|| {
                    Error::Data("table layout needs grouped folds".into())
                })?;
                any_group = true;
                out.push_str(group);
                for v in &fold.metric_by_fraction {
                    out.push_str(&format!(",{v}"));
                }
                out.push('\n');
            }
            if !any_group {
                return Err(Error::Data("table layout needs grouped folds".into()));
            }
            out.push_str("Mean");
            for v in &summary.mean_by_fraction {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
            Ok(out)
        }
    }
}

/// Sign grids of both networks over a rectangle, for plotting decision and
/// rejection boundaries. The model must take 2-dimensional raw inputs.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryGrid {
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    /// Row-major over (y, x): scores of the predictor and the rejector.
    pub h_scores: Vec<f64>,
    pub r_scores: Vec<f64>,
}

pub fn boundary_grid(
    model: &RejectiveModel,
    x_range: (f64, f64),
    y_range: (f64, f64),
    steps: usize,
) -> Result<BoundaryGrid> {
    if model.raw_input_dim() != 2 {
        return Err(Error::InvalidArgument(format!(
            "boundary grids need a 2-dimensional model, this one takes {} features",
            model.raw_input_dim()
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 steps".into()));
    }
    if !(x_range.0 < x_range.1) || !(y_range.0 < y_range.1) {
        return Err(Error::InvalidArgument("grid ranges must be non-empty".into()));
    }
    let lin = |lo: f64, hi: f64| -> Vec<f64> {
        let h = (hi - lo) / (steps - 1) as f64;
        (0..steps).map(|i| lo + h * i as f64).collect()
    };
    let x_values = lin(x_range.0, x_range.1);
    let y_values = lin(y_range.0, y_range.1);
    let mut h_scores = Vec::with_capacity(steps * steps);
    let mut r_scores = Vec::with_capacity(steps * steps);
    for &y in &y_values {
        for &x in &x_values {
            let (h, r) = model.predict(&[x, y])?;
            h_scores.push(h);
            r_scores.push(r);
        }
    }
    Ok(BoundaryGrid {
        x_values,
        y_values,
        h_scores,
        r_scores,
    })
}

impl BoundaryGrid {
    /// CSV rows `x1,x2,h_score,h_sign,r_sign`; the sign convention matches
    /// classification (`h = 0` counts as +1) and acceptance (`r > 0`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x1,x2,h_score,h_sign,r_score,r_sign\n");
        let n = self.x_values.len();
        for (yi, &y) in self.y_values.iter().enumerate() {
            for (xi, &x) in self.x_values.iter().enumerate() {
                let h = self.h_scores[yi * n + xi];
                let r = self.r_scores[yi * n + xi];
                let h_sign = if h >= 0.0 { 1 } else { -1 };
                let r_sign = if r > 0.0 { 1 } else { -1 };
                out.push_str(&format!("{x},{y},{h},{h_sign},{r},{r_sign}\n"));
            }
        }
        out
    }
}

/// Writes the meta-loss heat-map grid as `r,l,value` CSV rows.
pub fn write_heatmap(
    cost: f64,
    r_range: (f64, f64, usize),
    l_range: (f64, f64, usize),
    out_dir: &Path,
) -> Result<PathBuf> {
    let grid = meta_loss_grid(cost, r_range, l_range)?;
    let mut out = String::from("r,l,value\n");
    for (i, &l) in grid.loss_values.iter().enumerate() {
        for (j, &r) in grid.r_values.iter().enumerate() {
            out.push_str(&format!("{r},{l},{}\n", grid.values.get(i, j)));
        }
    }
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("heatmap.csv");
    std::fs::write(&path, out)?;
    Ok(path)
}

/// Trains the synthetic classification model at a fixed seed and writes the
/// decision/rejection boundary grid.
pub fn write_boundary(
    model_path: Option<&Path>,
    seed: u64,
    steps: usize,
    out_dir: &Path,
) -> Result<PathBuf> {
    let model = match model_path {
        Some(path) => RejectiveModel::load(path)?,
        None => {
            let config = preset("synth-cls", seed, out_dir)?;
            let DataSource::Synthetic {
                n_per_class,
                center_pos,
                center_neg,
                sigma,
            } = config.source
            else {
                unreachable!("synth-cls is synthetic");
            };
            let root = RandomStream::new(seed);
            let mut rng = root.derive(&[10, 0]);
            let train =
                gen_synthetic_gaussian(n_per_class, center_pos, center_neg, sigma, &mut rng)?;
            let cfg = TrainConfig {
                seed: root.derive(&[12, 0]).seed(),
                ..config.train
            };
            let (model, _) = crate::trainer::fit_rejective(
                &train,
                &config.h_arch,
                &config.r_arch,
                &config.pipeline,
                &cfg,
            )?;
            model
        }
    };
    let grid = boundary_grid(&model, (-4.0, 4.0), (-4.0, 4.0), steps)?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("boundary.csv");
    std::fs::write(&path, grid.to_csv())?;
    Ok(path)
}

/// The bundled experiment presets.
pub const PRESETS: &[&str] = &[
    "synth-cls",
    "synth-reg",
    "haberman",
    "australian",
    "concrete",
    "grouped-reg",
];

fn uci_schema(file: &str, label_column: usize, mapping: &[(&str, f64)]) -> CsvSchema {
    CsvSchema {
        path: PathBuf::from(format!("data/uci/{file}")),
        has_header: false,
        label_column: crate::data::ColumnRef::Index(label_column),
        group_column: None,
        label_mapping: Some(
            mapping
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect::<BTreeMap<_, _>>(),
        ),
        feature_columns: None,
        name: None,
    }
}

/// Builds a bundled preset. CSV presets expect the dataset files fetched by
/// `scripts/fetch_uci.py` under `data/uci/`; override paths with `--data`
/// or a schema file.
pub fn preset(name: &str, seed: u64, out_dir: &Path) -> Result<ExperimentConfig> {
    let fractions: Vec<f64> = (0..=5).map(|i| i as f64 / 10.0).collect();
    let config = match name {
        "synth-cls" => ExperimentConfig {
            name: "synth-cls".into(),
            source: DataSource::Synthetic {
                n_per_class: 200,
                center_pos: [0.5, 0.5],
                center_neg: [-0.5, -0.5],
                sigma: 1.0,
            },
            h_arch: Architecture::linear(),
            r_arch: Architecture::new(&[2], Activation::Tanh),
            pipeline: PipelineConfig::default(),
            train: TrainConfig {
                rejection_cost: 0.9,
                loss: PredictionLoss::Hinge,
                epochs: 1500,
                batch_size: 400,
                optimizer: OptimizerConfig::adaptive(5e-3),
                seed,
            },
            protocol: ProtocolKind::SyntheticHoldout { repeats: 10 },
            metric: MetricKind::AucRoc,
            fractions,
            random_baseline_trials: Some(200),
            table: None,
            seed,
            out_dir: out_dir.to_path_buf(),
        },
        "synth-reg" => {
            let mut config = preset("synth-cls", seed, out_dir)?;
            config.name = "synth-reg".into();
            config.train.loss = PredictionLoss::epsilon_insensitive();
            config.train.rejection_cost = 0.75;
            config
        }
        "haberman" => ExperimentConfig {
            name: "haberman".into(),
            source: DataSource::Csv {
                schema: uci_schema("haberman.csv", 3, &[("1", 1.0), ("2", -1.0)]),
            },
            h_arch: Architecture::new(&[6], Activation::Relu),
            r_arch: Architecture::new(&[32, 64], Activation::Tanh),
            pipeline: PipelineConfig {
                standardize_features: true,
                standardize_targets: false,
                rff: None,
            },
            train: TrainConfig {
                rejection_cost: 1.0,
                loss: PredictionLoss::Hinge,
                epochs: 400,
                batch_size: 32,
                optimizer: OptimizerConfig::adaptive(1e-3),
                seed,
            },
            protocol: ProtocolKind::KFold { k: 5, repeats: 10 },
            metric: MetricKind::ClassificationError,
            fractions: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.44, 0.5],
            random_baseline_trials: None,
            table: Some(TableLayout::Table1 {
                dataset: "haberman".into(),
                fraction: 0.44,
                dhl: (0.25, 0.11),
                chr: (0.10, 0.05),
            }),
            seed,
            out_dir: out_dir.to_path_buf(),
        },
        "australian" => ExperimentConfig {
            name: "australian".into(),
            source: DataSource::Csv {
                schema: uci_schema("australian.csv", 14, &[("1", 1.0), ("0", -1.0)]),
            },
            h_arch: Architecture::linear(),
            r_arch: Architecture::new(&[64], Activation::Tanh),
            pipeline: PipelineConfig {
                standardize_features: true,
                standardize_targets: false,
                rff: None,
            },
            train: TrainConfig {
                rejection_cost: 0.5,
                loss: PredictionLoss::Hinge,
                epochs: 400,
                batch_size: 32,
                optimizer: OptimizerConfig::adaptive(1e-3),
                seed,
            },
            protocol: ProtocolKind::KFold { k: 5, repeats: 10 },
            metric: MetricKind::ClassificationError,
            fractions: vec![0.0, 0.1, 0.17, 0.2, 0.3, 0.4, 0.5],
            random_baseline_trials: None,
            table: Some(TableLayout::Table1 {
                dataset: "australian".into(),
                fraction: 0.17,
                dhl: (0.35, 0.10),
                chr: (0.07, 0.02),
            }),
            seed,
            out_dir: out_dir.to_path_buf(),
        },
        "concrete" => ExperimentConfig {
            name: "concrete".into(),
            source: DataSource::Csv {
                schema: CsvSchema {
                    path: PathBuf::from("data/uci/concrete.csv"),
                    has_header: true,
                    label_column: crate::data::ColumnRef::Name("strength".into()),
                    group_column: None,
                    label_mapping: None,
                    feature_columns: None,
                    name: None,
                },
            },
            h_arch: Architecture::new(&[64, 32], Activation::Relu),
            r_arch: Architecture::new(&[64, 32], Activation::Tanh),
            pipeline: PipelineConfig {
                standardize_features: true,
                standardize_targets: true,
                rff: None,
            },
            train: TrainConfig {
                rejection_cost: 1.0,
                loss: PredictionLoss::SquaredError,
                epochs: 400,
                batch_size: 32,
                optimizer: OptimizerConfig::adaptive(1e-3),
                seed,
            },
            protocol: ProtocolKind::RepeatedSplit {
                train_fraction: 0.9,
                repeats: 20,
            },
            metric: MetricKind::Mse,
            fractions,
            random_baseline_trials: None,
            table: Some(TableLayout::Table2 {
                selectivenet: vec![
                    (0.0, 38.45),
                    (0.1, 35.35),
                    (0.2, 30.48),
                    (0.3, 27.94),
                    (0.4, 27.12),
                    (0.5, 26.81),
                ],
            }),
            seed,
            out_dir: out_dir.to_path_buf(),
        },
        "grouped-reg" => ExperimentConfig {
            name: "grouped-reg".into(),
            source: DataSource::Csv {
                schema: CsvSchema {
                    path: PathBuf::from("data/grouped.csv"),
                    has_header: true,
                    label_column: crate::data::ColumnRef::Name("target".into()),
                    group_column: Some(crate::data::ColumnRef::Name("group".into())),
                    label_mapping: None,
                    feature_columns: None,
                    name: None,
                },
            },
            h_arch: Architecture::linear(),
            r_arch: Architecture::linear(),
            pipeline: PipelineConfig {
                standardize_features: true,
                standardize_targets: true,
                rff: Some(RffConfig {
                    dim: 1024,
                    gamma: None,
                }),
            },
            train: TrainConfig {
                rejection_cost: 1.0,
                loss: PredictionLoss::epsilon_insensitive(),
                epochs: 300,
                batch_size: 32,
                optimizer: OptimizerConfig::adaptive(1e-3),
                seed,
            },
            protocol: ProtocolKind::LeaveOneGroupOut,
            metric: MetricKind::Rmse,
            fractions,
            random_baseline_trials: Some(200),
            table: Some(TableLayout::Table3),
            seed,
            out_dir: out_dir.to_path_buf(),
        },
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown preset '{other}'; available: {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_synthetic_grouped;
    use crate::nn::MlpSpec;
    use crate::numerics::Matrix;

    fn zero_model() -> RejectiveModel {
        let spec = MlpSpec::scorer(2, &[], Activation::Linear).unwrap();
        let zero = crate::nn::MlpModel::from_parameters(
            spec,
            vec![Matrix::zeros(1, 2)],
            vec![vec![0.0]],
        )
        .unwrap();
        RejectiveModel {
            predictor: zero.clone(),
            rejector: zero,
            feature_transform: crate::features::FeatureTransform::identity(),
            target_scaler: None,
            config: TrainConfig::default(),
        }
    }

    #[test]
    fn boundary_grid_zero_model_is_all_positive_h_sign() {
        let model = zero_model();
        let grid = boundary_grid(&model, (-1.0, 1.0), (-1.0, 1.0), 5).unwrap();
        let csv = grid.to_csv();
        // h = 0 classifies as +1 everywhere; r = 0 rejects everywhere.
        for line in csv.lines().skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells[3], "1");
            assert_eq!(cells[5], "-1");
        }
    }

    #[test]
    fn boundary_grid_linear_model_flips_across_diagonal() {
        let spec = MlpSpec::scorer(2, &[], Activation::Linear).unwrap();
        let h = crate::nn::MlpModel::from_parameters(
            spec.clone(),
            vec![Matrix::new(1, 2, vec![1.0, 1.0]).unwrap()],
            vec![vec![0.0]],
        )
        .unwrap();
        let model = RejectiveModel {
            predictor: h.clone(),
            rejector: h,
            feature_transform: crate::features::FeatureTransform::identity(),
            target_scaler: None,
            config: TrainConfig::default(),
        };
        let grid = boundary_grid(&model, (-2.0, 2.0), (-2.0, 2.0), 9).unwrap();
        let n = grid.x_values.len();
        for (yi, &y) in grid.y_values.iter().enumerate() {
            for (xi, &x) in grid.x_values.iter().enumerate() {
                let h = grid.h_scores[yi * n + xi];
                if x + y > 1e-12 {
                    assert!(h > 0.0);
                }
                if x + y < -1e-12 {
                    assert!(h < 0.0);
                }
            }
        }
        assert!(boundary_grid(&model, (1.0, -1.0), (-1.0, 1.0), 5).is_err());
    }

    #[test]
    fn boundary_grid_rejects_non_2d_models() {
        let spec = MlpSpec::scorer(3, &[], Activation::Linear).unwrap();
        let m = crate::nn::MlpModel::from_parameters(
            spec,
            vec![Matrix::zeros(1, 3)],
            vec![vec![0.0]],
        )
        .unwrap();
        let model = RejectiveModel {
            predictor: m.clone(),
            rejector: m,
            feature_transform: crate::features::FeatureTransform::identity(),
            target_scaler: None,
            config: TrainConfig::default(),
        };
        assert!(boundary_grid(&model, (0.0, 1.0), (0.0, 1.0), 4).is_err());
    }

    #[test]
    fn heatmap_csv_has_argmin_near_cost_ratio() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_heatmap(2.0, (-2.0, 2.0, 81), (0.0, 4.0, 81), dir.path()).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let mut best: (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
        for line in text.lines().skip(1) {
            let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            if cells[2] < best.2 {
                best = (cells[0], cells[1], cells[2]);
            }
        }
        assert_eq!(best.1, 0.0, "argmin loss axis");
        assert!((best.0 - 2.0 / 3.0).abs() <= 4.0 / 80.0 + 1e-12, "argmin r {}", best.0);
    }

    #[test]
    fn unknown_preset_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(preset("nope", 0, dir.path()).is_err());
        for name in PRESETS {
            preset(name, 0, dir.path()).unwrap();
        }
    }

    #[test]
    fn table_emission_shapes_and_errors() {
        // Build a small grouped run to get a real summary.
        let mut rng = RandomStream::new(4);
        let data = gen_synthetic_grouped(10, 3, 2, 0.1, &mut rng).unwrap();
        let spec = PipelineSpec {
            h_arch: Architecture::linear(),
            r_arch: Architecture::linear(),
            pipeline: PipelineConfig {
                standardize_features: true,
                standardize_targets: true,
                rff: None,
            },
            train: TrainConfig {
                loss: PredictionLoss::SquaredError,
                epochs: 10,
                batch_size: 32,
                ..TrainConfig::default()
            },
            metric: MetricKind::Rmse,
            random_baseline_trials: None,
        };
        let summary = leave_one_group_out(&data, &spec, &[0.0, 0.5], 2).unwrap();

        let t3 = emit_table(&summary, &TableLayout::Table3).unwrap();
        let lines: Vec<&str> = t3.lines().collect();
        assert_eq!(lines.len(), 1 + 3 + 1, "{t3}");
        assert!(lines[0].starts_with("group,rmse_f0,rmse_f0.5"));
        assert!(lines[4].starts_with("Mean,"));

        let t2 = emit_table(
            &summary,
            &TableLayout::Table2 {
                selectivenet: vec![(0.0, 38.45), (0.5, 26.81)],
            },
        )
        .unwrap();
        assert_eq!(t2.lines().count(), 3);
        // A reference fraction the run did not sweep is an error.
        assert!(emit_table(
            &summary,
            &TableLayout::Table2 {
                selectivenet: vec![(0.25, 30.0)],
            },
        )
        .is_err());

        let empty = ProtocolSummary {
            folds: vec![],
            ..summary.clone()
        };
        assert!(emit_table(&empty, &TableLayout::Table3).is_err());
    }
}
