//! Experiment runner for selective prediction.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lwr_core::data::{ColumnRef, CsvSchema};
use lwr_core::experiments::{self, DataSource, ExperimentConfig};
use lwr_core::trainer::RffConfig;
use lwr_core::Error;

#[derive(Parser)]
#[command(
    name = "lwr",
    version,
    about = "Train and evaluate predictor/rejector pairs for selective prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a bundled preset or a JSON experiment config file.
    ///
    /// Presets: synth-cls, synth-reg, haberman, australian, concrete,
    /// grouped-reg. Anything ending in .json is read as a config file.
    Run {
        /// Preset name or path to a config JSON file
        target: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Emit the meta-loss heat-map grid as CSV.
    Heatmap {
        /// Rejection cost
        #[arg(long, default_value_t = 2.0)]
        c: f64,
        /// Grid bounds for the rejection-score axis
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        r_min: f64,
        #[arg(long, default_value_t = 2.0)]
        r_max: f64,
        /// Grid bounds for the prediction-loss axis
        #[arg(long, default_value_t = 0.0)]
        l_min: f64,
        #[arg(long, default_value_t = 4.0)]
        l_max: f64,
        /// Grid resolution per axis
        #[arg(long, default_value_t = 81)]
        steps: usize,
        #[arg(long, default_value = "runs/heatmap")]
        out_dir: PathBuf,
    },
    /// Emit decision/rejection boundary grids for a 2D model.
    ///
    /// With --model, loads a saved model; otherwise trains the synth-cls
    /// model at the given seed.
    Boundary {
        /// Path to a saved model file
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid resolution per axis
        #[arg(long, default_value_t = 101)]
        steps: usize,
        #[arg(long, default_value = "runs/boundary")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct Overrides {
    /// Root seed; every stream in the run derives from it
    #[arg(long)]
    seed: Option<u64>,
    /// Rejection cost c
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Comma-separated rejection fractions, e.g. 0,0.1,0.2
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// CSV data file; replaces the preset's data path
    #[arg(long)]
    data: Option<PathBuf>,
    /// JSON schema file describing the CSV layout
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Group column (header name) for grouped protocols
    #[arg(long)]
    group_col: Option<String>,
    /// Random-Fourier-feature dimension
    #[arg(long)]
    rff_dim: Option<usize>,
    /// RBF width gamma; omit for the median heuristic
    #[arg(long)]
    gamma: Option<f64>,
}

fn apply_overrides(config: &mut ExperimentConfig, ov: &Overrides) -> Result<(), Error> {
    if let Some(seed) = ov.seed {
        config.seed = seed;
        config.train.seed = seed;
    }
    if let Some(c) = ov.c {
        config.train.rejection_cost = c;
    }
    if let Some(epochs) = ov.epochs {
        config.train.epochs = epochs;
    }
    if let Some(fractions) = &ov.fractions {
        config.fractions = fractions.clone();
    }
    if let Some(out_dir) = &ov.out_dir {
        config.out_dir = out_dir.clone();
    }
    if let Some(path) = &ov.schema {
        config.source = DataSource::Csv {
            schema: CsvSchema::load(path)?,
        };
    }
    if let Some(path) = &ov.data {
        match &mut config.source {
            DataSource::Csv { schema } => schema.path = path.clone(),
            DataSource::Synthetic { .. } => {
                return Err(Error::InvalidArgument(
                    "--data applies only to CSV-backed experiments".into(),
                ))
            }
        }
    }
    if let Some(col) = &ov.group_col {
        match &mut config.source {
            DataSource::Csv { schema } => {
                schema.group_column = Some(ColumnRef::Name(col.clone()))
            }
            DataSource::Synthetic { .. } => {
                return Err(Error::InvalidArgument(
                    "--group-col applies only to CSV-backed experiments".into(),
                ))
            }
        }
    }
    if let Some(dim) = ov.rff_dim {
        let rff = config.pipeline.rff.get_or_insert(RffConfig {
            dim,
            gamma: None,
        });
        rff.dim = dim;
    }
    if let Some(gamma) = ov.gamma {
        match &mut config.pipeline.rff {
            Some(rff) => rff.gamma = Some(gamma),
            None => {
                return Err(Error::InvalidArgument(
                    "--gamma needs an RFF-enabled experiment (set --rff-dim)".into(),
                ))
            }
        }
    }
    Ok(())
}

fn run_command(target: &str, overrides: &Overrides) -> Result<(), Error> {
    if target == "heatmap" {
        let c = overrides.c.unwrap_or(2.0);
        let out_dir = overrides
            .out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs/heatmap"));
        let path = experiments::write_heatmap(c, (-2.0, 2.0, 81), (0.0, 4.0, 81), &out_dir)?;
        println!("wrote {}", path.display());
        return Ok(());
    }

    let seed = overrides.seed.unwrap_or(0);
    let mut config = if target.ends_with(".json") {
        let text = std::fs::read_to_string(target)
            .map_err(|e| Error::Data(format!("cannot read config {target}: {e}")))?;
        serde_json::from_str(&text)?
    } else {
        let out_dir = PathBuf::from("runs").join(target);
        experiments::preset(target, seed, &out_dir)?
    };
    apply_overrides(&mut config, overrides)?;

    println!("experiment: {} (seed {})", config.name, config.seed);
    let report = experiments::run(&config)?;
    let summary = &report.summary;
    println!("protocol: {} over {} folds", summary.protocol, summary.folds.len());
    for (i, fraction) in summary.fractions.iter().enumerate() {
        println!(
            "  fraction {:>5.2}: {} = {:.4} +/- {:.4}",
            fraction,
            summary.metric.name(),
            summary.mean_by_fraction[i],
            summary.std_by_fraction[i]
        );
    }
    if let (Some(m), Some(s)) = (summary.accept_rule_mean, summary.accept_rule_std) {
        println!(
            "  sign rule (r > 0): {} = {:.4} +/- {:.4} (rejects {:.1}%)",
            summary.metric.name(),
            m,
            s,
            100.0 * summary.accept_rule_fraction_mean
        );
    }
    if let Some(stats) = &report.sign_rule {
        println!(
            "  sign-rule detail: auc {:.4} -> {}, mse {:.4} -> {}",
            stats.auc_without,
            stats
                .auc_with
                .map_or("n/a".to_string(), |v| format!("{v:.4}")),
            stats.mse_without,
            stats
                .mse_with
                .map_or("n/a".to_string(), |v| format!("{v:.4}")),
        );
    }
    for file in &report.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn boundary_command(
    model: Option<&Path>,
    seed: u64,
    steps: usize,
    out_dir: &Path,
) -> Result<(), Error> {
    let path = experiments::write_boundary(model, seed, steps, out_dir)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = match &cli.command {
        Command::Run { target, overrides } => run_command(target, overrides),
        Command::Heatmap {
            c,
            r_min,
            r_max,
            l_min,
            l_max,
            steps,
            out_dir,
        } => experiments::write_heatmap(
            *c,
            (*r_min, *r_max, *steps),
            (*l_min, *l_max, *steps),
            out_dir,
        )
        .map(|path| println!("wrote {}", path.display())),
        Command::Boundary {
            model,
            seed,
            steps,
            out_dir,
        } => boundary_command(model.as_deref(), *seed, *steps, out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
