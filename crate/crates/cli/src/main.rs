//! `amcbench`: generate data, train classifiers, craft attacks and measure
//! how well they transfer from time-domain to frequency-domain models.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data, format or
//! protocol error, 3 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amc_core::attacks::{AttackConfig, AttackMethod, NormConvention, DEFAULT_BIM_ITERATIONS};
use amc_core::pipeline::{
    linear_grid, run_attack, run_eval, run_gen, run_sweep, AttackRunConfig, EvalRunConfig,
    GenConfig, Partition, Profile, SplitConfig, SweepRunConfig, TrainRunConfig,
};
use amc_core::sigsynth::{DEFAULT_FRAME_LEN, DEFAULT_SNR_DB};
use amc_core::zoo::{ArchitectureId, TrainConfig};
use amc_core::{AmcError, Domain};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(name = "amcbench", version, about = "Adversarial transferability benchmark for modulation classifiers")]
struct Cli {
    /// JSON file with default values for any flag (keys use snake_case flag names).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scale preset for per-class count and epochs: desk (1500, 40) or full (6000, 75).
    #[arg(long, global = true)]
    profile: Option<Profile>,
    /// Force serial, order-fixed reductions. Every stage already runs that
    /// way, so the flag only documents intent.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a labeled time-domain dataset (.amcd).
    Gen(GenArgs),
    /// Train one classifier on a dataset split; writes .ckpt and history CSV.
    Train(TrainArgs),
    /// Perturb the test split with FGSM or BIM against a time-domain surrogate.
    Attack(AttackArgs),
    /// Evaluate a model; writes report.json and confusion.csv.
    Eval(EvalArgs),
    /// Sweep the attack budget or step size; writes sweep.csv and report.json.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Frames per modulation scheme.
    #[arg(long)]
    per_class: Option<usize>,
    /// Signal-to-noise ratio in dB.
    #[arg(long)]
    snr_db: Option<f64>,
    /// Complex samples per frame.
    #[arg(long)]
    frame_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output .amcd path.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SplitArgs {
    /// Seed of the stratified 70/15/15 split; must match across models.
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// fcnn, cnn, rnn or crnn.
    #[arg(long)]
    arch: ArchitectureId,
    /// time (IQ) or freq (DFT, applied on load).
    #[arg(long)]
    domain: Domain,
    /// Input .amcd dataset.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Seed for parameter initialization, shuffling and dropout.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    split: SplitArgs,
    /// Output checkpoint path.
    #[arg(short, long)]
    output: PathBuf,
    /// Training history CSV (default: checkpoint path with .history.csv).
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AttackArgs {
    /// Clean time-domain .amcd dataset.
    #[arg(long)]
    data: PathBuf,
    /// Time-domain surrogate checkpoint.
    #[arg(long)]
    surrogate: PathBuf,
    /// fgsm or bim.
    #[arg(long)]
    method: Option<AttackMethod>,
    /// Perturbation budget P_T.
    #[arg(long)]
    budget: Option<f64>,
    /// BIM step length.
    #[arg(long)]
    alpha: Option<f64>,
    /// BIM iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// radius (||delta|| <= P_T) or power (||delta||^2 <= P_T).
    #[arg(long)]
    norm: Option<NormConvention>,
    #[command(flatten)]
    split: SplitArgs,
    /// test (default) or all.
    #[arg(long)]
    partition: Option<Partition>,
    /// Output perturbed .amcd path.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Clean or perturbed .amcd dataset.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint to evaluate.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    /// auto (whole file if perturbed, else test split), test or all.
    #[arg(long)]
    partition: Option<Partition>,
    /// Directory for report.json and confusion.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Clean time-domain .amcd dataset.
    #[arg(long)]
    data: PathBuf,
    /// Time-domain surrogate checkpoint.
    #[arg(long)]
    surrogate: PathBuf,
    /// Target checkpoint (repeatable).
    #[arg(long = "target")]
    targets: Vec<PathBuf>,
    #[arg(long)]
    method: Option<AttackMethod>,
    /// Fixed P_T for BIM sweeps.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    norm: Option<NormConvention>,
    /// Comma-separated ascending grid of P_T (FGSM) or alpha (BIM) values.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Number of evenly spaced grid points when --grid is not given.
    #[arg(long)]
    points: Option<usize>,
    #[command(flatten)]
    split: SplitArgs,
    /// Directory for sweep.csv and report.json.
    #[arg(long)]
    out_dir: PathBuf,
}

/// Defaults read from `--config`. Flags win over these, these win over the
/// profile.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    profile: Option<Profile>,
    per_class: Option<usize>,
    snr_db: Option<f64>,
    frame_len: Option<usize>,
    seed: Option<u64>,
    split_seed: Option<u64>,
    epochs: Option<usize>,
    batch: Option<usize>,
    lr: Option<f64>,
    method: Option<AttackMethod>,
    budget: Option<f64>,
    alpha: Option<f64>,
    iters: Option<usize>,
    norm: Option<NormConvention>,
    partition: Option<Partition>,
    grid: Option<Vec<f64>>,
    points: Option<usize>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| AmcError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| AmcError::Config(format!("{}: {e}", path.display())).into())
}

const DEFAULT_BUDGET: f64 = 0.02;
const DEFAULT_SEED: u64 = 0;

fn split_config(args: &SplitArgs, file: &FileConfig) -> SplitConfig {
    SplitConfig {
        seed: args.split_seed.or(file.split_seed).unwrap_or(DEFAULT_SEED),
        ..SplitConfig::default()
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = load_file_config(cli.config.as_deref())?;
    let profile = cli.profile.or(file.profile).unwrap_or_default();
    match cli.command {
        Command::Gen(a) => {
            let cfg = GenConfig {
                per_class: a.per_class.or(file.per_class).unwrap_or(profile.per_class()),
                frame_len: a.frame_len.or(file.frame_len).unwrap_or(DEFAULT_FRAME_LEN),
                snr_db: a.snr_db.or(file.snr_db).unwrap_or(DEFAULT_SNR_DB),
                seed: a.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
                output: a.output,
            };
            let ds = run_gen(&cfg)?;
            println!("wrote {} frames to {}", ds.len(), cfg.output.display());
        }
        Command::Train(a) => {
            let seed = a.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
            let history = a
                .history
                .unwrap_or_else(|| a.output.with_extension("history.csv"));
            let cfg = TrainRunConfig {
                data: a.data,
                architecture: a.arch,
                domain: a.domain,
                model_seed: seed,
                split: split_config(&a.split, &file),
                train: TrainConfig {
                    epochs: a.epochs.or(file.epochs).unwrap_or(profile.epochs()),
                    batch_size: a.batch.or(file.batch).unwrap_or(64),
                    seed,
                    learning_rate: a.lr.or(file.lr).unwrap_or(1e-3),
                    ..TrainConfig::default()
                },
                output: a.output,
                history,
            };
            let model = amc_core::pipeline::run_train(&cfg)?;
            let last = model.history.last().context("training produced no epochs")?;
            println!(
                "{} trained for {} epochs, final val accuracy {:.4}; wrote {}",
                model.name(),
                model.history.len(),
                last.val_acc,
                cfg.output.display()
            );
        }
        Command::Attack(a) => {
            let method = a.method.or(file.method).unwrap_or(AttackMethod::Fgsm);
            let budget = a.budget.or(file.budget).unwrap_or(DEFAULT_BUDGET);
            let attack = AttackConfig {
                method,
                power_budget: budget,
                step: a.alpha.or(file.alpha).unwrap_or(match method {
                    AttackMethod::Fgsm => 0.0,
                    AttackMethod::Bim => budget / DEFAULT_BIM_ITERATIONS as f64,
                }),
                iterations: a.iters.or(file.iters).unwrap_or(match method {
                    AttackMethod::Fgsm => 1,
                    AttackMethod::Bim => DEFAULT_BIM_ITERATIONS,
                }),
                norm_convention: a.norm.or(file.norm).unwrap_or_default(),
            };
            let cfg = AttackRunConfig {
                data: a.data,
                surrogate: a.surrogate,
                attack,
                split: split_config(&a.split, &file),
                partition: a.partition.or(file.partition).unwrap_or(Partition::Test),
                output: a.output,
            };
            let ds = run_attack(&cfg)?;
            let zero = ds.attack().map(|r| r.zero_gradient_frames).unwrap_or(0);
            println!(
                "perturbed {} frames ({zero} with zero gradient); wrote {}",
                ds.len(),
                cfg.output.display()
            );
        }
        Command::Eval(a) => {
            let cfg = EvalRunConfig {
                data: a.data,
                model: a.model,
                split: split_config(&a.split, &file),
                partition: a.partition.or(file.partition).unwrap_or_default(),
                output_dir: a.out_dir,
            };
            let report = run_eval(&cfg)?;
            println!(
                "accuracy {:.4} on {} frames; wrote {}",
                report.accuracy,
                report.total,
                cfg.output_dir.display()
            );
        }
        Command::Sweep(a) => {
            let method = a.method.or(file.method).unwrap_or(AttackMethod::Fgsm);
            let budget = a.budget.or(file.budget).unwrap_or(DEFAULT_BUDGET);
            let grid = match a.grid.or(file.grid.clone()) {
                Some(g) => g,
                None => {
                    let points = a.points.or(file.points).unwrap_or(11);
                    let hi = match method {
                        AttackMethod::Fgsm => budget,
                        AttackMethod::Bim => budget / DEFAULT_BIM_ITERATIONS as f64,
                    };
                    linear_grid(0.0, hi, points)
                }
            };
            let cfg = SweepRunConfig {
                data: a.data,
                surrogate: a.surrogate,
                targets: a.targets,
                method,
                power_budget: budget,
                iterations: a.iters.or(file.iters).unwrap_or(match method {
                    AttackMethod::Fgsm => 1,
                    AttackMethod::Bim => DEFAULT_BIM_ITERATIONS,
                }),
                norm_convention: a.norm.or(file.norm).unwrap_or_default(),
                grid,
                split: split_config(&a.split, &file),
                output_dir: a.out_dir,
            };
            let report = run_sweep(&cfg)?;
            println!(
                "{} sweep rows; wrote {}",
                report.curve.len(),
                cfg.output_dir.display()
            );
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<AmcError>())
        .map(|e| e.exit_code() as u8)
        .unwrap_or(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
