//! File-to-file pipeline stages: generate, train, attack, evaluate, sweep.
//!
//! Every stage takes a fully resolved config, reads and writes only the files
//! it names, and drops a `*.manifest.json` next to its primary output echoing
//! that config.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attacks::{perturb_dataset, AttackConfig, AttackMethod, NormConvention};
use crate::dataset::{Domain, LabeledDataset};
use crate::error::{AmcError, Result};
use crate::evalharness::{budget_sweep, evaluate, split, EvalReport, SplitIndex};
use crate::features::transform_dataset;
use crate::sigsynth::{synthesize_dataset, ChannelConfig, ModulationScheme, DEFAULT_FRAME_LEN};
use crate::zoo::{build_model, train, ArchitectureId, DataProvenance, Model, TrainConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Desk,
    Full,
}

impl Profile {
    pub fn per_class(self) -> usize {
        match self {
            Profile::Desk => 1500,
            Profile::Full => 6000,
        }
    }

    pub fn epochs(self) -> usize {
        match self {
            Profile::Desk => 40,
            Profile::Full => 75,
        }
    }
}

impl FromStr for Profile {
    type Err = AmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(AmcError::Config(format!(
                "unknown profile '{other}' (expected desk or full)"
            ))),
        }
    }
}

/// Which frames of a dataset a stage operates on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    /// `All` for perturbed files (already a test subset), `Test` otherwise.
    #[default]
    Auto,
    Test,
    All,
}

impl FromStr for Partition {
    type Err = AmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Partition::Auto),
            "test" => Ok(Partition::Test),
            "all" => Ok(Partition::All),
            other => Err(AmcError::Config(format!(
                "unknown partition '{other}' (expected auto, test or all)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub seed: u64,
    pub fractions: [f64; 3],
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            seed: 0,
            fractions: crate::evalharness::DEFAULT_FRACTIONS,
        }
    }
}

impl SplitConfig {
    pub fn apply(&self, ds: &LabeledDataset) -> Result<SplitIndex> {
        split(ds, self.fractions, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub per_class: usize,
    pub frame_len: usize,
    pub snr_db: f64,
    pub seed: u64,
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRunConfig {
    pub data: PathBuf,
    pub architecture: ArchitectureId,
    pub domain: Domain,
    pub model_seed: u64,
    pub split: SplitConfig,
    pub train: TrainConfig,
    pub output: PathBuf,
    pub history: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackRunConfig {
    pub data: PathBuf,
    pub surrogate: PathBuf,
    pub attack: AttackConfig,
    pub split: SplitConfig,
    pub partition: Partition,
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRunConfig {
    pub data: PathBuf,
    pub model: PathBuf,
    pub split: SplitConfig,
    pub partition: Partition,
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRunConfig {
    pub data: PathBuf,
    pub surrogate: PathBuf,
    pub targets: Vec<PathBuf>,
    pub method: AttackMethod,
    /// Fixed `P_T` for BIM sweeps; ignored for FGSM.
    pub power_budget: f64,
    pub iterations: usize,
    pub norm_convention: NormConvention,
    pub grid: Vec<f64>,
    pub split: SplitConfig,
    pub output_dir: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    stage: &'a str,
    config: &'a C,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn write_manifest<C: Serialize>(path: &Path, stage: &str, config: &C) -> Result<()> {
    let manifest = Manifest {
        tool: "amcbench",
        version: env!("CARGO_PKG_VERSION"),
        stage,
        config,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    LabeledDataset::load(path).map_err(|e| match e {
        AmcError::Io(io) => AmcError::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    })
}

fn select(ds: &LabeledDataset, partition: Partition, split: &SplitConfig) -> Result<LabeledDataset> {
    let whole = match partition {
        Partition::All => true,
        Partition::Test => false,
        Partition::Auto => ds.attack().is_some(),
    };
    if whole {
        Ok(ds.clone())
    } else {
        ds.subset(&split.apply(ds)?.test)
    }
}

/// Brings time-domain frames into the model's domain.
fn to_domain(ds: LabeledDataset, domain: Domain) -> Result<LabeledDataset> {
    match (ds.domain(), domain) {
        (a, b) if a == b => Ok(ds),
        (Domain::Time, Domain::Freq) => {
            let mut out = transform_dataset(&ds)?;
            out.set_attack(ds.attack().cloned());
            Ok(out)
        }
        (a, b) => Err(AmcError::Domain(format!("cannot convert {a} data for a {b} model"))),
    }
}

pub fn run_gen(cfg: &GenConfig) -> Result<LabeledDataset> {
    if cfg.per_class == 0 {
        return Err(AmcError::Config("per-class count must be at least 1".into()));
    }
    let channel = ChannelConfig::with_snr_db(cfg.snr_db);
    let ds = synthesize_dataset(
        cfg.per_class,
        cfg.frame_len,
        &ModulationScheme::all(),
        &channel,
        cfg.seed,
    )?;
    ds.save(&cfg.output)?;
    write_manifest(&manifest_path(&cfg.output), "gen", cfg)?;
    Ok(ds)
}

pub fn run_train(cfg: &TrainRunConfig) -> Result<Model> {
    let ds = load_dataset(&cfg.data)?;
    if ds.attack().is_some() {
        return Err(AmcError::Protocol("refusing to train on a perturbed dataset".into()));
    }
    let idx = cfg.split.apply(&ds)?;
    let train_set = to_domain(ds.subset(&idx.train)?, cfg.domain)?;
    let val_set = to_domain(ds.subset(&idx.val)?, cfg.domain)?;
    let mut model = build_model(
        cfg.architecture,
        cfg.domain,
        ds.frame_len(),
        ds.class_count(),
        cfg.model_seed,
    )?;
    model.provenance = Some(DataProvenance {
        dataset_seed: ds.seed(),
        split_seed: cfg.split.seed,
        frame_count: ds.len(),
        snr_db: ds.snr_db(),
    });
    train(&mut model, &train_set, &val_set, &cfg.train)?;
    model.save(&cfg.output)?;
    fs::write(&cfg.history, model.history_csv())?;
    write_manifest(&manifest_path(&cfg.output), "train", cfg)?;
    Ok(model)
}

pub fn run_attack(cfg: &AttackRunConfig) -> Result<LabeledDataset> {
    let ds = load_dataset(&cfg.data)?;
    if ds.attack().is_some() {
        return Err(AmcError::Protocol("dataset is already perturbed".into()));
    }
    let surrogate = Model::load(&cfg.surrogate)?;
    check_seed(&surrogate, &ds)?;
    let target = select(&ds, cfg.partition, &cfg.split)?;
    let (perturbed, _) = perturb_dataset(&surrogate, &target, &cfg.attack)?;
    perturbed.save(&cfg.output)?;
    write_manifest(&manifest_path(&cfg.output), "attack", cfg)?;
    Ok(perturbed)
}

fn check_seed(model: &Model, ds: &LabeledDataset) -> Result<()> {
    if let Some(p) = &model.provenance {
        if p.dataset_seed != ds.seed() {
            return Err(AmcError::Protocol(format!(
                "{} was trained on dataset seed {}, data has seed {}",
                model.name(),
                p.dataset_seed,
                ds.seed()
            )));
        }
    }
    Ok(())
}

pub fn run_eval(cfg: &EvalRunConfig) -> Result<EvalReport> {
    let ds = load_dataset(&cfg.data)?;
    let model = Model::load(&cfg.model)?;
    check_seed(&model, &ds)?;
    let part = to_domain(select(&ds, cfg.partition, &cfg.split)?, model.domain)?;
    let report = evaluate(&model, &part)?;
    fs::create_dir_all(&cfg.output_dir)?;
    report.save_json(cfg.output_dir.join("report.json"))?;
    fs::write(cfg.output_dir.join("confusion.csv"), report.confusion_csv())?;
    write_manifest(&cfg.output_dir.join("eval.manifest.json"), "eval", cfg)?;
    Ok(report)
}

pub fn run_sweep(cfg: &SweepRunConfig) -> Result<EvalReport> {
    let ds = load_dataset(&cfg.data)?;
    let surrogate = Model::load(&cfg.surrogate)?;
    let targets = cfg
        .targets
        .iter()
        .map(Model::load)
        .collect::<Result<Vec<_>>>()?;
    let test = ds.subset(&cfg.split.apply(&ds)?.test)?;
    let base = AttackConfig {
        method: cfg.method,
        power_budget: cfg.power_budget,
        step: 0.0,
        iterations: cfg.iterations,
        norm_convention: cfg.norm_convention,
    };
    let refs: Vec<&Model> = targets.iter().collect();
    let report = budget_sweep(&surrogate, &refs, &test, &cfg.grid, &base)?;
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(cfg.output_dir.join("sweep.csv"), report.sweep_csv())?;
    report.save_json(cfg.output_dir.join("report.json"))?;
    write_manifest(&cfg.output_dir.join("sweep.manifest.json"), "sweep", cfg)?;
    Ok(report)
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

impl GenConfig {
    pub fn for_profile(profile: Profile, seed: u64, output: PathBuf) -> Self {
        GenConfig {
            per_class: profile.per_class(),
            frame_len: DEFAULT_FRAME_LEN,
            snr_db: crate::sigsynth::DEFAULT_SNR_DB,
            seed,
            output,
        }
    }
}
