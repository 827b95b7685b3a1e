//! Stratified splits, clean and attacked evaluation, transfer experiments and
//! budget sweeps, with JSON/CSV report writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::{perturb_dataset, AttackConfig, AttackMethod};
use crate::dataset::{AttackRecord, Domain, LabeledDataset};
use crate::error::{AmcError, Result};
use crate::features::transform_dataset;
use crate::zoo::Model;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_FRACTIONS: [f64; 3] = [0.70, 0.15, 0.15];

/// Train / validation / test indices into one dataset. The same index set is
/// used for both feature domains so test frames correspond one-to-one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitIndex {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub fractions: [f64; 3],
    pub seed: u64,
}

/// Per-class seeded shuffle; each class contributes `round(f_train * n)`
/// training and `round(f_val * n)` validation frames, the rest go to test.
/// Index lists are returned in ascending order.
pub fn split(ds: &LabeledDataset, fractions: [f64; 3], seed: u64) -> Result<SplitIndex> {
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|&f| !(f > 0.0 && f.is_finite())) || (sum - 1.0).abs() > 1e-9 {
        return Err(AmcError::Split(format!(
            "fractions must be positive and sum to 1, got {fractions:?}"
        )));
    }
    let mut by_class = vec![Vec::new(); ds.class_count()];
    for (i, &y) in ds.labels().iter().enumerate() {
        by_class[y as usize].push(i);
    }
    let mut out = SplitIndex {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        fractions,
        seed,
    };
    for (class, mut members) in by_class.into_iter().enumerate() {
        let n = members.len();
        if n < 3 {
            return Err(AmcError::Split(format!(
                "class {class} has {n} frames, at least 3 are needed"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class as u64);
        members.shuffle(&mut rng);
        let n_train = (fractions[0] * n as f64).round() as usize;
        let n_val = (fractions[1] * n as f64).round() as usize;
        if n_train == 0 || n_val == 0 || n_train + n_val >= n {
            return Err(AmcError::Split(format!(
                "class {class} with {n} frames leaves an empty partition under {fractions:?}"
            )));
        }
        out.train.extend_from_slice(&members[..n_train]);
        out.val.extend_from_slice(&members[n_train..n_train + n_val]);
        out.test.extend_from_slice(&members[n_train + n_val..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// One point of an accuracy-versus-budget curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: AttackMethod,
    pub surrogate: String,
    pub target: String,
    pub domain: Domain,
    /// `P_T` for FGSM sweeps, the step `alpha` for BIM sweeps.
    pub budget_or_alpha: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetAudit {
    pub frames: usize,
    pub violations: usize,
    /// Largest `||delta|| - radius` seen; negative when every frame is inside.
    pub max_excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub model: String,
    pub model_checksum: String,
    pub model_seed: u64,
    pub dataset_seed: u64,
    pub data_domain: Domain,
    pub snr_db: f64,
    pub attack: Option<AttackRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub accuracy: f64,
    pub total: usize,
    pub class_names: Vec<String>,
    /// Rows are true labels, columns predictions.
    pub confusion: Vec<Vec<u64>>,
    pub curve: Vec<SweepRow>,
    pub budget_audit: Option<BudgetAudit>,
    pub metadata: Option<ReportMetadata>,
}

impl EvalReport {
    pub fn from_predictions(
        predictions: &[usize],
        labels: &[u8],
        class_names: &[String],
    ) -> Result<Self> {
        let c = class_names.len();
        if predictions.len() != labels.len() {
            return Err(AmcError::Shape(format!(
                "{} predictions for {} labels",
                predictions.len(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(AmcError::Input("cannot evaluate on an empty set".into()));
        }
        let mut confusion = vec![vec![0u64; c]; c];
        for (&p, &y) in predictions.iter().zip(labels) {
            if p >= c || y as usize >= c {
                return Err(AmcError::Input(format!("class index out of range for {c} classes")));
            }
            confusion[y as usize][p] += 1;
        }
        let trace: u64 = (0..c).map(|i| confusion[i][i]).sum();
        Ok(EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            accuracy: trace as f64 / labels.len() as f64,
            total: labels.len(),
            class_names: class_names.to_vec(),
            confusion,
            curve: Vec::new(),
            budget_audit: None,
            metadata: None,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let report: EvalReport = serde_json::from_slice(&fs::read(path)?)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(AmcError::Version {
                what: "report",
                found: report.schema_version,
                expected: REPORT_SCHEMA_VERSION,
            });
        }
        Ok(report)
    }

    /// `truth_label,predicted_label,count` for every cell.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("truth_label,predicted_label,count\n");
        for (t, row) in self.confusion.iter().enumerate() {
            for (p, n) in row.iter().enumerate() {
                let _ = writeln!(out, "{t},{p},{n}");
            }
        }
        out
    }

    /// `method,surrogate,target,domain,budget_or_alpha,accuracy`
    pub fn sweep_csv(&self) -> String {
        sweep_csv(&self.curve)
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("method,surrogate,target,domain,budget_or_alpha,accuracy\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method, r.surrogate, r.target, r.domain, r.budget_or_alpha, r.accuracy
        );
    }
    out
}

/// Argmax accuracy and confusion of `model` on `ds`.
pub fn evaluate(model: &Model, ds: &LabeledDataset) -> Result<EvalReport> {
    let predictions = model.classify_dataset(ds)?;
    let mut report = EvalReport::from_predictions(&predictions, ds.labels(), ds.class_names())?;
    report.metadata = Some(ReportMetadata {
        model: model.name(),
        model_checksum: model.checksum(),
        model_seed: model.seed,
        dataset_seed: ds.seed(),
        data_domain: ds.domain(),
        snr_db: ds.snr_db(),
        attack: ds.attack().cloned(),
    });
    Ok(report)
}

/// Evaluates a model on perturbed time frames, transforming them first when
/// the model works on spectra.
fn evaluate_perturbed(model: &Model, perturbed: &LabeledDataset) -> Result<EvalReport> {
    match model.domain {
        Domain::Time => evaluate(model, perturbed),
        Domain::Freq => {
            let mut spectra = transform_dataset(perturbed)?;
            spectra.set_attack(perturbed.attack().cloned());
            evaluate(model, &spectra)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub surrogate: EvalReport,
    pub target: EvalReport,
    /// Target accuracy minus surrogate accuracy.
    pub gap: f64,
    pub zero_gradient_frames: usize,
    pub max_delta_norm: f64,
}

fn check_protocol(models: &[&Model], test: &LabeledDataset) -> Result<()> {
    if test.domain() != Domain::Time {
        return Err(AmcError::Domain(
            "attacks are evaluated on time-domain test frames".into(),
        ));
    }
    if test.attack().is_some() {
        return Err(AmcError::Protocol("test set is already perturbed".into()));
    }
    let mut reference = None;
    for m in models {
        if m.frame_len != test.frame_len() || m.classes != test.class_count() {
            return Err(AmcError::Protocol(format!(
                "{} was built for {}-sample frames and {} classes, test set has {} and {}",
                m.name(),
                m.frame_len,
                m.classes,
                test.frame_len(),
                test.class_count()
            )));
        }
        if let Some(p) = &m.provenance {
            if p.dataset_seed != test.seed() {
                return Err(AmcError::Protocol(format!(
                    "{} was trained on dataset seed {}, test set has seed {}",
                    m.name(),
                    p.dataset_seed,
                    test.seed()
                )));
            }
            match reference {
                None => reference = Some((m.name(), p)),
                Some((ref name, r)) => {
                    if r.split_seed != p.split_seed || r.frame_count != p.frame_count {
                        return Err(AmcError::Protocol(format!(
                            "{name} and {} were trained on different splits",
                            m.name()
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Crafts the attack on `surrogate`, scores the surrogate on the perturbed
/// frames and `target` on their DFT.
pub fn transfer_experiment(
    surrogate: &Model,
    target: &Model,
    test: &LabeledDataset,
    cfg: &AttackConfig,
) -> Result<TransferReport> {
    if target.domain != Domain::Freq {
        return Err(AmcError::Domain(format!(
            "transfer target {} must be a frequency-domain model",
            target.name()
        )));
    }
    check_protocol(&[surrogate, target], test)?;
    let (perturbed, outcome) = perturb_dataset(surrogate, test, cfg)?;
    let s = evaluate(surrogate, &perturbed)?;
    let t = evaluate_perturbed(target, &perturbed)?;
    Ok(TransferReport {
        gap: t.accuracy - s.accuracy,
        surrogate: s,
        target: t,
        zero_gradient_frames: outcome.zero_gradient_count(),
        max_delta_norm: outcome.norms.iter().copied().fold(0.0, f64::max),
    })
}

/// Sweeps the attack over `grid`: `P_T` values for FGSM, step sizes for BIM
/// (with `base.power_budget` fixed). Returns the surrogate's clean report
/// with one curve row per (grid point, model) and a budget audit.
pub fn budget_sweep(
    surrogate: &Model,
    targets: &[&Model],
    test: &LabeledDataset,
    grid: &[f64],
    base: &AttackConfig,
) -> Result<EvalReport> {
    if grid.is_empty() {
        return Err(AmcError::Config("sweep grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AmcError::Config(format!("sweep grid must be strictly ascending: {grid:?}")));
    }
    let mut models = vec![surrogate];
    models.extend_from_slice(targets);
    check_protocol(&models, test)?;

    let mut report = evaluate(surrogate, test)?;
    let mut audit = BudgetAudit {
        frames: 0,
        violations: 0,
        max_excess: f64::NEG_INFINITY,
    };
    for &value in grid {
        let cfg = match base.method {
            AttackMethod::Fgsm => AttackConfig {
                power_budget: value,
                ..base.clone()
            },
            AttackMethod::Bim => AttackConfig {
                step: value,
                ..base.clone()
            },
        };
        cfg.validate()?;
        let radius = cfg.effective_radius();
        let (perturbed, outcome) = perturb_dataset(surrogate, test, &cfg)?;
        for &n in &outcome.norms {
            audit.frames += 1;
            audit.max_excess = audit.max_excess.max(n - radius);
            if n > radius + 1e-6 {
                audit.violations += 1;
            }
        }
        for m in &models {
            let r = evaluate_perturbed(m, &perturbed)?;
            report.curve.push(SweepRow {
                method: cfg.method,
                surrogate: surrogate.name(),
                target: m.name(),
                domain: m.domain,
                budget_or_alpha: value,
                accuracy: r.accuracy,
            });
        }
        log::info!("sweep {} {value}: done", cfg.method);
    }
    report.budget_audit = Some(audit);
    Ok(report)
}

/// Mean over the grid of `target accuracy - surrogate accuracy` in a sweep
/// report, or `None` when either model has no rows.
pub fn mean_gap(report: &EvalReport, surrogate: &str, target: &str) -> Option<f64> {
    let pick = |name: &str| -> Vec<f64> {
        report
            .curve
            .iter()
            .filter(|r| r.target == name)
            .map(|r| r.accuracy)
            .collect()
    };
    let (s, t) = (pick(surrogate), pick(target));
    if s.is_empty() || s.len() != t.len() {
        return None;
    }
    Some(t.iter().zip(&s).map(|(a, b)| a - b).sum::<f64>() / s.len() as f64)
}
