//! White-box l2 evasion attacks on a time-domain surrogate.
//!
//! FGSM takes one step of length `r` along the normalized loss gradient. BIM
//! takes `iterations` steps of length `alpha` and projects the cumulative
//! perturbation back onto the l2 ball of radius `r` after each one. All
//! perturbation arithmetic is in f64.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{AttackRecord, Domain, LabeledDataset};
use crate::error::{AmcError, Result};
use crate::sigsynth::IqFrame;
use crate::tensorcore::Tensor;
use crate::zoo::Model;

pub const DEFAULT_BIM_ITERATIONS: usize = 10;

/// Frames per surrogate gradient pass.
const ATTACK_CHUNK: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackMethod {
    Fgsm,
    Bim,
}

impl AttackMethod {
    pub fn name(self) -> &'static str {
        match self {
            AttackMethod::Fgsm => "FGSM",
            AttackMethod::Bim => "BIM",
        }
    }
}

impl fmt::Display for AttackMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackMethod {
    type Err = AmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fgsm" => Ok(AttackMethod::Fgsm),
            "bim" => Ok(AttackMethod::Bim),
            other => Err(AmcError::Config(format!(
                "unknown attack '{other}' (expected fgsm or bim)"
            ))),
        }
    }
}

/// How the power budget maps to the l2 radius.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormConvention {
    /// `r = P_T`
    #[default]
    Radius,
    /// `r = sqrt(P_T)`
    Power,
}

impl FromStr for NormConvention {
    type Err = AmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "radius" => Ok(NormConvention::Radius),
            "power" => Ok(NormConvention::Power),
            other => Err(AmcError::Config(format!(
                "unknown norm convention '{other}' (expected radius or power)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub method: AttackMethod,
    pub power_budget: f64,
    /// BIM step length; ignored by FGSM.
    pub step: f64,
    /// BIM iteration count; ignored by FGSM.
    pub iterations: usize,
    #[serde(default)]
    pub norm_convention: NormConvention,
}

impl AttackConfig {
    pub fn fgsm(power_budget: f64) -> Self {
        AttackConfig {
            method: AttackMethod::Fgsm,
            power_budget,
            step: 0.0,
            iterations: 1,
            norm_convention: NormConvention::Radius,
        }
    }

    pub fn bim(power_budget: f64, step: f64, iterations: usize) -> Self {
        AttackConfig {
            method: AttackMethod::Bim,
            power_budget,
            step,
            iterations,
            norm_convention: NormConvention::Radius,
        }
    }

    pub fn effective_radius(&self) -> f64 {
        match self.norm_convention {
            NormConvention::Radius => self.power_budget,
            NormConvention::Power => self.power_budget.sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power_budget.is_finite() && self.power_budget >= 0.0) {
            return Err(AmcError::Config(format!(
                "power budget must be finite and non-negative, got {}",
                self.power_budget
            )));
        }
        if self.method == AttackMethod::Bim {
            let r = self.effective_radius();
            if !(self.step.is_finite() && self.step >= 0.0 && self.step <= r * (1.0 + 1e-12)) {
                return Err(AmcError::Config(format!(
                    "BIM step {} must lie in [0, {r}]",
                    self.step
                )));
            }
            if self.iterations == 0 {
                return Err(AmcError::Config("BIM needs at least one iteration".into()));
            }
        }
        Ok(())
    }
}

/// What an attack did to one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub delta: Vec<f32>,
    pub achieved_norm: f64,
    pub zero_gradient: bool,
}

/// Perturbed frames for a batch, packed like the input.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackOutcome {
    pub frames: Vec<f32>,
    /// l2 norm of each applied perturbation, measured on the stored f32 frames.
    pub norms: Vec<f64>,
    pub zero_gradient: Vec<bool>,
}

impl AttackOutcome {
    pub fn zero_gradient_count(&self) -> usize {
        self.zero_gradient.iter().filter(|&&z| z).count()
    }
}

fn check_surrogate(surrogate: &Model) -> Result<()> {
    if surrogate.domain != Domain::Time {
        return Err(AmcError::ThreatModel(format!(
            "attacks are crafted on time-domain surrogates, {} is a {} model",
            surrogate.name(),
            surrogate.domain
        )));
    }
    Ok(())
}

/// Single-step attack with `||delta|| = radius` unless the gradient vanishes.
pub fn fgsm(
    surrogate: &Model,
    frame: &IqFrame,
    label: usize,
    radius: f64,
) -> Result<(IqFrame, Perturbation)> {
    single(surrogate, frame, label, &AttackConfig::fgsm(radius))
}

/// Iterative attack with step `alpha`, projected onto the ball of `radius`.
pub fn bim(
    surrogate: &Model,
    frame: &IqFrame,
    label: usize,
    radius: f64,
    alpha: f64,
    iterations: usize,
) -> Result<(IqFrame, Perturbation)> {
    single(surrogate, frame, label, &AttackConfig::bim(radius, alpha, iterations))
}

fn single(
    surrogate: &Model,
    frame: &IqFrame,
    label: usize,
    cfg: &AttackConfig,
) -> Result<(IqFrame, Perturbation)> {
    let out = craft_batch(surrogate, frame.samples(), &[label], cfg)?;
    let delta: Vec<f32> = out
        .frames
        .iter()
        .zip(frame.samples())
        .map(|(a, b)| a - b)
        .collect();
    let perturbed = IqFrame::from_interleaved(out.frames)?;
    Ok((
        perturbed,
        Perturbation {
            delta,
            achieved_norm: out.norms[0],
            zero_gradient: out.zero_gradient[0],
        },
    ))
}

/// Attacks every frame of a packed `count x len x 2` batch.
pub fn craft_batch(
    surrogate: &Model,
    frames: &[f32],
    labels: &[usize],
    cfg: &AttackConfig,
) -> Result<AttackOutcome> {
    check_surrogate(surrogate)?;
    cfg.validate()?;
    let width = surrogate.frame_len * 2;
    if frames.len() != labels.len() * width {
        return Err(AmcError::Shape(format!(
            "{} labels for {} values of {}-sample frames",
            labels.len(),
            frames.len(),
            surrogate.frame_len
        )));
    }
    let radius = cfg.effective_radius();
    let (steps, alpha) = match cfg.method {
        AttackMethod::Fgsm => (1, radius),
        AttackMethod::Bim => (cfg.iterations, cfg.step),
    };

    let mut out = AttackOutcome {
        frames: Vec::with_capacity(frames.len()),
        norms: Vec::with_capacity(labels.len()),
        zero_gradient: Vec::with_capacity(labels.len()),
    };
    for (chunk, ys) in frames.chunks(ATTACK_CHUNK * width).zip(labels.chunks(ATTACK_CHUNK)) {
        let n = ys.len();
        let origin: Vec<f64> = chunk.iter().map(|&v| v as f64).collect();
        let mut x = origin.clone();
        let mut zero = vec![false; n];
        for it in 0..steps {
            let input = Tensor::new(
                vec![n, surrogate.frame_len, 2],
                x.iter().map(|&v| v as f32).collect(),
            )?;
            let bp = surrogate.network.input_gradient_directions(&input, ys)?;
            let grad = bp
                .input_grad
                .ok_or_else(|| AmcError::Internal("surrogate returned no input gradient".into()))?;
            for (s, zero_s) in zero.iter_mut().enumerate() {
                let range = s * width..(s + 1) * width;
                let g = &grad.data()[range.clone()];
                let norm = g.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
                if norm == 0.0 {
                    if it == 0 {
                        *zero_s = true;
                    }
                    continue;
                }
                let scale = alpha / norm;
                let x0 = &origin[range.clone()];
                let xs = &mut x[range];
                let mut delta: Vec<f64> = xs
                    .iter()
                    .zip(g)
                    .zip(x0)
                    .map(|((&xv, &gv), &ov)| xv + scale * gv as f64 - ov)
                    .collect();
                let dn = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
                if dn > radius {
                    let shrink = radius / dn;
                    delta.iter_mut().for_each(|d| *d *= shrink);
                }
                for ((xv, &ov), d) in xs.iter_mut().zip(x0).zip(delta) {
                    *xv = ov + d;
                }
            }
        }
        for s in 0..n {
            let base = s * width;
            let mut sq = 0.0;
            for k in base..base + width {
                let v = x[k] as f32;
                sq += (v as f64 - chunk[k] as f64).powi(2);
                out.frames.push(v);
            }
            out.norms.push(sq.sqrt());
        }
        out.zero_gradient.extend(zero);
    }
    Ok(out)
}

/// Attacks a whole time-domain dataset and tags the result with an
/// [`AttackRecord`] naming the surrogate.
pub fn perturb_dataset(
    surrogate: &Model,
    ds: &LabeledDataset,
    cfg: &AttackConfig,
) -> Result<(LabeledDataset, AttackOutcome)> {
    check_surrogate(surrogate)?;
    if ds.domain() != Domain::Time {
        return Err(AmcError::Domain(
            "attacks perturb time-domain frames; transform after attacking".into(),
        ));
    }
    surrogate.check_dataset(ds)?;
    let labels: Vec<usize> = ds.labels().iter().map(|&y| y as usize).collect();
    let outcome = craft_batch(surrogate, ds.frames(), &labels, cfg)?;
    let mut out = ds.with_frames(outcome.frames.clone(), Domain::Time)?;
    out.set_attack(Some(AttackRecord {
        config: cfg.clone(),
        surrogate_architecture: surrogate.architecture.name().to_string(),
        surrogate_checksum: surrogate.checksum(),
        zero_gradient_frames: outcome.zero_gradient_count(),
    }));
    log::info!(
        "{} on {}: {} frames, {} with zero gradient",
        cfg.method,
        surrogate.name(),
        ds.len(),
        outcome.zero_gradient_count()
    );
    Ok((out, outcome))
}
