//! The four classifier architectures, the training loop, prediction and the
//! `.ckpt` checkpoint format.
//!
//! Checkpoint layout: `u32` little-endian header length, UTF-8 JSON header
//! ([`CheckpointHeader`]), then every parameter as a little-endian `f32` in
//! [`Network::params`] order (per layer: dense/conv weights then bias, LSTM
//! `w_ih`, `w_hh`, bias with gates ordered input, forget, cell, output).

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Domain, LabeledDataset};
use crate::error::{AmcError, Result};
use crate::features::FreqFrame;
use crate::sigsynth::IqFrame;
use crate::tensorcore::{adam_step, AdamState, GradRequest, LayerSpec, Mode, Network, Tensor};

pub const CKPT_FORMAT: &str = "amc-ckpt";
pub const CKPT_VERSION: u32 = 1;
pub const DROPOUT_RATE: f64 = 0.2;

/// Frames per forward pass when evaluating.
const EVAL_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchitectureId {
    Fcnn,
    Cnn,
    Rnn,
    Crnn,
}

impl ArchitectureId {
    pub fn all() -> [ArchitectureId; 4] {
        [
            ArchitectureId::Fcnn,
            ArchitectureId::Cnn,
            ArchitectureId::Rnn,
            ArchitectureId::Crnn,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            ArchitectureId::Fcnn => "FCNN",
            ArchitectureId::Cnn => "CNN",
            ArchitectureId::Rnn => "RNN",
            ArchitectureId::Crnn => "CRNN",
        }
    }

    /// Full-width layer stack for `classes` outputs.
    pub fn layer_specs(self, classes: usize) -> Vec<LayerSpec> {
        self.scaled_layer_specs(classes, 1)
    }

    /// Layer stack with every width divided by `divisor` (at least one unit),
    /// used for cheap gradient checks.
    pub fn scaled_layer_specs(self, classes: usize, divisor: usize) -> Vec<LayerSpec> {
        let w = |n: usize| (n / divisor.max(1)).max(1);
        let dense = |units| LayerSpec::Dense { units };
        let conv = |maps, kernel_h, kernel_w| LayerSpec::Conv2d {
            feature_maps: w(maps),
            kernel_h,
            kernel_w,
        };
        let drop = LayerSpec::Dropout { rate: DROPOUT_RATE };
        use LayerSpec::{Flatten, FrameToImage, LastStep, MapsToSequence, Relu, Softmax};
        match self {
            ArchitectureId::Fcnn => vec![
                Flatten,
                dense(w(256)),
                Relu,
                drop.clone(),
                dense(w(128)),
                Relu,
                drop.clone(),
                dense(w(128)),
                Relu,
                drop,
                dense(classes),
                Softmax,
            ],
            ArchitectureId::Cnn => vec![
                FrameToImage,
                conv(256, 2, 5),
                Relu,
                drop.clone(),
                conv(64, 1, 3),
                Relu,
                drop,
                Flatten,
                dense(w(128)),
                Relu,
                dense(classes),
                Softmax,
            ],
            ArchitectureId::Rnn => vec![
                LayerSpec::Lstm { units: w(75) },
                LastStep,
                dense(w(128)),
                Relu,
                dense(classes),
                Softmax,
            ],
            ArchitectureId::Crnn => vec![
                FrameToImage,
                conv(128, 2, 5),
                Relu,
                conv(64, 1, 3),
                Relu,
                MapsToSequence,
                LayerSpec::Lstm { units: w(32) },
                LastStep,
                dense(classes),
                Softmax,
            ],
        }
    }
}

impl fmt::Display for ArchitectureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchitectureId {
    type Err = AmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fcnn" => Ok(ArchitectureId::Fcnn),
            "cnn" => Ok(ArchitectureId::Cnn),
            "rnn" => Ok(ArchitectureId::Rnn),
            "crnn" => Ok(ArchitectureId::Crnn),
            other => Err(AmcError::Config(format!(
                "unknown architecture '{other}' (expected fcnn, cnn, rnn or crnn)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_acc: f64,
    pub val_acc: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Which data a model was trained on; lets the harness refuse to pair models
/// trained on different splits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataProvenance {
    pub dataset_seed: u64,
    pub split_seed: u64,
    pub frame_count: usize,
    pub snr_db: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub architecture: ArchitectureId,
    pub domain: Domain,
    pub frame_len: usize,
    pub classes: usize,
    pub seed: u64,
    pub network: Network<f32>,
    pub history: Vec<EpochRecord>,
    pub provenance: Option<DataProvenance>,
}

pub fn build_model(
    arch: ArchitectureId,
    domain: Domain,
    frame_len: usize,
    classes: usize,
    seed: u64,
) -> Result<Model> {
    build_model_from_specs(arch, &arch.layer_specs(classes), domain, frame_len, classes, seed)
}

pub fn build_model_from_specs(
    arch: ArchitectureId,
    specs: &[LayerSpec],
    domain: Domain,
    frame_len: usize,
    classes: usize,
    seed: u64,
) -> Result<Model> {
    if frame_len == 0 || classes == 0 {
        return Err(AmcError::Config("frame_len and class count must be positive".into()));
    }
    let network = Network::from_specs(specs, &[frame_len, 2], seed)?;
    if network.classes() != classes {
        return Err(AmcError::Config(format!(
            "layer stack produces {} outputs, expected {classes}",
            network.classes()
        )));
    }
    Ok(Model {
        architecture: arch,
        domain,
        frame_len,
        classes,
        seed,
        network,
        history: Vec::new(),
        provenance: None,
    })
}

/// Argmax with ties resolved toward the lowest index.
pub fn classify(likelihoods: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in likelihoods.iter().enumerate() {
        if v > likelihoods[best] {
            best = i;
        }
    }
    best
}

/// A frame that knows which feature domain it lives in.
pub trait DomainFrame {
    fn domain(&self) -> Domain;
    fn values(&self) -> &[f32];
}

impl DomainFrame for IqFrame {
    fn domain(&self) -> Domain {
        Domain::Time
    }

    fn values(&self) -> &[f32] {
        self.samples()
    }
}

impl DomainFrame for FreqFrame {
    fn domain(&self) -> Domain {
        Domain::Freq
    }

    fn values(&self) -> &[f32] {
        self.bins()
    }
}

impl Model {
    pub fn name(&self) -> String {
        format!("{}-{}", self.architecture.name(), self.domain)
    }

    /// Eval-mode likelihood vector for a single frame.
    pub fn predict<F: DomainFrame>(&self, frame: &F) -> Result<Vec<f32>> {
        if frame.domain() != self.domain {
            return Err(AmcError::Domain(format!(
                "{} model given a {} frame",
                self.domain,
                frame.domain()
            )));
        }
        self.predict_raw(frame.values(), 1)
    }

    /// Likelihoods for `count` frames packed in `frames`, `count x classes`.
    pub fn predict_raw(&self, frames: &[f32], count: usize) -> Result<Vec<f32>> {
        let width = self.frame_len * 2;
        if frames.len() != count * width {
            return Err(AmcError::Shape(format!(
                "expected {count} frames of {} samples",
                self.frame_len
            )));
        }
        let mut out = Vec::with_capacity(count * self.classes);
        for chunk in frames.chunks(EVAL_CHUNK * width) {
            let n = chunk.len() / width;
            let x = Tensor::new(vec![n, self.frame_len, 2], chunk.to_vec())?;
            out.extend_from_slice(self.network.forward(&x)?.data());
        }
        Ok(out)
    }

    /// Predicted class per frame of a dataset in this model's domain.
    pub fn classify_dataset(&self, ds: &LabeledDataset) -> Result<Vec<usize>> {
        self.check_dataset(ds)?;
        let probs = self.predict_raw(ds.frames(), ds.len())?;
        Ok(probs.chunks_exact(self.classes).map(classify).collect())
    }

    pub fn check_dataset(&self, ds: &LabeledDataset) -> Result<()> {
        if ds.domain() != self.domain {
            return Err(AmcError::Domain(format!(
                "{} expects {} data, dataset is {}",
                self.name(),
                self.domain,
                ds.domain()
            )));
        }
        if ds.frame_len() != self.frame_len || ds.class_count() != self.classes {
            return Err(AmcError::Shape(format!(
                "{} expects {} x {} frames with {} classes, dataset has {} x 2 with {}",
                self.name(),
                self.frame_len,
                2,
                self.classes,
                ds.frame_len(),
                ds.class_count()
            )));
        }
        Ok(())
    }

    /// SHA-256 of the parameter bytes, hex encoded.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for p in self.network.params() {
            for v in p {
                hasher.update(v.to_le_bytes());
            }
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn header(&self) -> CheckpointHeader {
        CheckpointHeader {
            format: CKPT_FORMAT.to_string(),
            version: CKPT_VERSION,
            architecture: self.architecture,
            domain: self.domain,
            frame_len: self.frame_len,
            classes: self.classes,
            seed: self.seed,
            epochs_trained: self.history.len(),
            layers: self.network.specs().to_vec(),
            param_count: self.network.param_count(),
            provenance: self.provenance.clone(),
            history: self.history.clone(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header())?;
        let mut out = Vec::with_capacity(4 + header.len() + 4 * self.network.param_count());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for p in self.network.params() {
            for v in p {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let len_bytes: [u8; 4] = bytes
            .get(..4)
            .ok_or_else(|| AmcError::Format("checkpoint too short".into()))?
            .try_into()
            .expect("four bytes");
        let header_len = u32::from_le_bytes(len_bytes) as usize;
        let json = bytes
            .get(4..4 + header_len)
            .ok_or_else(|| AmcError::Format("truncated checkpoint header".into()))?;
        let header: CheckpointHeader = serde_json::from_slice(json)
            .map_err(|e| AmcError::Format(format!("checkpoint header: {e}")))?;
        if header.format != CKPT_FORMAT {
            return Err(AmcError::Format(format!("not a checkpoint: format '{}'", header.format)));
        }
        if header.version != CKPT_VERSION {
            return Err(AmcError::Version {
                what: ".ckpt",
                found: header.version,
                expected: CKPT_VERSION,
            });
        }
        let mut model = build_model_from_specs(
            header.architecture,
            &header.layers,
            header.domain,
            header.frame_len,
            header.classes,
            header.seed,
        )
        .map_err(|e| AmcError::Format(format!("checkpoint layer stack: {e}")))?;
        let raw = &bytes[4 + header_len..];
        let count = model.network.param_count();
        if header.param_count != count || raw.len() != 4 * count {
            return Err(AmcError::Format(format!(
                "checkpoint holds {} parameter bytes, the layer stack needs {}",
                raw.len(),
                4 * count
            )));
        }
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")))
            .collect();
        model.network.set_flat_params(&values)?;
        model.history = header.history;
        model.provenance = header.provenance;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| {
            AmcError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?;
        Self::from_bytes(&bytes)
    }

    /// Training history as CSV: `epoch,train_acc,val_acc,train_loss,val_loss`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_acc,val_acc,train_loss,val_loss\n");
        for r in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.train_acc, r.val_acc, r.train_loss, r.val_loss
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub architecture: ArchitectureId,
    pub domain: Domain,
    pub frame_len: usize,
    pub classes: usize,
    pub seed: u64,
    pub epochs_trained: usize,
    pub layers: Vec<LayerSpec>,
    pub param_count: usize,
    pub provenance: Option<DataProvenance>,
    pub history: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Train / validation / test fractions.
    pub fractions: [f64; 3],
    pub seed: u64,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 75,
            batch_size: 64,
            fractions: [0.70, 0.15, 0.15],
            seed: 0,
            learning_rate: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(AmcError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(AmcError::Config("batch size must be at least 1".into()));
        }
        let sum: f64 = self.fractions.iter().sum();
        if self.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (sum - 1.0).abs() > 1e-9 {
            return Err(AmcError::Config(format!(
                "split fractions must be in [0, 1] and sum to 1, got {:?}",
                self.fractions
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(AmcError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Mini-batch Adam on `train`, one [`EpochRecord`] per epoch evaluated on
/// `val`. The final parameters are those after the last epoch.
pub fn train(
    model: &mut Model,
    train_set: &LabeledDataset,
    val_set: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<()> {
    cfg.validate()?;
    model.check_dataset(train_set)?;
    model.check_dataset(val_set)?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(AmcError::Input("training and validation sets must be non-empty".into()));
    }
    let lens: Vec<usize> = model.network.params().iter().map(|p| p.len()).collect();
    let mut adam = AdamState::<f32>::new(&lens, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let width = model.frame_len * 2;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut batch_x = Vec::with_capacity(cfg.batch_size * width);
    let mut batch_y = Vec::with_capacity(cfg.batch_size);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            batch_x.clear();
            batch_y.clear();
            for &i in chunk {
                batch_x.extend_from_slice(train_set.frame(i));
                batch_y.push(train_set.labels()[i] as usize);
            }
            let x = Tensor::new(vec![chunk.len(), model.frame_len, 2], batch_x.clone())?;
            let bp = model
                .network
                .backprop(&x, &batch_y, Mode::Train, Some(&mut rng), GradRequest::PARAMS)?;
            loss_sum += bp.loss * chunk.len() as f64;
            correct += bp
                .probabilities
                .chunks_exact(model.classes)
                .zip(&batch_y)
                .filter(|(p, &y)| classify(p) == y)
                .count();
            adam_step(&mut model.network.params_mut(), &bp.param_grads, &mut adam)?;
        }
        let (val_loss, val_acc) = loss_and_accuracy(model, val_set)?;
        let record = EpochRecord {
            epoch: model.history.len() + 1,
            train_acc: correct as f64 / train_set.len() as f64,
            val_acc,
            train_loss: loss_sum / train_set.len() as f64,
            val_loss,
        };
        log::info!(
            "{} epoch {}: train acc {:.4} loss {:.4}, val acc {:.4} loss {:.4}",
            model.name(),
            record.epoch,
            record.train_acc,
            record.train_loss,
            record.val_acc,
            record.val_loss
        );
        model.history.push(record);
    }
    Ok(())
}

/// Eval-mode mean cross-entropy and accuracy.
pub fn loss_and_accuracy(model: &Model, ds: &LabeledDataset) -> Result<(f64, f64)> {
    model.check_dataset(ds)?;
    if ds.is_empty() {
        return Err(AmcError::Input("cannot score an empty dataset".into()));
    }
    let probs = model.predict_raw(ds.frames(), ds.len())?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (p, &y) in probs.chunks_exact(model.classes).zip(ds.labels()) {
        let y = y as usize;
        loss -= (p[y] as f64).max(crate::tensorcore::LOG_CLAMP).ln();
        if classify(p) == y {
            correct += 1;
        }
    }
    Ok((loss / ds.len() as f64, correct as f64 / ds.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigsynth::{synthesize_dataset, ChannelConfig, ModulationScheme};

    #[test]
    fn cnn_flatten_width() {
        let m = build_model(ArchitectureId::Cnn, Domain::Time, 128, 4, 0).unwrap();
        let shapes = m.network.layer_shapes();
        assert_eq!(shapes[1], vec![256, 1, 124]);
        assert_eq!(shapes[4], vec![64, 1, 122]);
        assert_eq!(shapes[7], vec![7808]);
        assert_eq!(shapes.last().unwrap(), &vec![4]);
    }

    #[test]
    fn crnn_bridge_shapes() {
        let m = build_model(ArchitectureId::Crnn, Domain::Freq, 128, 4, 0).unwrap();
        let shapes = m.network.layer_shapes();
        assert_eq!(shapes[5], vec![122, 64]);
        assert_eq!(shapes[6], vec![122, 32]);
        assert_eq!(shapes[7], vec![32]);
    }

    #[test]
    fn untrained_models_emit_distributions() {
        let frame = IqFrame::from_interleaved((0..64).map(|v| (v as f32 * 0.37).sin()).collect())
            .unwrap();
        for arch in ArchitectureId::all() {
            let m = build_model(arch, Domain::Time, 32, 4, 1).unwrap();
            let p = m.predict(&frame).unwrap();
            assert_eq!(p.len(), 4);
            let sum: f32 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6, "{arch}: {sum}");
            assert!(p.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn same_seed_same_parameters() {
        for arch in ArchitectureId::all() {
            let a = build_model(arch, Domain::Time, 32, 4, 9).unwrap();
            let b = build_model(arch, Domain::Time, 32, 4, 9).unwrap();
            let c = build_model(arch, Domain::Time, 32, 4, 10).unwrap();
            assert_eq!(a.network, b.network);
            assert_ne!(a.network, c.network);
        }
    }

    #[test]
    fn classify_tie_breaks_low() {
        assert_eq!(classify(&[0.1, 0.2, 0.3, 0.4]), 3);
        assert_eq!(classify(&[0.25; 4]), 0);
        assert_eq!(classify(&[0.1, 0.45, 0.45, 0.0]), 1);
    }

    #[test]
    fn predict_rejects_wrong_domain() {
        let m = build_model(ArchitectureId::Fcnn, Domain::Freq, 16, 4, 0).unwrap();
        let frame = IqFrame::from_interleaved(vec![0.1; 32]).unwrap();
        assert!(matches!(m.predict(&frame), Err(AmcError::Domain(_))));
        assert!("mlp".parse::<ArchitectureId>().is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut m = build_model(ArchitectureId::Crnn, Domain::Freq, 32, 4, 3).unwrap();
        m.history.push(EpochRecord {
            epoch: 1,
            train_acc: 0.5,
            val_acc: 0.25,
            train_loss: 1.2,
            val_loss: 1.3,
        });
        let bytes = m.to_bytes().unwrap();
        let back = Model::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.checksum(), m.checksum());

        let header_len = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[4..4 + header_len]).unwrap();
        assert_eq!(header["architecture"], "crnn");
        assert_eq!(header["domain"], "freq");
        assert_eq!(header["epochs_trained"], 1);
        assert!(Model::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn train_config_guards() {
        assert!(TrainConfig { epochs: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { fractions: [0.5, 0.5, 0.5], ..TrainConfig::default() }
            .validate()
            .is_err());
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn one_epoch_one_record_and_domain_guard() {
        let ds = synthesize_dataset(8, 32, &ModulationScheme::all(), &ChannelConfig::default(), 1)
            .unwrap();
        let mut m = build_model(ArchitectureId::Fcnn, Domain::Time, 32, 4, 0).unwrap();
        let cfg = TrainConfig { epochs: 1, batch_size: 8, ..TrainConfig::default() };
        train(&mut m, &ds, &ds, &cfg).unwrap();
        assert_eq!(m.history.len(), 1);
        assert_eq!(m.history[0].epoch, 1);

        let mut f = build_model(ArchitectureId::Fcnn, Domain::Freq, 32, 4, 0).unwrap();
        assert!(matches!(train(&mut f, &ds, &ds, &cfg), Err(AmcError::Domain(_))));
        let empty = ds.subset(&[]).unwrap();
        assert!(matches!(train(&mut m, &empty, &ds, &cfg), Err(AmcError::Input(_))));
    }
}
