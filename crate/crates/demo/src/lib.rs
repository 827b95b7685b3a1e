//! Browser bindings: synthesize a frame, look at its spectrum, and watch an
//! FGSM perturbation crafted on a time-domain classifier land on a
//! frequency-domain one.

use amc_core::attacks::{fgsm, AttackConfig};
use amc_core::features::{dft, transform_dataset};
use amc_core::sigsynth::{
    frame_rng, synthesize_dataset, synthesize_frame, ChannelConfig, IqFrame, ModulationScheme,
};
use amc_core::zoo::{build_model, train, ArchitectureId, Model, TrainConfig};
use amc_core::{Domain, Result};
use wasm_bindgen::prelude::*;

pub const FRAME_LEN: usize = 128;

fn to_js(e: amc_core::AmcError) -> JsError {
    JsError::new(&e.to_string())
}

pub fn scheme_names() -> Vec<String> {
    ModulationScheme::all().iter().map(|s| s.name().to_string()).collect()
}

pub fn synthesize_iq(scheme: &str, snr_db: f64, seed: u64) -> Result<Vec<f32>> {
    let scheme: ModulationScheme = scheme.parse()?;
    let cfg = ChannelConfig::with_snr_db(snr_db);
    cfg.validate()?;
    let mut rng = frame_rng(seed, 0, 0);
    Ok(synthesize_frame(&scheme, FRAME_LEN, &cfg, &mut rng)?.into_samples())
}

/// DFT magnitude per bin.
pub fn magnitude_spectrum(iq: &[f32]) -> Result<Vec<f32>> {
    let frame = IqFrame::from_interleaved(iq.to_vec())?;
    Ok(dft(&frame)
        .to_complex()
        .iter()
        .map(|z| z.norm() as f32)
        .collect())
}

/// A small time-domain / frequency-domain FCNN pair trained in place.
pub struct Pair {
    time: Model,
    freq: Model,
}

impl Pair {
    pub fn train(per_class: usize, epochs: usize, seed: u64) -> Result<Self> {
        let ds = synthesize_dataset(
            per_class,
            FRAME_LEN,
            &ModulationScheme::all(),
            &ChannelConfig::default(),
            seed,
        )?;
        let spectra = transform_dataset(&ds)?;
        let cfg = TrainConfig {
            epochs,
            seed,
            ..TrainConfig::default()
        };
        let mut time = build_model(ArchitectureId::Fcnn, Domain::Time, FRAME_LEN, 4, seed)?;
        train(&mut time, &ds, &ds, &cfg)?;
        let mut freq = build_model(ArchitectureId::Fcnn, Domain::Freq, FRAME_LEN, 4, seed + 1)?;
        train(&mut freq, &spectra, &spectra, &cfg)?;
        Ok(Pair { time, freq })
    }

    /// Likelihoods of the time model followed by those of the frequency model.
    pub fn classify(&self, iq: &[f32]) -> Result<Vec<f32>> {
        let frame = IqFrame::from_interleaved(iq.to_vec())?;
        let mut out = self.time.predict(&frame)?;
        out.extend(self.freq.predict(&dft(&frame))?);
        Ok(out)
    }

    /// FGSM on the time model with l2 radius `radius`.
    pub fn attack(&self, iq: &[f32], label: usize, radius: f64) -> Result<Vec<f32>> {
        AttackConfig::fgsm(radius).validate()?;
        let frame = IqFrame::from_interleaved(iq.to_vec())?;
        Ok(fgsm(&self.time, &frame, label, radius)?.0.into_samples())
    }
}

#[wasm_bindgen(js_name = schemeNames)]
pub fn js_scheme_names() -> Vec<String> {
    scheme_names()
}

/// Interleaved `[I0, Q0, I1, Q1, ...]` unit-energy frame.
#[wasm_bindgen]
pub fn synthesize(scheme: &str, snr_db: f64, seed: u32) -> std::result::Result<Vec<f32>, JsError> {
    synthesize_iq(scheme, snr_db, seed as u64).map_err(to_js)
}

#[wasm_bindgen]
pub fn spectrum(iq: &[f32]) -> std::result::Result<Vec<f32>, JsError> {
    magnitude_spectrum(iq).map_err(to_js)
}

#[wasm_bindgen]
pub struct Classifiers {
    inner: Pair,
}

#[wasm_bindgen]
impl Classifiers {
    #[wasm_bindgen(constructor)]
    pub fn new(per_class: usize, epochs: usize, seed: u32) -> std::result::Result<Classifiers, JsError> {
        Pair::train(per_class, epochs, seed as u64)
            .map(|inner| Classifiers { inner })
            .map_err(to_js)
    }

    pub fn classify(&self, iq: &[f32]) -> std::result::Result<Vec<f32>, JsError> {
        self.inner.classify(iq).map_err(to_js)
    }

    pub fn attack(&self, iq: &[f32], label: usize, radius: f64) -> std::result::Result<Vec<f32>, JsError> {
        self.inner.attack(iq, label, radius).map_err(to_js)
    }
}
