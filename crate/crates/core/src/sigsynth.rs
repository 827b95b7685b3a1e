//! Synthetic complex-baseband frames for the four modulation classes.
//!
//! Each frame is produced by drawing random bits, modulating them, passing the
//! waveform through a [`ChannelConfig`] (scale by `sqrt(rho)`, convolve with the
//! fading taps, optional CFO/SRO impairments, complex AWGN), cropping a
//! symbol-aligned window of `frame_len` samples and normalizing it to unit
//! energy.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use crate::dataset::{Domain, LabeledDataset};
use crate::error::{AmcError, Result};

pub const DEFAULT_FRAME_LEN: usize = 128;
pub const DEFAULT_SAMPLES_PER_SYMBOL: usize = 8;
pub const DEFAULT_MODULATION_INDEX: f64 = 0.5;
pub const DEFAULT_GAUSSIAN_BT: f64 = 0.35;
pub const DEFAULT_SNR_DB: f64 = 18.0;

/// Root-raised-cosine roll-off used to shape PAM4 and QPSK symbols.
pub const PULSE_ROLLOFF: f64 = 0.35;
/// Pulse-shaping filter length, in symbols.
pub const PULSE_SPAN_SYMBOLS: usize = 8;
/// Gaussian frequency-pulse length for GFSK, in symbols.
const GAUSSIAN_SPAN_SYMBOLS: usize = 4;
/// Extra symbols generated beyond the frame so the crop offset can vary.
const CROP_SLACK_SYMBOLS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum ModulationScheme {
    Cpfsk {
        samples_per_symbol: usize,
        modulation_index: f64,
    },
    Gfsk {
        samples_per_symbol: usize,
        modulation_index: f64,
        gaussian_bt: f64,
    },
    Pam4 {
        samples_per_symbol: usize,
    },
    Qpsk {
        samples_per_symbol: usize,
    },
}

impl ModulationScheme {
    pub fn cpfsk() -> Self {
        ModulationScheme::Cpfsk {
            samples_per_symbol: DEFAULT_SAMPLES_PER_SYMBOL,
            modulation_index: DEFAULT_MODULATION_INDEX,
        }
    }

    pub fn gfsk() -> Self {
        ModulationScheme::Gfsk {
            samples_per_symbol: DEFAULT_SAMPLES_PER_SYMBOL,
            modulation_index: DEFAULT_MODULATION_INDEX,
            gaussian_bt: DEFAULT_GAUSSIAN_BT,
        }
    }

    pub fn pam4() -> Self {
        ModulationScheme::Pam4 {
            samples_per_symbol: DEFAULT_SAMPLES_PER_SYMBOL,
        }
    }

    pub fn qpsk() -> Self {
        ModulationScheme::Qpsk {
            samples_per_symbol: DEFAULT_SAMPLES_PER_SYMBOL,
        }
    }

    /// The four studied schemes in label order (0: CPFSK, 1: GFSK, 2: PAM4, 3: QPSK).
    pub fn all() -> Vec<ModulationScheme> {
        vec![Self::cpfsk(), Self::gfsk(), Self::pam4(), Self::qpsk()]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModulationScheme::Cpfsk { .. } => "CPFSK",
            ModulationScheme::Gfsk { .. } => "GFSK",
            ModulationScheme::Pam4 { .. } => "PAM4",
            ModulationScheme::Qpsk { .. } => "QPSK",
        }
    }

    pub fn samples_per_symbol(&self) -> usize {
        match *self {
            ModulationScheme::Cpfsk { samples_per_symbol, .. }
            | ModulationScheme::Gfsk { samples_per_symbol, .. }
            | ModulationScheme::Pam4 { samples_per_symbol }
            | ModulationScheme::Qpsk { samples_per_symbol } => samples_per_symbol,
        }
    }

    pub fn bits_per_symbol(&self) -> usize {
        match self {
            ModulationScheme::Cpfsk { .. } | ModulationScheme::Gfsk { .. } => 1,
            ModulationScheme::Pam4 { .. } | ModulationScheme::Qpsk { .. } => 2,
        }
    }

    pub fn is_constant_envelope(&self) -> bool {
        matches!(
            self,
            ModulationScheme::Cpfsk { .. } | ModulationScheme::Gfsk { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_symbol() == 0 {
            return Err(AmcError::Config(format!(
                "{}: samples_per_symbol must be at least 1",
                self.name()
            )));
        }
        match *self {
            ModulationScheme::Cpfsk { modulation_index, .. } => check_index(modulation_index),
            ModulationScheme::Gfsk {
                modulation_index,
                gaussian_bt,
                ..
            } => {
                check_index(modulation_index)?;
                if !(gaussian_bt > 0.0 && gaussian_bt <= 1.0) {
                    return Err(AmcError::Config(format!(
                        "GFSK: gaussian_bt must lie in (0, 1], got {gaussian_bt}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn check_index(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(AmcError::Config(format!(
            "modulation index must be positive and finite, got {h}"
        )))
    }
}

impl fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationScheme {
    type Err = AmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cpfsk" => Ok(Self::cpfsk()),
            "gfsk" => Ok(Self::gfsk()),
            "pam4" => Ok(Self::pam4()),
            "qpsk" => Ok(Self::qpsk()),
            other => Err(AmcError::Config(format!(
                "unknown modulation scheme '{other}' (expected cpfsk, gfsk, pam4 or qpsk)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// `10 log10(rho)`.
    pub snr_db: f64,
    /// Carrier frequency offset in cycles per sample.
    pub cfo_hz_normalized: f64,
    /// Sample-rate offset in parts per million.
    pub sro_ppm: f64,
    /// Channel impulse response as `[re, im]` pairs.
    pub fading_taps: Vec<[f64; 2]>,
    pub noise_enabled: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            snr_db: DEFAULT_SNR_DB,
            cfo_hz_normalized: 0.0,
            sro_ppm: 0.0,
            fading_taps: vec![[1.0, 0.0]],
            noise_enabled: true,
        }
    }
}

impl ChannelConfig {
    /// Noise-free identity channel with unit gain (`rho = 1`).
    pub fn identity() -> Self {
        ChannelConfig {
            snr_db: 0.0,
            noise_enabled: false,
            ..Self::default()
        }
    }

    pub fn with_snr_db(snr_db: f64) -> Self {
        ChannelConfig {
            snr_db,
            ..Self::default()
        }
    }

    /// Linear SNR `rho = 10^(snr_db / 10)`.
    pub fn rho(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    pub fn taps(&self) -> Vec<Complex64> {
        self.fading_taps
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.snr_db.is_finite() {
            return Err(AmcError::Config(format!(
                "snr_db must be finite, got {}",
                self.snr_db
            )));
        }
        if self.fading_taps.is_empty() {
            return Err(AmcError::Config("fading_taps must not be empty".into()));
        }
        if self
            .fading_taps
            .iter()
            .flatten()
            .chain([&self.cfo_hz_normalized, &self.sro_ppm])
            .any(|v| !v.is_finite())
        {
            return Err(AmcError::Config("channel parameters must be finite".into()));
        }
        if self.sro_ppm <= -1e6 {
            return Err(AmcError::Config("sro_ppm must exceed -1e6".into()));
        }
        Ok(())
    }
}

/// One frame as an `len x 2` row-major matrix: `[I0, Q0, I1, Q1, ...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct IqFrame {
    samples: Vec<f32>,
}

impl IqFrame {
    pub fn from_interleaved(samples: Vec<f32>) -> Result<Self> {
        if samples.is_empty() || !samples.len().is_multiple_of(2) {
            return Err(AmcError::Shape(format!(
                "interleaved IQ buffer must have positive even length, got {}",
                samples.len()
            )));
        }
        Ok(IqFrame { samples })
    }

    pub fn from_complex(signal: &[Complex64]) -> Self {
        let samples = signal
            .iter()
            .flat_map(|z| [z.re as f32, z.im as f32])
            .collect();
        IqFrame { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.samples
            .chunks_exact(2)
            .map(|iq| Complex64::new(iq[0] as f64, iq[1] as f64))
            .collect()
    }

    /// `sum_k I[k]^2 + Q[k]^2`, accumulated in f64.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|&v| (v as f64) * (v as f64)).sum()
    }
}

/// Maps bits onto the scheme's symbol alphabet (one complex value per symbol).
///
/// QPSK is Gray mapped onto `(±1 ± j)/sqrt(2)`; PAM4 uses Gray-coded levels
/// `{-3, -1, +1, +3}/sqrt(5)`; the FSK schemes use antipodal `±1` frequency
/// symbols.
pub fn map_symbols(bits: &[u8], scheme: &ModulationScheme) -> Result<Vec<Complex64>> {
    scheme.validate()?;
    if bits.is_empty() {
        return Err(AmcError::Input("no bits to modulate".into()));
    }
    let per = scheme.bits_per_symbol();
    if !bits.len().is_multiple_of(per) {
        return Err(AmcError::Input(format!(
            "{} needs a multiple of {per} bits, got {}",
            scheme.name(),
            bits.len()
        )));
    }
    let bit = |b: u8| -> Result<f64> {
        match b {
            0 => Ok(0.0),
            1 => Ok(1.0),
            other => Err(AmcError::Input(format!("bit value {other} is not 0 or 1"))),
        }
    };
    let mut out = Vec::with_capacity(bits.len() / per);
    match scheme {
        ModulationScheme::Cpfsk { .. } | ModulationScheme::Gfsk { .. } => {
            for &b in bits {
                out.push(Complex64::new(2.0 * bit(b)? - 1.0, 0.0));
            }
        }
        ModulationScheme::Qpsk { .. } => {
            let scale = std::f64::consts::FRAC_1_SQRT_2;
            for pair in bits.chunks_exact(2) {
                let re = 1.0 - 2.0 * bit(pair[0])?;
                let im = 1.0 - 2.0 * bit(pair[1])?;
                out.push(Complex64::new(re * scale, im * scale));
            }
        }
        ModulationScheme::Pam4 { .. } => {
            let scale = 1.0 / 5f64.sqrt();
            for pair in bits.chunks_exact(2) {
                let level = match (bit(pair[0])? as u8, bit(pair[1])? as u8) {
                    (0, 0) => -3.0,
                    (0, 1) => -1.0,
                    (1, 1) => 1.0,
                    _ => 3.0,
                };
                out.push(Complex64::new(level * scale, 0.0));
            }
        }
    }
    Ok(out)
}

/// Modulates `bits` to a baseband waveform of `symbols * samples_per_symbol`
/// samples with unit average power.
pub fn modulate(bits: &[u8], scheme: &ModulationScheme) -> Result<Vec<Complex64>> {
    let symbols = map_symbols(bits, scheme)?;
    let sps = scheme.samples_per_symbol();
    let mut signal = match *scheme {
        ModulationScheme::Cpfsk {
            modulation_index, ..
        } => {
            let freq: Vec<f64> = symbols
                .iter()
                .flat_map(|a| std::iter::repeat_n(a.re, sps))
                .collect();
            integrate_phase(&freq, modulation_index, sps)
        }
        ModulationScheme::Gfsk {
            modulation_index,
            gaussian_bt,
            ..
        } => {
            let nrz: Vec<f64> = symbols
                .iter()
                .flat_map(|a| std::iter::repeat_n(a.re, sps))
                .collect();
            let taps = gaussian_taps(gaussian_bt, sps);
            let freq = convolve_same_real(&nrz, &taps);
            integrate_phase(&freq, modulation_index, sps)
        }
        ModulationScheme::Pam4 { .. } | ModulationScheme::Qpsk { .. } => {
            let taps = rrc_taps(PULSE_ROLLOFF, sps, PULSE_SPAN_SYMBOLS);
            shape_symbols(&symbols, &taps, sps)
        }
    };
    if !scheme.is_constant_envelope() {
        let power = signal.iter().map(|z| z.norm_sqr()).sum::<f64>() / signal.len() as f64;
        if power <= 0.0 {
            return Err(AmcError::Degenerate("modulated signal has zero power".into()));
        }
        let gain = 1.0 / power.sqrt();
        signal.iter_mut().for_each(|z| *z *= gain);
    }
    Ok(signal)
}

/// Continuous-phase integration: each sample advances the phase by
/// `pi * h * f[n] / sps`, so a full symbol at `f = ±1` rotates by `±pi h`.
fn integrate_phase(freq: &[f64], modulation_index: f64, sps: usize) -> Vec<Complex64> {
    let step = PI * modulation_index / sps as f64;
    let mut phase = 0.0f64;
    freq.iter()
        .map(|&f| {
            phase += step * f;
            Complex64::from_polar(1.0, phase)
        })
        .collect()
}

/// Gaussian frequency-shaping filter with unit DC gain.
fn gaussian_taps(bt: f64, sps: usize) -> Vec<f64> {
    let sigma = sps as f64 * (2f64.ln()).sqrt() / (2.0 * PI * bt);
    let half = (GAUSSIAN_SPAN_SYMBOLS * sps / 2) as isize;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|n| (-(n as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Root-raised-cosine taps, unit energy, `span * sps + 1` long.
pub fn rrc_taps(rolloff: f64, sps: usize, span: usize) -> Vec<f64> {
    let half = (span * sps / 2) as isize;
    let beta = rolloff;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|n| {
            let t = n as f64 / sps as f64;
            if n == 0 {
                1.0 - beta + 4.0 * beta / PI
            } else if beta > 0.0 && ((4.0 * beta * t).abs() - 1.0).abs() < 1e-12 {
                beta / 2f64.sqrt()
                    * ((1.0 + 2.0 / PI) * (PI / (4.0 * beta)).sin()
                        + (1.0 - 2.0 / PI) * (PI / (4.0 * beta)).cos())
            } else {
                let num = (PI * t * (1.0 - beta)).sin()
                    + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
                let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
                num / den
            }
        })
        .collect();
    let energy: f64 = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|t| *t /= energy);
    taps
}

fn convolve_same_real(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let delay = taps.len() / 2;
    (0..x.len())
        .map(|n| {
            taps.iter()
                .enumerate()
                .filter_map(|(m, &h)| {
                    let idx = (n + delay).checked_sub(m)?;
                    x.get(idx).map(|&v| v * h)
                })
                .sum()
        })
        .collect()
}

fn shape_symbols(symbols: &[Complex64], taps: &[f64], sps: usize) -> Vec<Complex64> {
    let len = symbols.len() * sps;
    let delay = taps.len() / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (k, &sym) in symbols.iter().enumerate() {
        let center = k * sps;
        for (m, &h) in taps.iter().enumerate() {
            let Some(n) = (center + m).checked_sub(delay) else {
                continue;
            };
            if n < len {
                out[n] += sym * h;
            }
        }
    }
    out
}

/// Applies `x[k] = sqrt(rho) (s * h)[k] + n[k]`, with the optional sample-rate
/// offset (linear-interpolation resampling) and carrier offset rotation applied
/// to the transmitted signal. The output has the (possibly resampled) input
/// length; the convolution is causal with zero initial state.
pub fn apply_channel<R: Rng + ?Sized>(
    signal: &[Complex64],
    cfg: &ChannelConfig,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let taps = cfg.taps();
    if signal.len() < taps.len() {
        return Err(AmcError::Input(format!(
            "signal of {} samples is shorter than the {} channel taps",
            signal.len(),
            taps.len()
        )));
    }
    let resampled;
    let source = if cfg.sro_ppm != 0.0 {
        resampled = resample_linear(signal, 1.0 + cfg.sro_ppm * 1e-6);
        &resampled[..]
    } else {
        signal
    };

    let amplitude = cfg.rho().sqrt();
    let mut out: Vec<Complex64> = if taps.len() == 1 {
        source.iter().map(|&s| s * taps[0]).collect()
    } else {
        (0..source.len())
            .map(|k| {
                taps.iter()
                    .enumerate()
                    .take(k + 1)
                    .map(|(m, &h)| h * source[k - m])
                    .sum()
            })
            .collect()
    };
    for (k, z) in out.iter_mut().enumerate() {
        if cfg.cfo_hz_normalized != 0.0 {
            *z *= Complex64::from_polar(1.0, 2.0 * PI * cfg.cfo_hz_normalized * k as f64);
        }
        *z *= amplitude;
    }
    if cfg.noise_enabled {
        let sigma = std::f64::consts::FRAC_1_SQRT_2;
        for z in out.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z += Complex64::new(re * sigma, im * sigma);
        }
    }
    Ok(out)
}

fn resample_linear(signal: &[Complex64], ratio: f64) -> Vec<Complex64> {
    let last = (signal.len() - 1) as f64;
    let count = (last / ratio).floor() as usize + 1;
    (0..count)
        .map(|k| {
            let pos = k as f64 * ratio;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if i + 1 < signal.len() {
                signal[i] * (1.0 - frac) + signal[i + 1] * frac
            } else {
                signal[i]
            }
        })
        .collect()
}

/// Scales the frame by a single positive factor so its energy is one.
pub fn normalize_unit_energy(frame: &IqFrame) -> Result<IqFrame> {
    let energy = frame.energy();
    if energy <= 0.0 || !energy.is_finite() {
        return Err(AmcError::Degenerate(format!(
            "cannot normalize a frame with energy {energy}"
        )));
    }
    let gain = 1.0 / energy.sqrt();
    let samples = frame
        .samples
        .iter()
        .map(|&v| (v as f64 * gain) as f32)
        .collect();
    Ok(IqFrame { samples })
}

/// Per-frame random stream, keyed by `(seed, class, index)` so frames can be
/// generated in any order.
pub fn frame_rng(seed: u64, class: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((class as u64) << 40) | index as u64);
    rng
}

/// Generates one normalized frame of `frame_len` samples.
pub fn synthesize_frame<R: Rng + ?Sized>(
    scheme: &ModulationScheme,
    frame_len: usize,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> Result<IqFrame> {
    let sps = scheme.samples_per_symbol();
    let frame_symbols = frame_len.div_ceil(sps);
    let guard = PULSE_SPAN_SYMBOLS + cfg.fading_taps.len().div_ceil(sps);
    let total_symbols = frame_symbols + 2 * guard + CROP_SLACK_SYMBOLS;
    let bits: Vec<u8> = (0..total_symbols * scheme.bits_per_symbol())
        .map(|_| rng.random::<bool>() as u8)
        .collect();
    let offset = guard + rng.random_range(0..=CROP_SLACK_SYMBOLS);
    let tx = modulate(&bits, scheme)?;
    let rx = apply_channel(&tx, cfg, rng)?;
    let start = offset * sps;
    if start + frame_len > rx.len() {
        return Err(AmcError::Internal(format!(
            "generated {} samples but the crop needs {}",
            rx.len(),
            start + frame_len
        )));
    }
    normalize_unit_energy(&IqFrame::from_complex(&rx[start..start + frame_len]))
}

/// Builds `per_class * schemes.len()` frames; labels follow the order of
/// `schemes`, frames are grouped by class.
pub fn synthesize_dataset(
    per_class: usize,
    frame_len: usize,
    schemes: &[ModulationScheme],
    cfg: &ChannelConfig,
    seed: u64,
) -> Result<LabeledDataset> {
    if per_class == 0 {
        return Err(AmcError::Input("per_class must be at least 1".into()));
    }
    if schemes.is_empty() {
        return Err(AmcError::Input("at least one modulation scheme is required".into()));
    }
    if frame_len == 0 {
        return Err(AmcError::Input("frame_len must be positive".into()));
    }
    if schemes.len() > u8::MAX as usize {
        return Err(AmcError::Input("too many classes".into()));
    }
    cfg.validate()?;
    for scheme in schemes {
        scheme.validate()?;
    }

    let mut frames = Vec::with_capacity(per_class * schemes.len() * frame_len * 2);
    let mut labels = Vec::with_capacity(per_class * schemes.len());
    for (class, scheme) in schemes.iter().enumerate() {
        for index in 0..per_class {
            let mut rng = frame_rng(seed, class, index);
            let frame = synthesize_frame(scheme, frame_len, cfg, &mut rng)?;
            frames.extend_from_slice(frame.samples());
            labels.push(class as u8);
        }
    }
    let class_names = schemes.iter().map(|s| s.name().to_string()).collect();
    LabeledDataset::new(
        frame_len,
        class_names,
        Domain::Time,
        cfg.snr_db,
        seed,
        frames,
        labels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn qpsk_gray_constellation() {
        let syms = map_symbols(&[0, 0, 0, 1, 1, 1, 1, 0], &ModulationScheme::qpsk()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [(s, s), (s, -s), (-s, -s), (-s, s)];
        for (z, (re, im)) in syms.iter().zip(expected) {
            assert_abs_diff_eq!(z.re, re, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, im, epsilon = 1e-15);
            assert_abs_diff_eq!(z.norm(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn pam4_levels_have_unit_average_power() {
        let syms = map_symbols(&[0, 0, 0, 1, 1, 1, 1, 0], &ModulationScheme::pam4()).unwrap();
        let levels: Vec<f64> = syms.iter().map(|z| z.re * 5f64.sqrt()).collect();
        assert_eq!(levels.len(), 4);
        for (got, want) in levels.iter().zip([-3.0, -1.0, 1.0, 3.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        let power = syms.iter().map(|z| z.norm_sqr()).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(power, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fsk_schemes_are_constant_envelope() {
        let mut rng = frame_rng(3, 0, 0);
        let bits: Vec<u8> = (0..64).map(|_| rng.random::<bool>() as u8).collect();
        for scheme in [ModulationScheme::cpfsk(), ModulationScheme::gfsk()] {
            let s = modulate(&bits, &scheme).unwrap();
            assert_eq!(s.len(), 64 * 8);
            let (lo, hi) = s.iter().fold((f64::MAX, f64::MIN), |(lo, hi), z| {
                (lo.min(z.norm()), hi.max(z.norm()))
            });
            assert!(hi - lo < 1e-9, "{scheme}: envelope spread {}", hi - lo);
            assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_schemes_have_unit_average_power() {
        let mut rng = frame_rng(5, 0, 0);
        let bits: Vec<u8> = (0..128).map(|_| rng.random::<bool>() as u8).collect();
        for scheme in [ModulationScheme::pam4(), ModulationScheme::qpsk()] {
            let s = modulate(&bits, &scheme).unwrap();
            let power = s.iter().map(|z| z.norm_sqr()).sum::<f64>() / s.len() as f64;
            assert_abs_diff_eq!(power, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn modulate_rejects_bad_input() {
        assert!(matches!(
            modulate(&[], &ModulationScheme::qpsk()),
            Err(AmcError::Input(_))
        ));
        assert!(matches!(
            modulate(&[1, 0, 1], &ModulationScheme::qpsk()),
            Err(AmcError::Input(_))
        ));
        assert!(matches!(
            "ask8".parse::<ModulationScheme>(),
            Err(AmcError::Config(_))
        ));
        let bad = ModulationScheme::Gfsk {
            samples_per_symbol: 8,
            modulation_index: 0.5,
            gaussian_bt: 1.5,
        };
        assert!(matches!(modulate(&[1, 0], &bad), Err(AmcError::Config(_))));
        let zero_sps = ModulationScheme::Qpsk {
            samples_per_symbol: 0,
        };
        assert!(matches!(modulate(&[1, 0], &zero_sps), Err(AmcError::Config(_))));
    }

    #[test]
    fn rrc_taps_are_symmetric_unit_energy() {
        let taps = rrc_taps(PULSE_ROLLOFF, 8, 8);
        assert_eq!(taps.len(), 65);
        let energy: f64 = taps.iter().map(|t| t * t).sum();
        assert_abs_diff_eq!(energy, 1.0, epsilon = 1e-12);
        for i in 0..taps.len() / 2 {
            assert_abs_diff_eq!(taps[i], taps[taps.len() - 1 - i], epsilon = 1e-15);
        }
    }

    #[test]
    fn identity_channel_is_exact() {
        let mut rng = frame_rng(1, 0, 0);
        let signal: Vec<Complex64> = (0..32)
            .map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.3).cos()))
            .collect();
        let out = apply_channel(&signal, &ChannelConfig::identity(), &mut rng).unwrap();
        assert_eq!(out, signal);
    }

    #[test]
    fn eighteen_db_scales_amplitude_by_sqrt_rho() {
        let cfg = ChannelConfig {
            noise_enabled: false,
            ..ChannelConfig::with_snr_db(18.0)
        };
        assert_abs_diff_eq!(cfg.rho(), 63.0957344480193, epsilon = 1e-9);
        let signal = vec![Complex64::new(1.0, 0.0); 8];
        let out = apply_channel(&signal, &cfg, &mut frame_rng(0, 0, 0)).unwrap();
        for z in out {
            assert_abs_diff_eq!(z.re, 63.0957344480193f64.sqrt(), epsilon = 1e-9);
        }
    }

    #[test]
    fn multipath_taps_convolve_causally() {
        let cfg = ChannelConfig {
            fading_taps: vec![[1.0, 0.0], [0.0, 0.5]],
            ..ChannelConfig::identity()
        };
        let signal: Vec<Complex64> = (1..=4).map(|k| Complex64::new(k as f64, 0.0)).collect();
        let out = apply_channel(&signal, &cfg, &mut frame_rng(0, 0, 0)).unwrap();
        assert_eq!(out[0], Complex64::new(1.0, 0.0));
        assert_eq!(out[1], Complex64::new(2.0, 0.5));
        assert_eq!(out[3], Complex64::new(4.0, 1.5));
    }

    #[test]
    fn cfo_rotates_and_sro_resamples() {
        let cfg = ChannelConfig {
            cfo_hz_normalized: 0.25,
            ..ChannelConfig::identity()
        };
        let signal = vec![Complex64::new(1.0, 0.0); 4];
        let out = apply_channel(&signal, &cfg, &mut frame_rng(0, 0, 0)).unwrap();
        assert_abs_diff_eq!(out[1].im, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[2].re, -1.0, epsilon = 1e-12);

        let ramp: Vec<Complex64> = (0..1001).map(|k| Complex64::new(k as f64, 0.0)).collect();
        let cfg = ChannelConfig {
            sro_ppm: 1000.0,
            ..ChannelConfig::identity()
        };
        let out = apply_channel(&ramp, &cfg, &mut frame_rng(0, 0, 0)).unwrap();
        assert_eq!(out.len(), 1000);
        assert_abs_diff_eq!(out[500].re, 500.5, epsilon = 1e-9);
    }

    #[test]
    fn channel_rejects_bad_configs() {
        let signal = vec![Complex64::new(1.0, 0.0); 4];
        let mut rng = frame_rng(0, 0, 0);
        let neg_inf = ChannelConfig::with_snr_db(f64::NEG_INFINITY);
        assert!(matches!(
            apply_channel(&signal, &neg_inf, &mut rng),
            Err(AmcError::Config(_))
        ));
        let no_taps = ChannelConfig {
            fading_taps: vec![],
            ..ChannelConfig::default()
        };
        assert!(matches!(
            apply_channel(&signal, &no_taps, &mut rng),
            Err(AmcError::Config(_))
        ));
    }

    #[test]
    fn normalization_cases() {
        let frame = IqFrame::from_interleaved(vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(frame.energy(), 4.0);
        let unit = normalize_unit_energy(&frame).unwrap();
        assert_eq!(unit.samples(), &[1.0, 0.0, 0.0, 0.0]);

        let halves = IqFrame::from_interleaved(vec![0.5; 4]).unwrap();
        assert_eq!(normalize_unit_energy(&halves).unwrap(), halves);

        let zero = IqFrame::from_interleaved(vec![0.0; 8]).unwrap();
        assert!(matches!(
            normalize_unit_energy(&zero),
            Err(AmcError::Degenerate(_))
        ));
    }

    #[test]
    fn dataset_shape_and_balance() {
        let ds = synthesize_dataset(
            5,
            DEFAULT_FRAME_LEN,
            &ModulationScheme::all(),
            &ChannelConfig::default(),
            11,
        )
        .unwrap();
        assert_eq!(ds.len(), 20);
        assert_eq!(ds.class_names(), ["CPFSK", "GFSK", "PAM4", "QPSK"]);
        let mut hist = [0usize; 4];
        for &l in ds.labels() {
            hist[l as usize] += 1;
        }
        assert_eq!(hist, [5; 4]);
        for i in 0..ds.len() {
            let e: f64 = ds.frame(i).iter().map(|&v| (v as f64).powi(2)).sum();
            assert_abs_diff_eq!(e, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn dataset_is_reproducible() {
        let cfg = ChannelConfig::identity();
        let a = synthesize_dataset(1, 128, &ModulationScheme::all(), &cfg, 42).unwrap();
        let b = synthesize_dataset(1, 128, &ModulationScheme::all(), &cfg, 42).unwrap();
        let bits = |d: &LabeledDataset| -> Vec<u32> {
            d.frames().iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        let c = synthesize_dataset(1, 128, &ModulationScheme::all(), &cfg, 43).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn frame_substreams_are_order_independent() {
        let cfg = ChannelConfig::default();
        let ds = synthesize_dataset(3, 64, &ModulationScheme::all(), &cfg, 9).unwrap();
        let mut rng = frame_rng(9, 2, 1);
        let alone = synthesize_frame(&ModulationScheme::pam4(), 64, &cfg, &mut rng).unwrap();
        assert_eq!(ds.frame(2 * 3 + 1), alone.samples());
    }

    #[test]
    fn dataset_guards() {
        let cfg = ChannelConfig::default();
        assert!(synthesize_dataset(0, 128, &ModulationScheme::all(), &cfg, 0).is_err());
        assert!(synthesize_dataset(1, 128, &[], &cfg, 0).is_err());
    }
}
