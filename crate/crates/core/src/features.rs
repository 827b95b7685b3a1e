//! Frequency-domain features: the unnormalized DFT of a frame,
//! `X[p] = sum_k x[k] exp(-j 2 pi p k / len)`, stored as `len x 2` (re, im).
//!
//! Power-of-two lengths use an in-place radix-2 transform; other lengths fall
//! back to direct summation. Accumulation is in f64.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dataset::{Domain, LabeledDataset};
use crate::error::{AmcError, Result};
use crate::sigsynth::IqFrame;

/// DFT bins as an `len x 2` row-major matrix: `[Re X0, Im X0, Re X1, ...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FreqFrame {
    bins: Vec<f32>,
}

impl FreqFrame {
    pub fn from_interleaved(bins: Vec<f32>) -> Result<Self> {
        if bins.is_empty() || !bins.len().is_multiple_of(2) {
            return Err(AmcError::Shape(format!(
                "interleaved bin buffer must have positive even length, got {}",
                bins.len()
            )));
        }
        Ok(FreqFrame { bins })
    }

    pub fn len(&self) -> usize {
        self.bins.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bins(&self) -> &[f32] {
        &self.bins
    }

    pub fn into_bins(self) -> Vec<f32> {
        self.bins
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.bins
            .chunks_exact(2)
            .map(|b| Complex64::new(b[0] as f64, b[1] as f64))
            .collect()
    }
}

pub fn dft(frame: &IqFrame) -> FreqFrame {
    FreqFrame {
        bins: dft_interleaved(frame.samples()),
    }
}

/// DFT of an interleaved `[I, Q, ...]` buffer, returned interleaved.
pub fn dft_interleaved(samples: &[f32]) -> Vec<f32> {
    let mut buf: Vec<Complex64> = samples
        .chunks_exact(2)
        .map(|iq| Complex64::new(iq[0] as f64, iq[1] as f64))
        .collect();
    dft_in_place(&mut buf);
    buf.iter().flat_map(|z| [z.re as f32, z.im as f32]).collect()
}

pub fn dft_complex(signal: &[Complex64]) -> Vec<Complex64> {
    let mut buf = signal.to_vec();
    dft_in_place(&mut buf);
    buf
}

fn dft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        radix2(buf);
    } else {
        let out: Vec<Complex64> = (0..n)
            .map(|p| {
                buf.iter()
                    .enumerate()
                    .map(|(k, &x)| x * twiddle((p * k) % n, n))
                    .sum()
            })
            .collect();
        buf.copy_from_slice(&out);
    }
}

/// `exp(-j 2 pi k / n)`
fn twiddle(k: usize, n: usize) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64)
}

fn radix2(buf: &mut [Complex64]) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            buf.swap(i, j);
        }
    }
    let table: Vec<Complex64> = (0..n / 2).map(|k| twiddle(k, n)).collect();
    let mut size = 2;
    while size <= n {
        let half = size / 2;
        let stride = n / size;
        for start in (0..n).step_by(size) {
            for k in 0..half {
                let w = table[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        size *= 2;
    }
}

/// Replaces every frame by its DFT and tags the result as frequency domain.
pub fn transform_dataset(ds: &LabeledDataset) -> Result<LabeledDataset> {
    if ds.domain() != Domain::Time {
        return Err(AmcError::Domain(
            "dataset is already in the frequency domain".into(),
        ));
    }
    let mut frames = Vec::with_capacity(ds.frames().len());
    for i in 0..ds.len() {
        frames.extend(dft_interleaved(ds.frame(i)));
    }
    ds.with_frames(frames, Domain::Freq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Direct O(n^2) evaluation of the transform sum.
    fn naive(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|p| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, &v) in x.iter().enumerate() {
                    let ang = -2.0 * PI * (p as f64) * (k as f64) / n as f64;
                    acc += v * Complex64::new(ang.cos(), ang.sin());
                }
                acc
            })
            .collect()
    }

    fn inverse(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (p, &v) in x.iter().enumerate() {
                    let ang = 2.0 * PI * (p as f64) * (k as f64) / n as f64;
                    acc += v * Complex64::new(ang.cos(), ang.sin());
                }
                acc / n as f64
            })
            .collect()
    }

    #[test]
    fn constant_goes_to_dc() {
        let x = IqFrame::from_interleaved(vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(dft(&x).bins(), &[4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn impulse_is_flat() {
        let mut samples = vec![0.0f32; 16];
        samples[0] = 1.0;
        let bins = dft(&IqFrame::from_interleaved(samples).unwrap()).to_complex();
        for b in bins {
            assert_eq!(b, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn non_power_of_two_matches_naive() {
        let x: Vec<Complex64> = (0..12)
            .map(|k| Complex64::new((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos()))
            .collect();
        for (a, b) in dft_complex(&x).iter().zip(naive(&x)) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-12);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn transform_dataset_preserves_labels_and_inverts() {
        let ds = crate::sigsynth::synthesize_dataset(
            3,
            128,
            &crate::sigsynth::ModulationScheme::all(),
            &crate::sigsynth::ChannelConfig::default(),
            5,
        )
        .unwrap();
        let freq = transform_dataset(&ds).unwrap();
        assert_eq!(freq.domain(), Domain::Freq);
        assert_eq!(freq.labels(), ds.labels());
        assert_eq!(freq.len(), ds.len());
        for i in 0..ds.len() {
            let bins = FreqFrame::from_interleaved(freq.frame(i).to_vec()).unwrap();
            let back = inverse(&bins.to_complex());
            let orig = IqFrame::from_interleaved(ds.frame(i).to_vec()).unwrap().to_complex();
            for (a, b) in back.iter().zip(orig) {
                assert!((a - b).norm() < 1e-4);
            }
        }
        assert!(matches!(transform_dataset(&freq), Err(AmcError::Domain(_))));
    }

    #[test]
    fn empty_dataset_transforms_to_empty() {
        let ds = LabeledDataset::new(128, vec!["A".into()], Domain::Time, 18.0, 0, vec![], vec![])
            .unwrap();
        let out = transform_dataset(&ds).unwrap();
        assert!(out.is_empty());
        assert_eq!(out.domain(), Domain::Freq);
    }

    fn frame_strategy(len: usize) -> impl Strategy<Value = Vec<f32>> {
        proptest::collection::vec(-1.0f32..1.0, len * 2)
    }

    proptest! {
        #[test]
        fn parseval(samples in frame_strategy(128)) {
            let x = IqFrame::from_interleaved(samples).unwrap();
            let xf = dft(&x);
            let lhs: f64 = xf.to_complex().iter().map(|z| z.norm_sqr()).sum();
            let rhs = 128.0 * x.energy();
            prop_assert!((lhs - rhs).abs() <= 1e-4 * rhs.max(1e-12));
        }

        #[test]
        fn linearity(
            a in -2.0f64..2.0, b in -2.0f64..2.0,
            x in frame_strategy(64), y in frame_strategy(64),
        ) {
            let to_c = |v: &[f32]| IqFrame::from_interleaved(v.to_vec()).unwrap().to_complex();
            let (xc, yc) = (to_c(&x), to_c(&y));
            let mix: Vec<Complex64> = xc.iter().zip(&yc).map(|(&u, &v)| u * a + v * b).collect();
            let lhs = dft_complex(&mix);
            let (fx, fy) = (dft_complex(&xc), dft_complex(&yc));
            for p in 0..lhs.len() {
                prop_assert!((lhs[p] - (fx[p] * a + fy[p] * b)).norm() < 1e-5);
            }
        }

        #[test]
        fn repeat_calls_are_identical(x in frame_strategy(32)) {
            prop_assert_eq!(dft_interleaved(&x), dft_interleaved(&x));
        }
    }
}
