use std::sync::{Arc, OnceLock};

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{EegRecording, FEATURE_HOP, FEATURE_WINDOW};
use crate::dsp::frame_count;
use crate::features::{FeatureKind, FeatureSequence, EEG_CHANNELS, EEG_FEATURES_PER_CHANNEL};
use crate::par::{self, Exec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EegFeature {
    Rms,
    ZeroCrossingRate,
    MovingAverage,
    /// Pearson kurtosis m4/m2², 0 for a constant window.
    Kurtosis,
    /// Shannon entropy (nats) of the normalized periodogram without DC,
    /// 0 for a window with no AC power.
    SpectralEntropy,
}

impl EegFeature {
    pub const ALL: [EegFeature; EEG_FEATURES_PER_CHANNEL] = [
        EegFeature::Rms,
        EegFeature::ZeroCrossingRate,
        EegFeature::MovingAverage,
        EegFeature::Kurtosis,
        EegFeature::SpectralEntropy,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Column of this feature for `channel` in the 155-wide layout.
    pub fn column(self, channel: usize) -> usize {
        EEG_FEATURES_PER_CHANNEL * channel + self.index()
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn zero_crossing_rate(x: &[f64]) -> f64 {
    let flips = x
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count();
    flips as f64 / (x.len() - 1) as f64
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn kurtosis(x: &[f64]) -> f64 {
    if x.iter().all(|&v| v == x[0]) {
        return 0.0;
    }
    let mu = mean(x);
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in x {
        let d2 = (v - mu) * (v - mu);
        m2 += d2;
        m4 += d2 * d2;
    }
    let n = x.len() as f64;
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 == 0.0 {
        0.0
    } else {
        m4 / (m2 * m2)
    }
}

fn spectral_entropy(x: &[f64], fft: &dyn Fft<f64>) -> f64 {
    if x.iter().all(|&v| v == x[0]) {
        return 0.0;
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);
    let power: Vec<f64> = buf[1..=x.len() / 2].iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    // FFT round-off of a (near-)constant window is not spectral content
    if total <= 1e-20 * buf[0].norm_sqr() || total <= 0.0 {
        return 0.0;
    }
    let h = -power
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let q = p / total;
            q * q.ln()
        })
        .sum::<f64>();
    h.max(0.0)
}

/// One statistic over one window (length ≥ 2).
pub fn window_feature(window: &[f64], kind: EegFeature) -> Result<f64> {
    if window.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "feature window needs at least 2 samples, got {}",
            window.len()
        )));
    }
    Ok(match kind {
        EegFeature::Rms => rms(window),
        EegFeature::ZeroCrossingRate => zero_crossing_rate(window),
        EegFeature::MovingAverage => mean(window),
        EegFeature::Kurtosis => kurtosis(window),
        EegFeature::SpectralEntropy => {
            let fft = FftPlanner::new().plan_fft_forward(window.len());
            spectral_entropy(window, fft.as_ref())
        }
    })
}

/// Sliding-window feature extractor with a cached FFT plan.
pub struct FeatureExtractor {
    window: usize,
    hop: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl FeatureExtractor {
    pub fn new(window: usize, hop: usize) -> Result<Self> {
        if window < 2 || hop == 0 {
            return Err(Error::InvalidInput(format!(
                "bad feature window {window}/{hop}"
            )));
        }
        Ok(Self {
            window,
            hop,
            fft: FftPlanner::new().plan_fft_forward(window),
        })
    }

    pub fn standard() -> &'static FeatureExtractor {
        static STANDARD: OnceLock<FeatureExtractor> = OnceLock::new();
        STANDARD.get_or_init(|| {
            FeatureExtractor::new(FEATURE_WINDOW, FEATURE_HOP).expect("standard window")
        })
    }

    fn channel(&self, x: &[f64]) -> Vec<[f64; EEG_FEATURES_PER_CHANNEL]> {
        let frames = frame_count(x.len(), self.window, self.hop);
        (0..frames)
            .map(|t| {
                let w = &x[t * self.hop..t * self.hop + self.window];
                [
                    rms(w),
                    zero_crossing_rate(w),
                    mean(w),
                    kurtosis(w),
                    spectral_entropy(w, self.fft.as_ref()),
                ]
            })
            .collect()
    }

    pub fn extract(&self, x: &EegRecording, exec: Exec) -> Result<FeatureSequence> {
        if x.samples() < self.window {
            return Err(Error::TooShort {
                len: x.samples(),
                window: self.window,
            });
        }
        let per_channel = par::map_range(exec, EEG_CHANNELS, |c| {
            let row = x.data().row(c);
            match row.as_slice() {
                Some(s) => self.channel(s),
                None => self.channel(&row.to_vec()),
            }
        });
        let frames = per_channel[0].len();
        let mut out = Array2::zeros((frames, EEG_CHANNELS * EEG_FEATURES_PER_CHANNEL));
        for (c, feats) in per_channel.iter().enumerate() {
            for (t, f) in feats.iter().enumerate() {
                for (j, v) in f.iter().enumerate() {
                    out[[t, EEG_FEATURES_PER_CHANNEL * c + j]] = *v;
                }
            }
        }
        FeatureSequence::new(FeatureKind::Eeg155, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    #[test]
    fn rms_by_formula() {
        let mut w = vec![0.0; 8];
        w[0] = 3.0;
        w[1] = 4.0;
        let v = window_feature(&w, EegFeature::Rms).unwrap();
        assert!((v - (25.0f64 / 8.0).sqrt()).abs() < 1e-12);
        assert!((v - 1.7678).abs() < 1e-4);
    }

    #[test]
    fn zcr_alternating_and_zero_is_positive() {
        assert_eq!(
            window_feature(&[1.0, -1.0, 1.0, -1.0], EegFeature::ZeroCrossingRate).unwrap(),
            1.0
        );
        assert_eq!(
            window_feature(&[0.0, 1.0, 0.0, 2.0], EegFeature::ZeroCrossingRate).unwrap(),
            0.0
        );
        assert_eq!(
            window_feature(&[-1.0, 0.0], EegFeature::ZeroCrossingRate).unwrap(),
            1.0
        );
    }

    #[test]
    fn constant_window_conventions() {
        let w = vec![2.5; 50];
        assert_eq!(window_feature(&w, EegFeature::MovingAverage).unwrap(), 2.5);
        assert_eq!(window_feature(&w, EegFeature::Kurtosis).unwrap(), 0.0);
        assert_eq!(
            window_feature(&w, EegFeature::SpectralEntropy).unwrap(),
            0.0
        );
        assert_eq!(
            window_feature(&[0.0; 10], EegFeature::SpectralEntropy).unwrap(),
            0.0
        );
    }

    #[test]
    fn degenerate_windows_rejected() {
        assert!(window_feature(&[], EegFeature::Rms).is_err());
        assert!(window_feature(&[1.0], EegFeature::Kurtosis).is_err());
    }

    #[test]
    fn gaussian_kurtosis_is_three() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..1_000_000).map(|_| n.sample(&mut rng)).collect();
        let k = window_feature(&x, EegFeature::Kurtosis).unwrap();
        assert!((k - 3.0).abs() < 0.05, "kurtosis {k}");
    }

    #[test]
    fn entropy_extremes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let n = Normal::new(0.0, 1.0).unwrap();
        let noise: Vec<f64> = (0..1024).map(|_| n.sample(&mut rng)).collect();
        let h = window_feature(&noise, EegFeature::SpectralEntropy).unwrap();
        let max = (512f64).ln();
        assert!(
            h <= max && h >= 0.9 * max,
            "white-noise entropy {h} vs {max}"
        );

        let tone: Vec<f64> = (0..1024)
            .map(|i| (2.0 * PI * 40.0 * i as f64 / 1024.0).sin())
            .collect();
        let h = window_feature(&tone, EegFeature::SpectralEntropy).unwrap();
        assert!(h <= 0.1, "tone entropy {h}");
    }
}
