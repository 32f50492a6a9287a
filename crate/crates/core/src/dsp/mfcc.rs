//! 13-coefficient MFCC at 100 frames/s and its approximate inverse.
//!
//! Analysis: Hann STFT (400/160/512) → power → 26 HTK triangular mel
//! filters over 0-8 kHz → log with a 1e-10 floor → orthonormal DCT-II,
//! keeping c0..c12. Inversion zero-pads back to 26 bands, applies the
//! orthonormal inverse DCT, exponentiates and maps mel energies to linear
//! bins through the filterbank pseudo-inverse, clamping negatives to 0.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1};

use super::stft::{StftEngine, StftParams};
use super::{Spectrogram, Waveform};
use crate::features::{FeatureKind, FeatureSequence, MFCC_WIDTH};
use crate::{Error, Result};

pub const SPEECH_RATE_HZ: u32 = 16_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub sample_rate_hz: u32,
    pub stft: StftParams,
    pub n_mels: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: SPEECH_RATE_HZ,
            stft: StftParams::default(),
            n_mels: 26,
            fmin_hz: 0.0,
            fmax_hz: 8000.0,
            log_floor: 1e-10,
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// n_mels × bins
    weights: Array2<f64>,
    /// bins × n_mels, Moore-Penrose pseudo-inverse of `weights`
    pinv: Array2<f64>,
}

impl MelFilterbank {
    pub fn htk(
        n_mels: usize,
        fft_size: usize,
        sample_rate_hz: u32,
        fmin: f64,
        fmax: f64,
    ) -> Result<Self> {
        let bins = fft_size / 2 + 1;
        let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let mut weights = Array2::zeros((n_mels, bins));
        for m in 0..n_mels {
            let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..bins {
                let f = k as f64 * sample_rate_hz as f64 / fft_size as f64;
                let w = if f > l && f <= c {
                    (f - l) / (c - l)
                } else if f > c && f < r {
                    (r - f) / (r - c)
                } else {
                    0.0
                };
                weights[[m, k]] = w;
            }
            if weights.row(m).sum() == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "mel filter {m} covers no FFT bin; use fewer filters or a larger FFT"
                )));
            }
        }
        // full row rank, so pinv = Wᵀ (W Wᵀ)⁻¹
        let w = DMatrix::from_row_iterator(n_mels, bins, weights.iter().copied());
        let gram_inv = (&w * w.transpose())
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("mel filterbank is rank deficient".into()))?;
        let p = w.transpose() * gram_inv;
        let pinv = Array2::from_shape_fn((bins, n_mels), |(i, j)| p[(i, j)]);
        Ok(Self { weights, pinv })
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn n_mels(&self) -> usize {
        self.weights.nrows()
    }

    pub fn apply(&self, power: ArrayView1<f64>) -> Array1<f64> {
        self.weights.dot(&power)
    }

    /// Linear-bin power from mel energies, negatives clamped to zero.
    pub fn invert(&self, mel: ArrayView1<f64>) -> Array1<f64> {
        self.pinv.dot(&mel).mapv(|v| v.max(0.0))
    }
}

/// Orthonormal DCT-II rows 0..n_coeffs over `n` inputs.
fn dct_matrix(n_coeffs: usize, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n_coeffs, n), |(k, i)| {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos()
    })
}

pub struct MfccAnalyzer {
    config: MfccConfig,
    filterbank: MelFilterbank,
    /// MFCC_WIDTH × n_mels; the full orthonormal basis is square so the
    /// transpose of the kept rows is the zero-padded inverse.
    dct: Array2<f64>,
    engine: StftEngine,
}

impl MfccAnalyzer {
    pub fn new(config: MfccConfig) -> Result<Self> {
        if config.n_mels < MFCC_WIDTH {
            return Err(Error::InvalidInput(format!(
                "need at least {MFCC_WIDTH} mel bands, got {}",
                config.n_mels
            )));
        }
        let filterbank = MelFilterbank::htk(
            config.n_mels,
            config.stft.fft_size,
            config.sample_rate_hz,
            config.fmin_hz,
            config.fmax_hz,
        )?;
        Ok(Self {
            dct: dct_matrix(MFCC_WIDTH, config.n_mels),
            engine: StftEngine::new(config.stft)?,
            filterbank,
            config,
        })
    }

    /// Shared analyzer with the default configuration.
    pub fn standard() -> &'static MfccAnalyzer {
        static STANDARD: OnceLock<MfccAnalyzer> = OnceLock::new();
        STANDARD
            .get_or_init(|| MfccAnalyzer::new(MfccConfig::default()).expect("default MFCC config"))
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    pub fn analyze(&self, x: &Waveform) -> Result<FeatureSequence> {
        if x.sample_rate_hz() != self.config.sample_rate_hz {
            return Err(Error::SampleRate {
                expected: self.config.sample_rate_hz,
                got: x.sample_rate_hz(),
            });
        }
        let p = self.config.stft;
        if x.len() < p.window {
            return Err(Error::TooShort {
                len: x.len(),
                window: p.window,
            });
        }
        let spec = self.engine.analyze(x.samples());
        let power = spec.mapv(|c| c.norm_sqr());
        let mut out = Array2::zeros((spec.nrows(), MFCC_WIDTH));
        for (t, row) in power.rows().into_iter().enumerate() {
            let log_mel = self
                .filterbank
                .apply(row)
                .mapv(|e| e.max(self.config.log_floor).ln());
            out.row_mut(t).assign(&self.dct.dot(&log_mel));
        }
        FeatureSequence::new(FeatureKind::Mfcc13, out)
    }

    /// Mel-band energies implied by a cepstral frame (zero-padded inverse DCT, then exp).
    pub fn mel_energies(&self, coeffs: ArrayView1<f64>) -> Array1<f64> {
        self.dct.t().dot(&coeffs).mapv(f64::exp)
    }

    pub fn invert(&self, m: &FeatureSequence) -> Result<Spectrogram> {
        if m.kind() != FeatureKind::Mfcc13 {
            return Err(Error::InvalidInput(format!(
                "expected mfcc13 features, got {}",
                m.kind().as_str()
            )));
        }
        let p = self.config.stft;
        let mut mags = Array2::zeros((m.len(), p.bins()));
        for (t, row) in m.frames().rows().into_iter().enumerate() {
            let mel = self.mel_energies(row);
            mags.row_mut(t)
                .assign(&self.filterbank.invert(mel.view()).mapv(f64::sqrt));
        }
        Spectrogram::new(mags, p, self.config.sample_rate_hz)
    }
}

/// MFCC of 16 kHz speech with the standard analyzer.
pub fn mfcc(x: &Waveform) -> Result<FeatureSequence> {
    MfccAnalyzer::standard().analyze(x)
}

/// Magnitude spectrogram reconstructed from MFCC with the standard analyzer.
pub fn mfcc_invert(m: &FeatureSequence) -> Result<Spectrogram> {
    MfccAnalyzer::standard().invert(m)
}
