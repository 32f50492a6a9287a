//! Audio-rate signal processing: IIR filtering, STFT, MFCC analysis and
//! MFCC → waveform inversion through Griffin-Lim.

mod filter;
mod griffin_lim;
mod mfcc;
mod resample;
mod stft;

pub use filter::{design_iir, filter_apply, Biquad, FilterKind, IirFilterSpec, SosFilter};
pub use griffin_lim::{griffin_lim, griffin_lim_traced, DEFAULT_GRIFFIN_LIM_ITERATIONS};
pub use mfcc::{mfcc, mfcc_invert, MelFilterbank, MfccAnalyzer, MfccConfig, SPEECH_RATE_HZ};
pub use resample::resample;
pub use stft::{
    frame_count, hann_periodic, istft, spectral_convergence_of, stft, stft_complex, Spectrogram,
    StftParams,
};

use crate::{Error, Result};

/// Mono audio, nominal range [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("waveform samples".into()));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn zeros(len: usize, sample_rate_hz: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate_hz: sample_rate_hz.max(1),
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v * gain).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self {
            samples: self.samples[..len.min(self.samples.len())].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}
