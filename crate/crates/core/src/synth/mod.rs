//! Seeded synthetic stand-in for paired speech/EEG recordings.
//!
//! Speech is a formant-shaped harmonic source with voiced, fricative and
//! pause units. EEG is a subject-specific mixture of latent sources, some
//! of which follow the speech's frame energy and spectral centroid, plus
//! per-channel pink noise. Test utterances are additionally mixed with a
//! background track.

mod corpus;
mod eeg_gen;
mod noise;
mod speech;

pub use corpus::{
    build_corpus, CorpusLayout, CorpusManifest, Split, UtteranceRecord, MANIFEST_FILE,
};
pub use eeg_gen::speech_drivers;
pub use noise::{
    corrupt_mfcc, mix_background, pink_noise, NoiseKind, BACKGROUND_CALIBRATION_DB,
    REFERENCE_LEVEL_DB,
};

use serde::{Deserialize, Serialize};

use crate::dsp::Waveform;
use crate::eeg::EegRecording;
use crate::seed::{self, stream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub duration_s: f64,
    pub pitch_range_hz: (f64, f64),
    /// Ranges of the first three formant targets.
    pub formant_ranges_hz: [(f64, f64); 3],
    /// Utterance RMS in full-scale units.
    pub speech_rms: f64,
    /// Broadband floor under the speech, dB relative to `speech_rms`.
    pub noise_floor_db: f64,
    pub latent_dims: usize,
    pub coupled_latents: usize,
    /// Weight of the speech drive in a coupled latent (the rest is independent noise).
    pub coupling: f64,
    pub smoothing_ms: f64,
    /// Per-channel pink noise std relative to the latent mixture.
    pub pink_noise_level: f64,
    /// Overall EEG amplitude, microvolts.
    pub eeg_scale_uv: f64,
    pub background_kind: NoiseKind,
    /// Background level, nominal dB SPL (see [`mix_background`]).
    pub background_level_db: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            duration_s: 2.0,
            pitch_range_hz: (85.0, 130.0),
            formant_ranges_hz: [(300.0, 800.0), (900.0, 2300.0), (2400.0, 3200.0)],
            speech_rms: 0.05,
            noise_floor_db: -60.0,
            latent_dims: 16,
            coupled_latents: 8,
            coupling: 0.7,
            smoothing_ms: 50.0,
            pink_noise_level: 0.5,
            eeg_scale_uv: 10.0,
            background_kind: NoiseKind::MusicLike,
            background_level_db: REFERENCE_LEVEL_DB,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.duration_s,
            self.pitch_range_hz.0,
            self.pitch_range_hz.1,
            self.speech_rms,
            self.noise_floor_db,
            self.coupling,
            self.smoothing_ms,
            self.pink_noise_level,
            self.eeg_scale_uv,
            self.background_level_db,
        ]
        .iter()
        .chain(self.formant_ranges_hz.iter().flat_map(|(a, b)| [a, b]))
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput(
                "synthesis parameters must be finite".into(),
            ));
        }
        if self.duration_s < 1.0 {
            return Err(Error::InvalidInput(format!(
                "duration {} s is below 1 s",
                self.duration_s
            )));
        }
        let (lo, hi) = self.pitch_range_hz;
        if !(lo > 0.0 && lo <= hi && hi < 1000.0) {
            return Err(Error::InvalidInput(format!(
                "bad pitch range {lo}..{hi} Hz"
            )));
        }
        if self
            .formant_ranges_hz
            .iter()
            .any(|&(a, b)| !(a > 0.0 && a <= b && b < 7000.0))
        {
            return Err(Error::InvalidInput("bad formant ranges".into()));
        }
        if self.latent_dims == 0 || self.coupled_latents > self.latent_dims {
            return Err(Error::InvalidInput(
                "need 1 ≤ latent dims and coupled ≤ latent dims".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return Err(Error::InvalidInput("coupling must be in [0, 1]".into()));
        }
        if self.speech_rms <= 0.0
            || self.smoothing_ms < 0.0
            || self.pink_noise_level < 0.0
            || self.eeg_scale_uv <= 0.0
        {
            return Err(Error::InvalidInput("levels must be positive".into()));
        }
        Ok(())
    }
}

/// Clean speech and simultaneous EEG for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthUtterance {
    pub clean: Waveform,
    pub eeg: EegRecording,
}

/// Subject 0 speaking the sentence derived from `seed`.
pub fn synth_utterance(params: &SynthParams, seed: u64) -> Result<SynthUtterance> {
    synth_utterance_for(params, 0, (seed % 1000) as u32, seed)
}

/// `subject` fixes the EEG mixing, `sentence` the unit sequence and
/// `utterance_seed` everything that varies between repetitions.
pub fn synth_utterance_for(
    params: &SynthParams,
    subject: u32,
    sentence: u32,
    utterance_seed: u64,
) -> Result<SynthUtterance> {
    params.validate()?;
    let sentence_seed = seed::derive(params.seed, stream::SENTENCE, sentence as u64);
    let subject_seed = seed::derive(params.seed, stream::SUBJECT, subject as u64);
    let clean = speech::render(params, sentence_seed, utterance_seed)?;
    let eeg = eeg_gen::render(params, &clean, subject_seed, utterance_seed)?;
    Ok(SynthUtterance { clean, eeg })
}
