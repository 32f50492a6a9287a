use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::{design_iir, IirFilterSpec, Waveform};
use crate::features::FeatureSequence;
use crate::seed;
use crate::{Error, Result};

/// Nominal background level of the recorded test condition, dB SPL.
pub const REFERENCE_LEVEL_DB: f64 = 65.0;
/// Noise-to-speech ratio (dB) produced at [`REFERENCE_LEVEL_DB`]: a −5 dB SNR mixture.
pub const BACKGROUND_CALIBRATION_DB: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Slowly changing chords of harmonic tones over band-limited noise.
    MusicLike,
    White,
}

/// Unit-variance 1/f noise by spectral shaping of white noise.
pub fn pink_noise<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    if n < 2 {
        return vec![0.0; n];
    }
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(StandardNormal.sample(rng), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    for (k, b) in buf.iter_mut().enumerate().skip(1) {
        *b /= (k.min(n - k) as f64).sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let std = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    x.iter().map(|v| (v - mean) / std.max(1e-300)).collect()
}

fn music_like<R: Rng>(n: usize, fs: u32, rng: &mut R) -> Result<Vec<f64>> {
    let fs_f = fs as f64;
    let mut out = vec![0.0; n];
    for _voice in 0..4 {
        let mut start = 0usize;
        while start < n {
            let dur = (rng.gen_range(0.15..0.5) * fs_f) as usize;
            let end = (start + dur).min(n);
            let midi: f64 = rng.gen_range(48.0..84.0f64).round();
            let f0 = 440.0 * 2f64.powf((midi - 69.0) / 12.0);
            let level = rng.gen_range(0.3..1.0);
            let vib = rng.gen_range(4.0..6.0);
            let phase0 = rng.gen_range(0.0..2.0 * PI);
            let attack = 0.02 * fs_f;
            for (i, o) in out[start..end].iter_mut().enumerate() {
                let t = i as f64 / fs_f;
                let env = (i as f64 / attack).min(1.0) * (-2.5 * t).exp();
                let ph = 2.0 * PI * f0 * t + 0.002 * f0 * (2.0 * PI * vib * t).sin() + phase0;
                let tone: f64 = (1..=6).map(|k| (k as f64 * ph).sin() / k as f64).sum();
                *o += level * env * tone;
            }
            start = end;
        }
    }
    let band = design_iir(&IirFilterSpec::bandpass(2, 200.0, 3000.0, fs))?;
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let hiss = band.apply_slice(&white);
    let rms = |v: &[f64]| {
        (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64)
            .sqrt()
            .max(1e-300)
    };
    let (rt, rh) = (rms(&out), rms(&hiss));
    // filtered noise 12 dB under the tones
    Ok(out
        .iter()
        .zip(&hiss)
        .map(|(t, h)| t / rt + 0.25 * h / rh)
        .collect())
}

/// Adds background noise whose level relative to `clean` is
/// `level_db − REFERENCE_LEVEL_DB + BACKGROUND_CALIBRATION_DB` dB.
pub fn mix_background(
    clean: &Waveform,
    kind: NoiseKind,
    level_db: f64,
    seed: u64,
) -> Result<Waveform> {
    if !level_db.is_finite() {
        return Err(Error::InvalidInput(format!(
            "background level {level_db} dB is not finite"
        )));
    }
    let rms = clean.rms();
    if rms == 0.0 {
        return Err(Error::Degenerate("clean signal has zero energy".into()));
    }
    let mut rng = seed::rng(seed);
    let n = clean.len();
    let noise = match kind {
        NoiseKind::White => (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
        NoiseKind::MusicLike => music_like(n, clean.sample_rate_hz(), &mut rng)?,
    };
    let noise_rms = (noise.iter().map(|v: &f64| v * v).sum::<f64>() / n as f64).sqrt();
    let ratio_db = level_db - REFERENCE_LEVEL_DB + BACKGROUND_CALIBRATION_DB;
    let gain = rms * 10f64.powf(ratio_db / 20.0) / noise_rms.max(1e-300);
    let mixed = clean
        .samples()
        .iter()
        .zip(&noise)
        .map(|(c, v)| c + gain * v)
        .collect();
    Waveform::new(mixed, clean.sample_rate_hz())
}

/// Adds iid N(0, sigma²) to every element.
pub fn corrupt_mfcc(m: &FeatureSequence, sigma: f64, seed: u64) -> Result<FeatureSequence> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "noise sigma {sigma} must be finite and ≥ 0"
        )));
    }
    if sigma == 0.0 {
        return Ok(m.clone());
    }
    let mut rng = seed::rng(seed);
    let noise: Array2<f64> = Array2::from_shape_simple_fn(m.frames().raw_dim(), || {
        sigma * {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        }
    });
    FeatureSequence::new(m.kind(), &m.frames() + &noise)
}
