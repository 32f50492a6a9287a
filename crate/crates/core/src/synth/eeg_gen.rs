use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::noise::pink_noise;
use super::SynthParams;
use crate::dsp::{Waveform, SPEECH_RATE_HZ};
use crate::eeg::{EegRecording, EEG_RATE_HZ};
use crate::features::EEG_CHANNELS;
use crate::seed;
use crate::Result;

/// Speech samples per driver frame (10 ms).
const FRAME: usize = (SPEECH_RATE_HZ / 100) as usize;
const LATENT_TIME_CONSTANT_MS: f64 = 100.0;

/// Frame energy and spectral centroid of `x` per 10 ms, affinely scaled
/// to roughly unit range. The centroid is faded out in quiet frames.
pub fn speech_drivers(x: &Waveform, reference_rms: f64) -> (Vec<f64>, Vec<f64>) {
    let frames = x.len() / FRAME;
    let nfft = 256;
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let mut energy = Vec::with_capacity(frames);
    let mut centroid = Vec::with_capacity(frames);
    for f in 0..frames {
        let frame = &x.samples()[f * FRAME..(f + 1) * FRAME];
        let power = frame.iter().map(|v| v * v).sum::<f64>() / FRAME as f64;
        let db = (10.0 * (power / (reference_rms * reference_rms)).max(1e-12).log10())
            .clamp(-50.0, 10.0);
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (b, &v) in buf.iter_mut().zip(frame) {
            b.re = v;
        }
        fft.process(&mut buf);
        let (mut num, mut den) = (0.0, 0.0);
        for (k, c) in buf.iter().enumerate().take(nfft / 2 + 1) {
            let m = c.norm();
            num += m * k as f64 * SPEECH_RATE_HZ as f64 / nfft as f64;
            den += m;
        }
        let c = if den > 0.0 { num / den } else { 0.0 };
        let weight = ((db + 40.0) / 40.0).clamp(0.0, 1.0);
        energy.push((db + 15.0) / 12.0);
        centroid.push(weight * (c - 2500.0) / 1500.0);
    }
    (energy, centroid)
}

/// 100 Hz frames → 1000 Hz samples, linear between frame centres.
fn upsample(x: &[f64], n: usize) -> Vec<f64> {
    let step = (EEG_RATE_HZ / 100) as f64;
    (0..n)
        .map(|i| {
            let pos = (i as f64 - step / 2.0) / step;
            if pos <= 0.0 {
                return x.first().copied().unwrap_or(0.0);
            }
            let lo = pos.floor() as usize;
            if lo + 1 >= x.len() {
                return x.last().copied().unwrap_or(0.0);
            }
            let frac = pos - lo as f64;
            x[lo] * (1.0 - frac) + x[lo + 1] * frac
        })
        .collect()
}

fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 {
        return x.to_vec();
    }
    let half = width / 2;
    let mut prefix = vec![0.0; x.len() + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Unit-variance AR(1) with the given time constant in samples.
fn ar1<R: Rng>(n: usize, tau: f64, rng: &mut R) -> Vec<f64> {
    let a = (-1.0 / tau).exp();
    let s = (1.0 - a * a).sqrt();
    let mut v: f64 = StandardNormal.sample(rng);
    (0..n)
        .map(|_| {
            v = a * v
                + s * {
                    let z: f64 = StandardNormal.sample(rng);
                    z
                };
            v
        })
        .collect()
}

/// Latent sources at 1000 Hz, `latent_dims` × n.
pub(super) fn latents<R: Rng>(
    params: &SynthParams,
    clean: &Waveform,
    n: usize,
    rng: &mut R,
) -> Array2<f64> {
    let (energy, centroid) = speech_drivers(clean, params.speech_rms);
    let width = (params.smoothing_ms * EEG_RATE_HZ as f64 / 1000.0).round() as usize;
    let e = moving_average(&upsample(&energy, n), width);
    let c = moving_average(&upsample(&centroid, n), width);
    let tau = LATENT_TIME_CONSTANT_MS * EEG_RATE_HZ as f64 / 1000.0;
    let mut out = Array2::zeros((params.latent_dims, n));
    for i in 0..params.latent_dims {
        let noise = ar1(n, tau, rng);
        let mut row = out.row_mut(i);
        if i < params.coupled_latents {
            // sweep from pure energy to pure centroid
            let theta = if params.coupled_latents > 1 {
                std::f64::consts::FRAC_PI_2 * i as f64 / (params.coupled_latents - 1) as f64
            } else {
                0.0
            };
            let (ce, cc) = (theta.cos(), theta.sin());
            for t in 0..n {
                row[t] =
                    params.coupling * (ce * e[t] + cc * c[t]) + (1.0 - params.coupling) * noise[t];
            }
        } else {
            row.assign(&ndarray::Array1::from(noise));
        }
    }
    out
}

pub(super) fn mixing_matrix(params: &SynthParams, subject_seed: u64) -> Array2<f64> {
    let mut rng = seed::rng(subject_seed);
    let scale = 1.0 / (params.latent_dims as f64).sqrt();
    Array2::from_shape_simple_fn((EEG_CHANNELS, params.latent_dims), || {
        scale * {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        }
    })
}

pub(super) fn render(
    params: &SynthParams,
    clean: &Waveform,
    subject_seed: u64,
    utterance_seed: u64,
) -> Result<EegRecording> {
    let n = (params.duration_s * EEG_RATE_HZ as f64).round() as usize;
    let mut rng = seed::rng(seed::derive(utterance_seed, seed::stream::NOISE, 1));
    let z = latents(params, clean, n, &mut rng);
    let mut x = mixing_matrix(params, subject_seed).dot(&z);
    for mut row in x.rows_mut() {
        let pink = pink_noise(n, &mut rng);
        for (v, p) in row.iter_mut().zip(&pink) {
            *v = params.eeg_scale_uv * (*v + params.pink_noise_level * p);
        }
    }
    EegRecording::new(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::synth_utterance_for;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn energy_latent_tracks_speech_energy() {
        let p = SynthParams::default();
        let u = synth_utterance_for(&p, 1, 3, 77).unwrap();
        let mut rng = seed::rng(1);
        let z = latents(&p, &u.clean, 2000, &mut rng);
        // latent 0 averaged per 10 ms frame vs frame energy in dB
        let lat: Vec<f64> = (0..200)
            .map(|f| z.row(0).iter().skip(f * 10).take(10).sum::<f64>() / 10.0)
            .collect();
        let (energy, _) = speech_drivers(&u.clean, p.speech_rms);
        let r = corr(&lat, &energy);
        assert!(r > 0.5, "{r}");
    }

    #[test]
    fn upsample_holds_edges() {
        let y = upsample(&[1.0, 3.0], 20);
        assert_eq!(y[0], 1.0);
        assert_eq!(y[19], 3.0);
        assert!((y[10] - 2.0).abs() < 1e-12);
    }
}
