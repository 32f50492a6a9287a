use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SynthParams;
use crate::dsp::{design_iir, IirFilterSpec, Waveform, SPEECH_RATE_HZ};
use crate::seed;
use crate::Result;

/// Control-track resolution, samples (1 ms).
const CONTROL: usize = 16;
const MAX_HARMONIC_HZ: f64 = 7500.0;
const FORMANT_WIDTH_HZ: [f64; 3] = [90.0, 130.0, 180.0];
const FORMANT_GAIN: [f64; 3] = [1.0, 0.6, 0.35];

#[derive(Debug, Clone, Copy)]
enum Unit {
    Voiced { formants: [f64; 3], level: f64 },
    Fricative { level: f64 },
    Pause,
}

/// Unit sequence of a sentence: (unit, duration in seconds).
fn plan(params: &SynthParams, sentence_seed: u64) -> Vec<(Unit, f64)> {
    let mut rng = seed::rng(sentence_seed);
    let mut units = vec![(Unit::Pause, rng.gen_range(0.08..0.15))];
    let mut total = units[0].1;
    while total < params.duration_s {
        let r: f64 = rng.gen();
        let u = if r < 0.7 {
            let mut formants = [0.0; 3];
            for (f, &(lo, hi)) in formants.iter_mut().zip(&params.formant_ranges_hz) {
                *f = rng.gen_range(lo..=hi);
            }
            (
                Unit::Voiced {
                    formants,
                    level: 10f64.powf(rng.gen_range(-8.0..0.0) / 20.0),
                },
                rng.gen_range(0.10..0.26),
            )
        } else if r < 0.9 {
            (
                Unit::Fricative {
                    level: 10f64.powf(rng.gen_range(-14.0..-6.0) / 20.0),
                },
                rng.gen_range(0.06..0.15),
            )
        } else {
            (Unit::Pause, rng.gen_range(0.05..0.12))
        };
        total += u.1;
        units.push(u);
    }
    units
}

/// Centered moving average over `width` points (edges use the available part).
fn smooth(x: &[f64], width: usize) -> Vec<f64> {
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

struct Tracks {
    voiced: Vec<f64>,
    fricative: Vec<f64>,
    formants: [Vec<f64>; 3],
}

fn tracks(units: &[(Unit, f64)], frames: usize, stretch: f64, formant_jitter: f64) -> Tracks {
    let mut voiced = vec![0.0; frames];
    let mut fricative = vec![0.0; frames];
    let mut formants: [Vec<f64>; 3] = [
        vec![500.0; frames],
        vec![1500.0; frames],
        vec![2700.0; frames],
    ];
    let ms_per_frame = CONTROL as f64 * 1000.0 / SPEECH_RATE_HZ as f64;
    let mut start = 0.0;
    let mut last_formants = [500.0, 1500.0, 2700.0];
    for &(unit, dur) in units {
        let end = start + dur * stretch * 1000.0;
        let lo = (start / ms_per_frame) as usize;
        let hi = ((end / ms_per_frame) as usize).min(frames);
        if let Unit::Voiced { formants: f, .. } = unit {
            last_formants = f.map(|v| v * formant_jitter);
        }
        for t in lo..hi {
            match unit {
                Unit::Voiced { level, .. } => voiced[t] = level,
                Unit::Fricative { level } => fricative[t] = level,
                Unit::Pause => {}
            }
            for j in 0..3 {
                formants[j][t] = last_formants[j];
            }
        }
        start = end;
    }
    Tracks {
        voiced: smooth(&voiced, 15),
        fricative: smooth(&fricative, 15),
        formants: formants.map(|f| smooth(&f, 31)),
    }
}

fn harmonic_gain(f: f64, formants: [f64; 3]) -> f64 {
    let peaks: f64 = (0..3)
        .map(|j| FORMANT_GAIN[j] * (-0.5 * ((f - formants[j]) / FORMANT_WIDTH_HZ[j]).powi(2)).exp())
        .sum();
    (peaks + 0.02) / (1.0 + f / 2000.0)
}

/// Clean speech for one utterance, scaled to `params.speech_rms`.
pub(super) fn render(
    params: &SynthParams,
    sentence_seed: u64,
    utterance_seed: u64,
) -> Result<Waveform> {
    let fs = SPEECH_RATE_HZ as f64;
    let n = (params.duration_s * fs).round() as usize;
    let frames = n.div_ceil(CONTROL);
    let mut rng = seed::rng(utterance_seed);

    let stretch = rng.gen_range(0.95..1.05);
    let formant_jitter = rng.gen_range(0.95..1.05);
    let units = plan(params, sentence_seed);
    let tr = tracks(&units, frames, stretch, formant_jitter);

    let (plo, phi) = params.pitch_range_hz;
    let base = rng.gen_range(plo..=phi);
    let vib_rate = rng.gen_range(0.5..1.2);
    let vib_phase = rng.gen_range(0.0..2.0 * PI);
    let f0: Vec<f64> = (0..frames)
        .map(|t| {
            let sec = (t * CONTROL) as f64 / fs;
            let declination = 1.0 - 0.08 * sec / params.duration_s;
            base * declination * (1.0 + 0.06 * (2.0 * PI * vib_rate * sec + vib_phase).sin())
        })
        .collect();

    let mut out = vec![0.0; n];
    let max_k = (MAX_HARMONIC_HZ / (plo * 0.8)).ceil() as usize;
    let mut gains = vec![0.0; max_k];
    let mut phase = 0.0f64;
    #[allow(clippy::needless_range_loop)]
    for t in 0..frames {
        let v = tr.voiced[t];
        let formants = [tr.formants[0][t], tr.formants[1][t], tr.formants[2][t]];
        let k_max = ((MAX_HARMONIC_HZ / f0[t]) as usize).min(max_k);
        for (k, g) in gains.iter_mut().enumerate().take(k_max) {
            *g = v * harmonic_gain((k + 1) as f64 * f0[t], formants);
        }
        let dphi = 2.0 * PI * f0[t] / fs;
        for s in out.iter_mut().skip(t * CONTROL).take(CONTROL) {
            phase = (phase + dphi) % (2.0 * PI);
            if v > 1e-6 {
                *s = gains[..k_max]
                    .iter()
                    .enumerate()
                    .map(|(k, g)| g * ((k + 1) as f64 * phase).sin())
                    .sum();
            }
        }
    }

    // fricatives: band-limited noise under the fricative envelope
    let band = design_iir(&IirFilterSpec::bandpass(2, 2500.0, 6500.0, SPEECH_RATE_HZ))?;
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let hiss = band.apply_slice(&white);
    for (i, (o, h)) in out.iter_mut().zip(&hiss).enumerate() {
        *o += 0.4 * tr.fricative[i / CONTROL] * h;
    }

    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64)
        .sqrt()
        .max(1e-12);
    let floor = 10f64.powf(params.noise_floor_db / 20.0);
    let mut samples: Vec<f64> = out
        .iter()
        .map(|v| {
            v / rms
                + floor * {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z
                }
        })
        .collect();
    let rms = (samples.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    samples
        .iter_mut()
        .for_each(|v| *v *= params.speech_rms / rms);
    Waveform::new(samples, SPEECH_RATE_HZ)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_preserves_constant() {
        assert_eq!(smooth(&[2.0; 10], 5), vec![2.0; 10]);
        let s = smooth(&[0.0, 0.0, 3.0, 0.0, 0.0], 3);
        assert_eq!(s, vec![0.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn plan_covers_duration() {
        let p = SynthParams::default();
        let units = plan(&p, 5);
        assert!(units.iter().map(|u| u.1).sum::<f64>() >= p.duration_s);
        assert!(units.iter().any(|u| matches!(u.0, Unit::Voiced { .. })));
    }

    #[test]
    fn energy_follows_units() {
        let p = SynthParams::default();
        let x = render(&p, 3, 4).unwrap();
        // leading pause is quiet relative to the utterance
        let head = x.samples()[..800].iter().map(|v| v * v).sum::<f64>() / 800.0;
        assert!(head.sqrt() < 0.05 * p.speech_rms, "{}", head.sqrt());
    }
}
