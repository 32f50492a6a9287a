use ndarray::{s, Array2};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dsp::{resample, Waveform};
use crate::{Error, Result};

const FS: u32 = 10_000;
const FRAME: usize = 256;
const HOP: usize = 128;
const NFFT: usize = 512;
const BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
/// Frames per short-time segment.
pub const SEGMENT_FRAMES: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// Symmetric Hann without its zero end points: hanning(n + 2)[1..n+1].
fn hann_inner(n: usize) -> Vec<f64> {
    let m = (n + 1) as f64;
    (1..=n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / m).cos())
        .collect()
}

/// One-third octave band matrix (BANDS × NFFT/2+1), edges snapped to bins.
fn third_octave_bands() -> Array2<f64> {
    let bins = NFFT / 2 + 1;
    let freqs: Vec<f64> = (0..bins)
        .map(|i| i as f64 * FS as f64 / NFFT as f64)
        .collect();
    let nearest = |f: f64| {
        freqs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - f).abs().total_cmp(&(b.1 - f).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    let mut obm = Array2::zeros((BANDS, bins));
    for k in 0..BANDS {
        let kf = k as f64;
        let lo = nearest(MIN_FREQ * 2f64.powf((2.0 * kf - 1.0) / 6.0));
        let hi = nearest(MIN_FREQ * 2f64.powf((2.0 * kf + 1.0) / 6.0));
        obm.slice_mut(s![k, lo..hi]).fill(1.0);
    }
    obm
}

fn frame_starts(len: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(FRAME)).step_by(HOP)
}

/// Drops frames of `x` more than DYN_RANGE_DB below its loudest frame
/// (and the same frames of `y`), then overlap-adds what is left.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = hann_inner(FRAME);
    let frames = |sig: &[f64]| -> Vec<Vec<f64>> {
        frame_starts(sig.len())
            .map(|i| {
                sig[i..i + FRAME]
                    .iter()
                    .zip(&w)
                    .map(|(a, b)| a * b)
                    .collect()
            })
            .collect()
    };
    let xf = frames(x);
    let yf = frames(y);
    let energy: Vec<f64> = xf
        .iter()
        .map(|f| 20.0 * (f.iter().map(|v| v * v).sum::<f64>().sqrt() + EPS).log10())
        .collect();
    let max = energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let keep: Vec<usize> = (0..xf.len())
        .filter(|&i| max - DYN_RANGE_DB - energy[i] < 0.0)
        .collect();
    let ola = |fr: &[Vec<f64>]| {
        if keep.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0.0; (keep.len() - 1) * HOP + FRAME];
        for (j, &i) in keep.iter().enumerate() {
            for (o, v) in out[j * HOP..j * HOP + FRAME].iter_mut().zip(&fr[i]) {
                *o += v;
            }
        }
        out
    };
    (ola(&xf), ola(&yf))
}

/// Band envelopes, BANDS × frames.
fn band_envelopes(x: &[f64], obm: &Array2<f64>) -> Array2<f64> {
    let w = hann_inner(FRAME);
    let fft = FftPlanner::new().plan_fft_forward(NFFT);
    let starts: Vec<usize> = frame_starts(x.len()).collect();
    let mut power = Array2::zeros((NFFT / 2 + 1, starts.len()));
    let mut buf = vec![Complex64::new(0.0, 0.0); NFFT];
    for (t, &i) in starts.iter().enumerate() {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (n, (&v, &wv)) in x[i..i + FRAME].iter().zip(&w).enumerate() {
            buf[n].re = v * wv;
        }
        fft.process(&mut buf);
        for k in 0..=NFFT / 2 {
            power[(k, t)] = buf[k].norm_sqr();
        }
    }
    obm.dot(&power).mapv(f64::sqrt)
}

fn center_and_normalize(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|a| *a -= mean);
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt() + EPS;
    v.iter_mut().for_each(|a| *a /= norm);
}

/// Short-time objective intelligibility of `degraded` against `clean`.
///
/// Both are resampled to 10 kHz and trimmed to the shorter length.
/// Every 30-frame window of the third-octave envelopes contributes one
/// correlation per band; the result is their mean.
pub fn stoi(clean: &Waveform, degraded: &Waveform) -> Result<f64> {
    if clean.sample_rate_hz() != degraded.sample_rate_hz() {
        return Err(Error::SampleRate {
            expected: clean.sample_rate_hz(),
            got: degraded.sample_rate_hz(),
        });
    }
    let n = clean.len().min(degraded.len());
    let x = resample(&clean.truncated(n), FS)?;
    let y = resample(&degraded.truncated(n), FS)?;
    let (x, y) = remove_silent_frames(x.samples(), y.samples());
    let obm = third_octave_bands();
    let xt = band_envelopes(&x, &obm);
    let yt = band_envelopes(&y, &obm);
    let frames = xt.ncols();
    if frames < SEGMENT_FRAMES {
        return Err(Error::TooShort {
            len: frames,
            window: SEGMENT_FRAMES,
        });
    }
    let clip = 10f64.powf(-BETA_DB / 20.0);
    let segments = frames - SEGMENT_FRAMES + 1;
    let mut total = 0.0;
    for m in 0..segments {
        for j in 0..BANDS {
            let mut xs: Vec<f64> = xt.slice(s![j, m..m + SEGMENT_FRAMES]).to_vec();
            let ys = yt.slice(s![j, m..m + SEGMENT_FRAMES]);
            let xn = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let yn = ys.iter().map(|v| v * v).sum::<f64>().sqrt();
            let alpha = xn / (yn + EPS);
            let mut yp: Vec<f64> = ys
                .iter()
                .zip(&xs)
                .map(|(&yv, &xv)| (yv * alpha).min(xv * (1.0 + clip)))
                .collect();
            center_and_normalize(&mut yp);
            center_and_normalize(&mut xs);
            total += yp.iter().zip(&xs).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok(total / (segments * BANDS) as f64)
}
