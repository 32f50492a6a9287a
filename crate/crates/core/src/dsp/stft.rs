use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Waveform;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftParams {
    pub window: usize,
    pub hop: usize,
    pub fft_size: usize,
}

impl Default for StftParams {
    /// 25 ms Hann window, 10 ms hop, 512-point FFT at 16 kHz.
    fn default() -> Self {
        Self {
            window: 400,
            hop: 160,
            fft_size: 512,
        }
    }
}

impl StftParams {
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window > self.fft_size {
            return Err(Error::InvalidInput(format!(
                "window {} must be in 1..={}",
                self.window, self.fft_size
            )));
        }
        if self.hop == 0 {
            return Err(Error::InvalidInput("hop must be at least 1".into()));
        }
        Ok(())
    }

    /// Samples covered by `frames` frames.
    pub fn signal_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.window
        }
    }
}

/// Frames of `window` samples every `hop` samples, no padding.
pub fn frame_count(len: usize, window: usize, hop: usize) -> usize {
    if len < window || hop == 0 {
        0
    } else {
        (len - window) / hop + 1
    }
}

pub fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Magnitude spectrogram, frames × (fft_size/2 + 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    magnitudes: Array2<f64>,
    params: StftParams,
    sample_rate_hz: u32,
}

impl Spectrogram {
    pub fn new(magnitudes: Array2<f64>, params: StftParams, sample_rate_hz: u32) -> Result<Self> {
        params.validate()?;
        if magnitudes.ncols() != params.bins() {
            return Err(Error::Shape(format!(
                "spectrogram has {} bins, fft size {} needs {}",
                magnitudes.ncols(),
                params.fft_size,
                params.bins()
            )));
        }
        if magnitudes.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(Error::InvalidInput(
                "spectrogram magnitudes must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            magnitudes,
            params,
            sample_rate_hz,
        })
    }

    pub fn magnitudes(&self) -> &Array2<f64> {
        &self.magnitudes
    }

    pub fn params(&self) -> StftParams {
        self.params
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn frames(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn bins(&self) -> usize {
        self.magnitudes.ncols()
    }
}

/// Cached FFT plans plus the analysis window.
pub(crate) struct StftEngine {
    params: StftParams,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl StftEngine {
    pub(crate) fn new(params: StftParams) -> Result<Self> {
        params.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            params,
            window: hann_periodic(params.window),
            forward: planner.plan_fft_forward(params.fft_size),
            inverse: planner.plan_fft_inverse(params.fft_size),
        })
    }

    pub(crate) fn analyze(&self, x: &[f64]) -> Array2<Complex64> {
        let p = self.params;
        let frames = frame_count(x.len(), p.window, p.hop);
        let bins = p.bins();
        let mut out = Array2::zeros((frames, bins));
        let mut buf = vec![Complex64::new(0.0, 0.0); p.fft_size];
        for t in 0..frames {
            let seg = &x[t * p.hop..t * p.hop + p.window];
            for (i, b) in buf.iter_mut().enumerate() {
                *b = if i < p.window {
                    Complex64::new(seg[i] * self.window[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            self.forward.process(&mut buf);
            for k in 0..bins {
                out[[t, k]] = buf[k];
            }
        }
        out
    }

    /// Least-squares inverse: the real signal whose windowed frames are
    /// closest to the inverse FFTs of `spec`.
    pub(crate) fn synthesize(&self, spec: &Array2<Complex64>) -> Vec<f64> {
        let p = self.params;
        let n = p.fft_size;
        let frames = spec.nrows();
        let len = p.signal_len(frames);
        let mut acc = vec![0.0; len];
        let mut norm = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..frames {
            // Hermitian extension of the one-sided spectrum
            for k in 0..p.bins() {
                buf[k] = spec[[t, k]];
            }
            buf[0].im = 0.0;
            if n.is_multiple_of(2) {
                buf[n / 2].im = 0.0;
            }
            for k in p.bins()..n {
                buf[k] = buf[n - k].conj();
            }
            self.inverse.process(&mut buf);
            let off = t * p.hop;
            for i in 0..p.window {
                let w = self.window[i];
                acc[off + i] += w * buf[i].re / n as f64;
                norm[off + i] += w * w;
            }
        }
        acc.iter()
            .zip(&norm)
            .map(|(a, w)| if *w > 1e-12 { a / w } else { 0.0 })
            .collect()
    }
}

pub fn stft_complex(x: &[f64], params: StftParams) -> Result<Array2<Complex64>> {
    params.validate()?;
    if x.len() < params.window {
        return Err(Error::TooShort {
            len: x.len(),
            window: params.window,
        });
    }
    Ok(StftEngine::new(params)?.analyze(x))
}

/// Hann-windowed magnitude STFT.
pub fn stft(x: &Waveform, window: usize, hop: usize, fft_size: usize) -> Result<Spectrogram> {
    let params = StftParams {
        window,
        hop,
        fft_size,
    };
    let spec = stft_complex(x.samples(), params)?;
    Spectrogram::new(spec.mapv(|c| c.norm()), params, x.sample_rate_hz())
}

/// Least-squares inverse STFT of a complex one-sided spectrogram.
pub fn istft(spec: &Array2<Complex64>, params: StftParams) -> Result<Vec<f64>> {
    if spec.ncols() != params.bins() {
        return Err(Error::Shape(format!(
            "{} bins for fft size {}",
            spec.ncols(),
            params.fft_size
        )));
    }
    Ok(StftEngine::new(params)?.synthesize(spec))
}

/// ‖|STFT(x)| − target‖_F / ‖target‖_F, framing taken from `target`.
pub fn spectral_convergence_of(x: &[f64], target: &Spectrogram) -> Result<f64> {
    let denom = target
        .magnitudes()
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if denom == 0.0 {
        return Err(Error::Degenerate(
            "reference spectrogram has zero energy".into(),
        ));
    }
    let mags = stft_complex(x, target.params())?.mapv(|c| c.norm());
    let frames = mags.nrows().min(target.frames());
    let mut num = 0.0;
    for t in 0..target.frames() {
        for k in 0..target.bins() {
            let est = if t < frames { mags[[t, k]] } else { 0.0 };
            let d = est - target.magnitudes()[[t, k]];
            num += d * d;
        }
    }
    Ok(num.sqrt() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn front_end_frame_count() {
        let x = Waveform::zeros(1600, 16000);
        let s = stft(&x, 400, 160, 512).unwrap();
        assert_eq!(s.frames(), 8);
        assert_eq!(s.bins(), 257);
    }

    #[test]
    fn too_short_is_an_error() {
        let x = Waveform::zeros(399, 16000);
        assert!(matches!(
            stft(&x, 400, 160, 512),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn bin_centered_sinusoid_peaks_in_its_bin() {
        let k = 37;
        let f = k as f64 * 16000.0 / 512.0;
        let x: Vec<f64> = (0..4000)
            .map(|i| (2.0 * PI * f * i as f64 / 16000.0).sin())
            .collect();
        let s = stft(&Waveform::new(x, 16000).unwrap(), 400, 160, 512).unwrap();
        for row in s.magnitudes().rows() {
            let arg = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(arg, k);
        }
    }

    #[test]
    fn parseval() {
        let mut rng = crate::seed::rng(3);
        let x: Vec<f64> = (0..2000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = StftParams::default();
        let spec = stft_complex(&x, p).unwrap();
        let w = hann_periodic(p.window);
        let n = p.fft_size;
        for t in 0..spec.nrows() {
            // oracle: windowed energy computed in the time domain
            let time: f64 = (0..p.window)
                .map(|i| (x[t * p.hop + i] * w[i]).powi(2))
                .sum();
            let mut freq = spec[[t, 0]].norm_sqr() + spec[[t, n / 2]].norm_sqr();
            for k in 1..n / 2 {
                freq += 2.0 * spec[[t, k]].norm_sqr();
            }
            freq /= n as f64;
            assert!((freq - time).abs() <= 1e-6 * time);
        }
    }

    #[test]
    fn istft_inverts_stft() {
        let mut rng = crate::seed::rng(5);
        let x: Vec<f64> = (0..(9 * 160 + 400))
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let p = StftParams::default();
        let y = istft(&stft_complex(&x, p).unwrap(), p).unwrap();
        assert_eq!(y.len(), x.len());
        // the periodic Hann window is zero at sample 0, which is unrecoverable
        assert_eq!(y[0], 0.0);
        for (a, b) in x.iter().zip(&y).skip(1) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn frame_count_formula(len in 0usize..5000, window in 1usize..512, hop in 1usize..400) {
            let p = StftParams { window, hop, fft_size: 512 };
            let x = vec![0.0; len];
            match stft_complex(&x, p) {
                Ok(s) => {
                    prop_assert!(len >= window);
                    prop_assert_eq!(s.nrows(), (len - window) / hop + 1);
                    prop_assert_eq!(s.nrows(), frame_count(len, window, hop));
                }
                Err(_) => prop_assert!(len < window),
            }
        }
    }
}
