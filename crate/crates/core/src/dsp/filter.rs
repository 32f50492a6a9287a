//! Butterworth band-pass and second-order notch filters realized as
//! cascaded biquads.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::Waveform;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Bandpass,
    Notch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IirFilterSpec {
    pub kind: FilterKind,
    /// Band-pass: order of the low-pass prototype (each prototype pole
    /// becomes one biquad, so order 4 gives four sections). Notch: total
    /// order, must be even; order/2 identical sections are cascaded.
    pub order: usize,
    pub cutoffs_hz: Vec<f64>,
    pub sample_rate_hz: u32,
    /// Quality factor, notch only.
    pub notch_q: f64,
}

impl IirFilterSpec {
    pub fn bandpass(order: usize, low_hz: f64, high_hz: f64, sample_rate_hz: u32) -> Self {
        Self {
            kind: FilterKind::Bandpass,
            order,
            cutoffs_hz: vec![low_hz, high_hz],
            sample_rate_hz,
            notch_q: 0.0,
        }
    }

    pub fn notch(center_hz: f64, q: f64, sample_rate_hz: u32) -> Self {
        Self {
            kind: FilterKind::Notch,
            order: 2,
            cutoffs_hz: vec![center_hz],
            sample_rate_hz,
            notch_q: q,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::InvalidSpec("order must be positive".into()));
        }
        if self.sample_rate_hz == 0 {
            return Err(Error::InvalidSpec("sample rate must be positive".into()));
        }
        let nyquist = self.sample_rate_hz as f64 / 2.0;
        for &c in &self.cutoffs_hz {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "cutoff {c} Hz must be positive"
                )));
            }
            if c >= nyquist {
                return Err(Error::InvalidSpec(format!(
                    "cutoff {c} Hz is not below Nyquist ({nyquist} Hz)"
                )));
            }
        }
        match self.kind {
            FilterKind::Bandpass => {
                if self.cutoffs_hz.len() != 2 || self.cutoffs_hz[0] >= self.cutoffs_hz[1] {
                    return Err(Error::InvalidSpec(
                        "band-pass needs two cutoffs with low < high".into(),
                    ));
                }
            }
            FilterKind::Notch => {
                if self.cutoffs_hz.len() != 1 {
                    return Err(Error::InvalidSpec(
                        "notch needs one center frequency".into(),
                    ));
                }
                if !self.order.is_multiple_of(2) {
                    return Err(Error::InvalidSpec("notch order must be even".into()));
                }
                if !(self.notch_q > 0.0 && self.notch_q.is_finite()) {
                    return Err(Error::InvalidSpec("notch Q must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + self.b[1] * z_inv + self.b[2] * z2;
        let den = 1.0 + self.a[0] * z_inv + self.a[1] * z2;
        num / den
    }

    fn run(&self, x: &mut [f64]) {
        // transposed direct form II
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + s1;
            s1 = self.b[1] * input - self.a[0] * y + s2;
            s2 = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    sections: Vec<Biquad>,
    sample_rate_hz: u32,
}

impl SosFilter {
    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate_hz as f64;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn gain_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }

    /// Causal filtering from a zero initial state.
    pub fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            s.run(&mut y);
        }
        y
    }

    pub fn apply(&self, x: &Waveform) -> Result<Waveform> {
        if x.sample_rate_hz() != self.sample_rate_hz {
            return Err(Error::SampleRate {
                expected: self.sample_rate_hz,
                got: x.sample_rate_hz(),
            });
        }
        Waveform::new(self.apply_slice(x.samples()), self.sample_rate_hz)
    }
}

pub fn design_iir(spec: &IirFilterSpec) -> Result<SosFilter> {
    spec.validate()?;
    let sections = match spec.kind {
        FilterKind::Bandpass => butter_bandpass(
            spec.order,
            spec.cutoffs_hz[0],
            spec.cutoffs_hz[1],
            spec.sample_rate_hz as f64,
        ),
        FilterKind::Notch => {
            let s = notch_section(spec.cutoffs_hz[0], spec.notch_q, spec.sample_rate_hz as f64);
            vec![s; spec.order / 2]
        }
    };
    Ok(SosFilter {
        sections,
        sample_rate_hz: spec.sample_rate_hz,
    })
}

pub fn filter_apply(filter: &SosFilter, x: &Waveform) -> Result<Waveform> {
    filter.apply(x)
}

fn butter_bandpass(order: usize, low: f64, high: f64, fs: f64) -> Vec<Biquad> {
    let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
    let (wl, wh) = (warp(low), warp(high));
    let w0 = (wl * wh).sqrt();
    let bw = wh - wl;
    let two_fs = 2.0 * fs;
    let bilinear = |s: Complex64| (two_fs + s) / (two_fs - s);

    let n = order as i64;
    let mut sections = Vec::with_capacity(order);
    // Prototype poles -exp(iπm/2N), m = -N+1, -N+3, ..., N-1. Taking m ≥ 0
    // visits one pole per conjugate pair plus the real pole for odd N.
    let mut m = if n % 2 == 0 { 1 } else { 0 };
    while m < n {
        let p = -Complex64::from_polar(1.0, PI * m as f64 / (2 * n) as f64);
        let half = p * (bw / 2.0);
        let disc = (half * half - w0 * w0).sqrt();
        let (s1, s2) = (half + disc, half - disc);
        if m == 0 {
            // real prototype pole: its two band-pass poles form one section
            let (z1, z2) = (bilinear(s1), bilinear(s2));
            sections.push(section_from_poles(z1, z2));
        } else {
            for s in [s1, s2] {
                let z = bilinear(s);
                sections.push(section_from_poles(z, z.conj()));
            }
        }
        m += 2;
    }

    // unit gain at the geometric band center
    let center = fs / PI * (w0 / two_fs).atan();
    let probe = SosFilter {
        sections: sections.clone(),
        sample_rate_hz: fs as u32,
    };
    let g = probe.response(center).norm();
    let per_section = g.powf(-1.0 / sections.len() as f64);
    for s in &mut sections {
        for b in &mut s.b {
            *b *= per_section;
        }
    }
    sections
}

/// Section with zeros at z = ±1 and the given pole pair.
fn section_from_poles(z1: Complex64, z2: Complex64) -> Biquad {
    Biquad {
        b: [1.0, 0.0, -1.0],
        a: [-(z1 + z2).re, (z1 * z2).re],
    }
}

fn notch_section(f0: f64, q: f64, fs: f64) -> Biquad {
    let w0 = 2.0 * PI * f0 / fs;
    let bw = w0 / q;
    let gain = 1.0 / (1.0 + (bw / 2.0).tan());
    let c = w0.cos();
    Biquad {
        b: [gain, -2.0 * gain * c, gain],
        a: [-2.0 * gain * c, 2.0 * gain - 1.0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eeg_bandpass() -> SosFilter {
        design_iir(&IirFilterSpec::bandpass(4, 0.1, 70.0, 1000)).unwrap()
    }

    fn sine(freq: f64, fs: f64, n: usize, amp: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    /// Magnitude of the DFT of `x` at an arbitrary frequency.
    fn dft_mag(x: &[f64], freq: f64, fs: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let ph = 2.0 * PI * freq * i as f64 / fs;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        (re * re + im * im).sqrt()
    }

    #[test]
    fn bandpass_passband_and_stopbands() {
        let f = eeg_bandpass();
        assert_eq!(f.sections().len(), 4);
        let peak = (1..2000)
            .map(|i| f.gain_db(i as f64 * 0.05))
            .fold(f64::NEG_INFINITY, f64::max);
        let g35 = f.gain_db(35.0);
        assert!(
            g35 <= peak + 1e-9 && g35 >= peak - 1.0,
            "35 Hz gain {g35}, peak {peak}"
        );
        let center = f.gain_db((0.1f64 * 70.0).sqrt());
        assert!(f.gain_db(0.01) <= center - 20.0);
        assert!(f.gain_db(140.0) <= center - 20.0);
    }

    #[test]
    fn notch_response() {
        let f = design_iir(&IirFilterSpec::notch(60.0, 30.0, 1000)).unwrap();
        assert!(f.gain_db(60.0) <= -20.0);
        assert!(f.gain_db(55.0) >= -1.0);
        assert!(f.gain_db(65.0) >= -1.0);
    }

    #[test]
    fn notch_kills_60hz_sine_after_transient() {
        let f = design_iir(&IirFilterSpec::notch(60.0, 30.0, 1000)).unwrap();
        let x = sine(60.0, 1000.0, 5000, 1.0);
        let y = f.apply_slice(&x);
        assert!(rms(&y[2000..]) <= 0.1 * rms(&x[2000..]));
    }

    #[test]
    fn invalid_specs() {
        let err = design_iir(&IirFilterSpec::bandpass(4, 0.1, 600.0, 1000)).unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)));
        assert!(design_iir(&IirFilterSpec::bandpass(0, 0.1, 70.0, 1000)).is_err());
        assert!(design_iir(&IirFilterSpec::bandpass(4, 70.0, 0.1, 1000)).is_err());
        assert!(design_iir(&IirFilterSpec::notch(500.0, 30.0, 1000)).is_err());
        let mut odd = IirFilterSpec::notch(60.0, 30.0, 1000);
        odd.order = 3;
        assert!(design_iir(&odd).is_err());
    }

    #[test]
    fn odd_order_bandpass_is_well_formed() {
        let f = design_iir(&IirFilterSpec::bandpass(3, 5.0, 40.0, 1000)).unwrap();
        assert_eq!(f.sections().len(), 3);
        let c = (5.0f64 * 40.0).sqrt();
        assert!(f.gain_db(c).abs() < 1e-9);
        assert!(f.gain_db(200.0) < -20.0);
    }

    #[test]
    fn zero_in_zero_out_and_rate_check() {
        let f = eeg_bandpass();
        let y = f.apply(&Waveform::zeros(1000, 1000)).unwrap();
        assert_eq!(y.len(), 1000);
        assert!(y.samples().iter().all(|&v| v == 0.0));
        assert!(matches!(
            f.apply(&Waveform::zeros(10, 16000)),
            Err(Error::SampleRate { .. })
        ));
    }

    #[test]
    fn dc_offset_is_removed() {
        let f = eeg_bandpass();
        // oracle: designed response at DC is exactly zero (zeros at z = 1)
        assert!(f.response(0.0).norm() < 1e-12);
        let x = vec![1.0; 120_000];
        let y = f.apply_slice(&x);
        let tail = &y[110_000..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        assert!(mean.abs() < 0.01, "steady-state mean {mean}");
    }

    #[test]
    fn out_of_band_tone_attenuated() {
        let f = eeg_bandpass();
        let fs = 1000.0;
        let a = sine(30.0, fs, 20_000, 1.0);
        let b = sine(200.0, fs, 20_000, 1.0);
        let x: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
        let y = f.apply_slice(&x);
        let tail = &y[10_000..];
        let ratio_db = 20.0 * (dft_mag(tail, 200.0, fs) / dft_mag(tail, 30.0, fs)).log10();
        let designed = f.gain_db(200.0) - f.gain_db(30.0);
        assert!(ratio_db <= -20.0, "measured {ratio_db} dB");
        assert!((ratio_db - designed).abs() < 1.0);
    }

    #[test]
    fn impulse_responses_decay() {
        let mut imp = vec![0.0; 10_000];
        imp[0] = 1.0;
        let notch = design_iir(&IirFilterSpec::notch(60.0, 30.0, 1000)).unwrap();
        let h = notch.apply_slice(&imp);
        assert!(h[9_000..].iter().all(|v| v.abs() < 1e-6));

        // The 0.1 Hz edge decays at ~0.24/s, so the band-pass needs ~30 s.
        let mut imp = vec![0.0; 40_000];
        imp[0] = 1.0;
        let h = eeg_bandpass().apply_slice(&imp);
        assert!(h[30_000..].iter().all(|v| v.abs() < 1e-6));
        let max_pole = eeg_bandpass()
            .sections()
            .iter()
            .map(|s| s.a[1].abs().sqrt())
            .fold(0.0, f64::max);
        assert!(max_pole < 1.0);
    }
}
