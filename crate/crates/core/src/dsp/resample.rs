use super::Waveform;
use crate::{Error, Result};

/// Taps on each side of the interpolation point.
const HALF_TAPS: usize = 32;
const KAISER_BETA: f64 = 8.0;

/// Modified Bessel function of the first kind, order 0 (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Kaiser-windowed sinc interpolation to `target_hz` (64 taps per output
/// sample, anti-aliased at the lower of the two Nyquist rates).
pub fn resample(x: &Waveform, target_hz: u32) -> Result<Waveform> {
    if target_hz == 0 {
        return Err(Error::InvalidInput(
            "target sample rate must be positive".into(),
        ));
    }
    let fs_in = x.sample_rate_hz();
    if fs_in == target_hz {
        return Ok(x.clone());
    }
    let ratio = fs_in as f64 / target_hz as f64;
    let cutoff = (target_hz as f64 / fs_in as f64).min(1.0);
    // window half-width in input samples: HALF_TAPS zero crossings of the sinc
    let half = HALF_TAPS as f64 / cutoff;
    let norm = bessel_i0(KAISER_BETA);
    let samples = x.samples();
    let n_out = ((samples.len() as u64 * target_hz as u64).div_ceil(fs_in as u64)) as usize;
    let out = (0..n_out)
        .map(|m| {
            let t = m as f64 * ratio;
            let lo = (t - half).ceil().max(0.0) as usize;
            let hi = ((t + half).floor() as usize).min(samples.len().saturating_sub(1));
            let mut acc = 0.0;
            for (k, &s) in samples.iter().enumerate().take(hi + 1).skip(lo) {
                let tau = t - k as f64;
                let r = tau / half;
                let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / norm;
                acc += s * cutoff * sinc(cutoff * tau) * w;
            }
            acc
        })
        .collect();
    Waveform::new(out, target_hz)
}
