use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;

use super::stft::StftEngine;
use super::{Spectrogram, Waveform};
use crate::{Error, Result};

pub const DEFAULT_GRIFFIN_LIM_ITERATIONS: usize = 60;

/// Griffin-Lim phase reconstruction from zero initial phase.
pub fn griffin_lim(s: &Spectrogram, iterations: usize) -> Result<Waveform> {
    griffin_lim_traced(s, iterations).map(|(w, _)| w)
}

/// Griffin-Lim that also returns the spectral-convergence error of the
/// estimate after each iteration (`errors[k-1]` belongs to iteration k).
///
/// An all-zero spectrogram is a fixed point: the result is silence and the
/// error trace is all zeros.
pub fn griffin_lim_traced(s: &Spectrogram, iterations: usize) -> Result<(Waveform, Vec<f64>)> {
    if iterations == 0 {
        return Err(Error::InvalidInput(
            "griffin-lim needs at least one iteration".into(),
        ));
    }
    let params = s.params();
    let target = s.magnitudes();
    let len = params.signal_len(s.frames());
    let norm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok((
            Waveform::zeros(len, s.sample_rate_hz()),
            vec![0.0; iterations],
        ));
    }

    let engine = StftEngine::new(params)?;
    let mut spec: Array2<Complex64> = target.mapv(|m| Complex64::new(m, 0.0));
    let mut x = engine.synthesize(&spec);
    let mut errors = Vec::with_capacity(iterations);
    for k in 0..iterations {
        let current = engine.analyze(&x);
        let mut err = 0.0;
        Zip::from(&mut spec)
            .and(&current)
            .and(target)
            .for_each(|out, c, &m| {
                let mag = c.norm();
                err += (mag - m) * (mag - m);
                *out = if mag > 0.0 {
                    c * (m / mag)
                } else {
                    Complex64::new(m, 0.0)
                };
            });
        errors.push(err.sqrt() / norm);
        if k + 1 < iterations {
            x = engine.synthesize(&spec);
        }
    }
    Ok((Waveform::new(x, s.sample_rate_hz())?, errors))
}
