use std::path::Path;

use crate::dsp::Waveform;
use crate::{Error, Result};

/// Mono 16-bit PCM. Samples are clipped to [-1, 1].
pub fn write_wav(path: &Path, x: &Waveform) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::from(e).at(dir))?;
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: x.sample_rate_hz(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| Error::from(e).at(path))?;
    for &s in x.samples() {
        let q = (s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16;
        w.write_sample(q).map_err(|e| Error::from(e).at(path))?;
    }
    w.finalize().map_err(|e| Error::from(e).at(path))
}

/// Mono WAV, integer or float. Multi-channel files are rejected.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let mut r = hound::WavReader::open(path).map_err(|e| Error::from(e).at(path))?;
    let spec = r.spec();
    if spec.channels != 1 {
        return Err(
            Error::InvalidInput(format!("{} channels, expected mono", spec.channels)).at(path),
        );
    }
    let samples: std::result::Result<Vec<f64>, hound::Error> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f64 - 1.0;
            r.samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect()
        }
        hound::SampleFormat::Float => r.samples::<f32>().map(|s| s.map(f64::from)).collect(),
    };
    let samples = samples.map_err(|e| Error::from(e).at(path))?;
    Waveform::new(samples, spec.sample_rate).map_err(|e| e.at(path))
}
