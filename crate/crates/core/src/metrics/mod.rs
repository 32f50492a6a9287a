//! Objective quality measures and the per-corpus report.

mod pesq;
mod stoi;

pub use pesq::{pesq_external, PesqOutcome};
pub use stoi::{stoi, SEGMENT_FRAMES};

use serde::{Deserialize, Serialize};

use crate::dsp::{stft, StftParams, Waveform};
use crate::{Error, Result};

/// mean(x) / std(x), population std.
pub fn snr_mean_std(x: &Waveform) -> Result<f64> {
    let s = x.samples();
    if s.len() < 2 {
        return Err(Error::TooShort {
            len: s.len(),
            window: 2,
        });
    }
    if s.iter().all(|&v| v == s[0]) {
        return Err(Error::Degenerate(
            "constant signal has zero standard deviation".into(),
        ));
    }
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(mean / var.sqrt())
}

/// ‖|STFT(est)| − |STFT(ref)|‖_F / ‖|STFT(ref)|‖_F after trimming to the shorter signal.
pub fn spectral_convergence(reference: &Waveform, estimate: &Waveform) -> Result<f64> {
    if reference.sample_rate_hz() != estimate.sample_rate_hz() {
        return Err(Error::SampleRate {
            expected: reference.sample_rate_hz(),
            got: estimate.sample_rate_hz(),
        });
    }
    let n = reference.len().min(estimate.len());
    let p = StftParams::default();
    let r = stft(&reference.truncated(n), p.window, p.hop, p.fft_size)?;
    let e = stft(&estimate.truncated(n), p.window, p.hop, p.fft_size)?;
    let denom = r.magnitudes().iter().map(|v| v * v).sum::<f64>().sqrt();
    if denom == 0.0 {
        return Err(Error::Degenerate(
            "reference has zero spectral energy".into(),
        ));
    }
    let num = (e.magnitudes() - r.magnitudes())
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceMetrics {
    pub id: String,
    pub snr_noisy: f64,
    pub snr_enhanced: f64,
    pub stoi_noisy: f64,
    pub stoi_enhanced: f64,
    pub spectral_convergence: f64,
    #[serde(default)]
    pub pesq_noisy: Option<f64>,
    #[serde(default)]
    pub pesq_enhanced: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricMeans {
    pub snr_noisy: f64,
    pub snr_enhanced: f64,
    pub stoi_noisy: f64,
    pub stoi_enhanced: f64,
    pub spectral_convergence: f64,
    pub pesq_noisy: Option<f64>,
    pub pesq_enhanced: Option<f64>,
}

/// Per-utterance metrics of one model over a test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub records: Vec<UtteranceMetrics>,
    pub means: MetricMeans,
    /// Test utterances that had no enhanced audio.
    #[serde(default)]
    pub missing: Vec<String>,
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean if every record has the value, otherwise unavailable.
fn mean_opt<'a>(values: impl Iterator<Item = &'a Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.copied().collect();
    v.filter(|v| !v.is_empty()).map(|v| mean_of(v.into_iter()))
}

impl MetricReport {
    pub fn new(model: impl Into<String>, records: Vec<UtteranceMetrics>) -> Self {
        let r = &records;
        let means = MetricMeans {
            snr_noisy: mean_of(r.iter().map(|m| m.snr_noisy)),
            snr_enhanced: mean_of(r.iter().map(|m| m.snr_enhanced)),
            stoi_noisy: mean_of(r.iter().map(|m| m.stoi_noisy)),
            stoi_enhanced: mean_of(r.iter().map(|m| m.stoi_enhanced)),
            spectral_convergence: mean_of(r.iter().map(|m| m.spectral_convergence)),
            pesq_noisy: mean_opt(r.iter().map(|m| &m.pesq_noisy)),
            pesq_enhanced: mean_opt(r.iter().map(|m| &m.pesq_enhanced)),
        };
        Self {
            model: model.into(),
            records,
            means,
            missing: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per utterance followed by a `mean` row. Missing PESQ is written as `unavailable`.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "unavailable".to_string(), |x| x.to_string());
        let mut out = String::from(
            "model,id,snr_noisy,snr_enhanced,stoi_noisy,stoi_enhanced,spectral_convergence,pesq_noisy,pesq_enhanced\n",
        );
        for r in &self.records {
            out += &format!(
                "{},{},{},{},{},{},{},{},{}\n",
                self.model,
                r.id,
                r.snr_noisy,
                r.snr_enhanced,
                r.stoi_noisy,
                r.stoi_enhanced,
                r.spectral_convergence,
                opt(r.pesq_noisy),
                opt(r.pesq_enhanced)
            );
        }
        let m = &self.means;
        out += &format!(
            "{},mean,{},{},{},{},{},{},{}\n",
            self.model,
            m.snr_noisy,
            m.snr_enhanced,
            m.stoi_noisy,
            m.stoi_enhanced,
            m.spectral_convergence,
            opt(m.pesq_noisy),
            opt(m.pesq_enhanced)
        );
        out
    }
}
