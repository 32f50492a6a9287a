//! On-disk formats: PCM16 WAV audio and a small binary container
//! (magic, JSON header, little-endian f64 payload) used for features,
//! EEG recordings, the fitted EEG reducer and model checkpoints.

mod checkpoint;
mod container;
mod wav;

pub use checkpoint::{
    config_hash, load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader, TrainingCheckpoint,
};
pub use container::{read_container, write_container, Container, MAGIC};
pub use wav::{read_wav, write_wav};

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::eeg::EegRecording;
use crate::features::{FeatureKind, FeatureSequence, FEATURE_RATE_HZ};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FeatureHeader {
    kind: FeatureKind,
    frame_rate_hz: u32,
    frames: usize,
    width: usize,
}

pub fn write_features(path: &Path, seq: &FeatureSequence) -> Result<()> {
    let header = FeatureHeader {
        kind: seq.kind(),
        frame_rate_hz: seq.frame_rate_hz(),
        frames: seq.len(),
        width: seq.width(),
    };
    let payload: Vec<f64> = seq.frames().iter().copied().collect();
    write_container(path, "features", &header, &payload)
}

pub fn read_features(path: &Path) -> Result<FeatureSequence> {
    let c = read_container(path)?;
    let h: FeatureHeader = c.header_as("features").map_err(|e| e.at(path))?;
    if h.frame_rate_hz != FEATURE_RATE_HZ {
        return Err(
            Error::Checkpoint(format!("unsupported frame rate {}", h.frame_rate_hz)).at(path),
        );
    }
    let frames = Array2::from_shape_vec((h.frames, h.width), c.payload)
        .map_err(|_| Error::Checkpoint("payload does not match declared shape".into()).at(path))?;
    FeatureSequence::new(h.kind, frames).map_err(|e| e.at(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EegHeader {
    sample_rate_hz: u32,
    channels: usize,
    samples: usize,
    channel_labels: Vec<String>,
}

/// Channel-major: all samples of channel 0, then channel 1, ...
pub fn write_eeg(path: &Path, rec: &EegRecording) -> Result<()> {
    let header = EegHeader {
        sample_rate_hz: rec.sample_rate_hz(),
        channels: rec.data().nrows(),
        samples: rec.samples(),
        channel_labels: rec.channel_labels().to_vec(),
    };
    let payload: Vec<f64> = rec.data().iter().copied().collect();
    write_container(path, "eeg", &header, &payload)
}

pub fn read_eeg(path: &Path) -> Result<EegRecording> {
    let c = read_container(path)?;
    let h: EegHeader = c.header_as("eeg").map_err(|e| e.at(path))?;
    if h.sample_rate_hz != crate::eeg::EEG_RATE_HZ {
        return Err(Error::SampleRate {
            expected: crate::eeg::EEG_RATE_HZ,
            got: h.sample_rate_hz,
        }
        .at(path));
    }
    let data = Array2::from_shape_vec((h.channels, h.samples), c.payload)
        .map_err(|_| Error::Checkpoint("payload does not match declared shape".into()).at(path))?;
    EegRecording::with_labels(data, h.channel_labels).map_err(|e| e.at(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.feat");
        let seq = FeatureSequence::new(
            FeatureKind::Eeg30,
            Array2::from_shape_fn((7, 30), |(i, j)| (i * 30 + j) as f64 * 0.1 - 3.0),
        )
        .unwrap();
        write_features(&p, &seq).unwrap();
        assert_eq!(read_features(&p).unwrap(), seq);
    }

    #[test]
    fn eeg_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.eeg");
        let rec = EegRecording::new(Array2::from_shape_fn((31, 50), |(c, t)| {
            (c as f64).sin() * t as f64
        }))
        .unwrap();
        write_eeg(&p, &rec).unwrap();
        assert_eq!(read_eeg(&p).unwrap(), rec);
        assert!(read_features(&p).is_err());
    }
}
