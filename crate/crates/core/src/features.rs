//! Time-major feature matrices at 100 Hz shared by every stage.

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const FEATURE_RATE_HZ: u32 = 100;
pub const MFCC_WIDTH: usize = 13;
pub const EEG_CHANNELS: usize = 31;
pub const EEG_FEATURES_PER_CHANNEL: usize = 5;
pub const EEG_WIDTH: usize = EEG_CHANNELS * EEG_FEATURES_PER_CHANNEL;
pub const REDUCED_EEG_WIDTH: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Mfcc13,
    Eeg155,
    /// KPCA-reduced EEG. Named for the default width; the actual width is
    /// whatever the reduction produced.
    Eeg30,
}

impl FeatureKind {
    /// Required width, or `None` when the width is free.
    pub fn fixed_width(self) -> Option<usize> {
        match self {
            FeatureKind::Mfcc13 => Some(MFCC_WIDTH),
            FeatureKind::Eeg155 => Some(EEG_WIDTH),
            FeatureKind::Eeg30 => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Mfcc13 => "mfcc13",
            FeatureKind::Eeg155 => "eeg155",
            FeatureKind::Eeg30 => "eeg30",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    kind: FeatureKind,
    frames: Array2<f64>,
}

impl FeatureSequence {
    pub fn new(kind: FeatureKind, frames: Array2<f64>) -> Result<Self> {
        if let Some(w) = kind.fixed_width() {
            if frames.ncols() != w {
                return Err(Error::Shape(format!(
                    "{} features must be {w} wide, got {}",
                    kind.as_str(),
                    frames.ncols()
                )));
            }
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{} feature sequence",
                kind.as_str()
            )));
        }
        Ok(Self { kind, frames })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn frame_rate_hz(&self) -> u32 {
        FEATURE_RATE_HZ
    }

    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    pub fn width(&self) -> usize {
        self.frames.ncols()
    }

    pub fn frames(&self) -> ArrayView2<'_, f64> {
        self.frames.view()
    }

    pub fn into_frames(self) -> Array2<f64> {
        self.frames
    }

    /// Keep only the first `n` frames.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            kind: self.kind,
            frames: self.frames.slice(s![..n, ..]).to_owned(),
        }
    }

    /// Extend to `n` frames by repeating the last frame.
    pub fn edge_padded(&self, n: usize) -> Self {
        if n <= self.len() || self.is_empty() {
            return self.clone();
        }
        let mut frames = Array2::zeros((n, self.width()));
        frames.slice_mut(s![..self.len(), ..]).assign(&self.frames);
        let last = self.frames.row(self.len() - 1);
        for mut row in frames.axis_iter_mut(Axis(0)).skip(self.len()) {
            row.assign(&last);
        }
        Self {
            kind: self.kind,
            frames,
        }
    }
}

/// Truncate a pair of sequences to their common frame count.
pub fn align_pair(a: &FeatureSequence, b: &FeatureSequence) -> (FeatureSequence, FeatureSequence) {
    let n = a.len().min(b.len());
    (a.truncated(n), b.truncated(n))
}
