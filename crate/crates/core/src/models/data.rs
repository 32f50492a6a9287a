use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::features::{FeatureKind, FeatureSequence, MFCC_WIDTH};
use crate::{Error, Result};

const STD_FLOOR: f64 = 1e-8;

/// Per-column z-scoring of MFCC and EEG features, fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mfcc_mean: Array1<f64>,
    pub mfcc_std: Array1<f64>,
    pub eeg_mean: Array1<f64>,
    pub eeg_std: Array1<f64>,
}

fn column_stats<'a>(
    blocks: impl Iterator<Item = ArrayView2<'a, f64>>,
    width: usize,
) -> (Array1<f64>, Array1<f64>) {
    let mut n = 0usize;
    let mut sum = Array1::<f64>::zeros(width);
    let mut sq = Array1::<f64>::zeros(width);
    for b in blocks {
        n += b.nrows();
        sum += &b.sum_axis(Axis(0));
        sq += &b.mapv(|v| v * v).sum_axis(Axis(0));
    }
    let n = n.max(1) as f64;
    let mean = sum / n;
    let std = (sq / n - mean.mapv(|m| m * m)).mapv(|v| {
        let s = v.max(0.0).sqrt();
        if s < STD_FLOOR {
            1.0
        } else {
            s
        }
    });
    (mean, std)
}

impl Normalizer {
    pub fn identity(eeg_dim: usize) -> Self {
        Self {
            mfcc_mean: Array1::zeros(MFCC_WIDTH),
            mfcc_std: Array1::ones(MFCC_WIDTH),
            eeg_mean: Array1::zeros(eeg_dim),
            eeg_std: Array1::ones(eeg_dim),
        }
    }

    pub fn fit(pairs: &[UtterancePair]) -> Result<Self> {
        let first = pairs
            .first()
            .ok_or_else(|| Error::InvalidInput("no training utterances".into()))?;
        let eeg_dim = first.eeg.width();
        let (mfcc_mean, mfcc_std) =
            column_stats(pairs.iter().map(|p| p.clean.frames()), MFCC_WIDTH);
        let (eeg_mean, eeg_std) = column_stats(pairs.iter().map(|p| p.eeg.frames()), eeg_dim);
        Ok(Self {
            mfcc_mean,
            mfcc_std,
            eeg_mean,
            eeg_std,
        })
    }

    pub fn eeg_dim(&self) -> usize {
        self.eeg_mean.len()
    }

    pub fn mfcc_in(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.mfcc_mean) / &self.mfcc_std
    }

    pub fn mfcc_out(&self, z: ArrayView2<f64>) -> Array2<f64> {
        &z * &self.mfcc_std + &self.mfcc_mean
    }

    pub fn eeg_in(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.eeg_mean) / &self.eeg_std
    }

    /// Flat vector: mfcc mean, mfcc std, eeg mean, eeg std.
    pub fn to_vec(&self) -> Vec<f64> {
        [
            &self.mfcc_mean,
            &self.mfcc_std,
            &self.eeg_mean,
            &self.eeg_std,
        ]
        .iter()
        .flat_map(|a| a.iter().copied())
        .collect()
    }

    pub fn from_vec(values: &[f64], eeg_dim: usize) -> Result<Self> {
        if values.len() != 2 * (MFCC_WIDTH + eeg_dim) {
            return Err(Error::Checkpoint(format!(
                "normalizer has {} values, expected {}",
                values.len(),
                2 * (MFCC_WIDTH + eeg_dim)
            )));
        }
        let (m, e) = values.split_at(2 * MFCC_WIDTH);
        Ok(Self {
            mfcc_mean: Array1::from(m[..MFCC_WIDTH].to_vec()),
            mfcc_std: Array1::from(m[MFCC_WIDTH..].to_vec()),
            eeg_mean: Array1::from(e[..eeg_dim].to_vec()),
            eeg_std: Array1::from(e[eeg_dim..].to_vec()),
        })
    }
}

/// Clean MFCC and the EEG features recorded alongside, frame-aligned.
#[derive(Debug, Clone)]
pub struct UtterancePair {
    pub id: String,
    pub clean: FeatureSequence,
    pub eeg: FeatureSequence,
}

impl UtterancePair {
    pub fn new(
        id: impl Into<String>,
        clean: FeatureSequence,
        eeg: FeatureSequence,
    ) -> Result<Self> {
        let id = id.into();
        if clean.kind() != FeatureKind::Mfcc13 {
            return Err(Error::InvalidInput(format!(
                "{id}: clean features must be mfcc13"
            )));
        }
        if clean.len() != eeg.len() {
            return Err(Error::Shape(format!(
                "{id}: {} MFCC frames vs {} EEG frames",
                clean.len(),
                eeg.len()
            )));
        }
        Ok(Self { id, clean, eeg })
    }
}

/// A window of one utterance used as a training sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub utterance: usize,
    pub start: usize,
    pub len: usize,
}

/// Zero-padded mini-batch, standardized.
#[derive(Debug, Clone)]
pub struct Batch {
    pub clean: Array3<f64>,
    pub noisy: Array3<f64>,
    pub eeg: Array3<f64>,
    pub lengths: Vec<usize>,
}

/// Standardized utterances cut into fixed-length segments.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    normalizer: Normalizer,
    clean: Vec<Array2<f64>>,
    eeg: Vec<Array2<f64>>,
    segments: Vec<Segment>,
    seq_len: usize,
}

impl TrainingSet {
    pub fn new(pairs: &[UtterancePair], seq_len: usize) -> Result<Self> {
        let normalizer = Normalizer::fit(pairs)?;
        Self::with_normalizer(pairs, seq_len, normalizer)
    }

    pub fn with_normalizer(
        pairs: &[UtterancePair],
        seq_len: usize,
        normalizer: Normalizer,
    ) -> Result<Self> {
        if seq_len < 2 {
            return Err(Error::InvalidInput("sequence length must be ≥ 2".into()));
        }
        let mut clean = Vec::with_capacity(pairs.len());
        let mut eeg = Vec::with_capacity(pairs.len());
        let mut segments = Vec::new();
        for (u, p) in pairs.iter().enumerate() {
            if p.eeg.width() != normalizer.eeg_dim() {
                return Err(Error::Shape(format!(
                    "{}: EEG width {} differs from {}",
                    p.id,
                    p.eeg.width(),
                    normalizer.eeg_dim()
                )));
            }
            let n = p.clean.len();
            let mut start = 0;
            while start < n {
                let len = seq_len.min(n - start);
                if len >= 2 {
                    segments.push(Segment {
                        utterance: u,
                        start,
                        len,
                    });
                }
                start += seq_len;
            }
            clean.push(normalizer.mfcc_in(p.clean.frames()));
            eeg.push(normalizer.eeg_in(p.eeg.frames()));
        }
        if segments.is_empty() {
            return Err(Error::InvalidInput(
                "no utterance has at least 2 frames".into(),
            ));
        }
        Ok(Self {
            normalizer,
            clean,
            eeg,
            segments,
            seq_len,
        })
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn eeg_dim(&self) -> usize {
        self.normalizer.eeg_dim()
    }

    /// Gather segments; `noisy` is clean plus N(0, sigma²) in raw MFCC units.
    pub fn batch<R: Rng>(&self, indices: &[usize], sigma: f64, rng: &mut R) -> Batch {
        let steps = indices
            .iter()
            .map(|&i| self.segments[i].len)
            .max()
            .unwrap_or(0);
        let b = indices.len();
        let e = self.eeg_dim();
        let mut clean = Array3::zeros((b, steps, MFCC_WIDTH));
        let mut eeg = Array3::zeros((b, steps, e));
        let mut lengths = Vec::with_capacity(b);
        for (row, &i) in indices.iter().enumerate() {
            let seg = self.segments[i];
            let span = seg.start..seg.start + seg.len;
            clean
                .slice_mut(s![row, ..seg.len, ..])
                .assign(&self.clean[seg.utterance].slice(s![span.clone(), ..]));
            eeg.slice_mut(s![row, ..seg.len, ..])
                .assign(&self.eeg[seg.utterance].slice(s![span, ..]));
            lengths.push(seg.len);
        }
        let mut noisy = clean.clone();
        if sigma > 0.0 {
            for (row, &len) in lengths.iter().enumerate() {
                for t in 0..len {
                    for k in 0..MFCC_WIDTH {
                        let z: f64 = StandardNormal.sample(rng);
                        noisy[(row, t, k)] += sigma * z / self.normalizer.mfcc_std[k];
                    }
                }
            }
        }
        Batch {
            clean,
            noisy,
            eeg,
            lengths,
        }
    }
}
