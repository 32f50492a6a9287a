//! EEG preprocessing and per-channel statistical features.
//!
//! Each channel is band-passed (Butterworth, 0.1-70 Hz) and notched at
//! 60 Hz, then summarized every 10 ms over 100 ms windows by five
//! statistics. The 155 output columns are channel-major: feature `j` of
//! channel `c` sits in column `5c + j`.

mod features;

pub use features::{window_feature, EegFeature, FeatureExtractor};

use std::sync::OnceLock;

use ndarray::Array2;

use crate::dsp::{design_iir, IirFilterSpec, SosFilter};
use crate::features::{FeatureSequence, EEG_CHANNELS};
use crate::par::{self, Exec};
use crate::{Error, Result};

pub const EEG_RATE_HZ: u32 = 1000;
pub const FEATURE_WINDOW: usize = 100;
pub const FEATURE_HOP: usize = 10;

/// 10-20 labels of the 31 data electrodes (ground excluded).
pub const CHANNEL_LABELS: [&str; EEG_CHANNELS] = [
    "Fp1", "Fz", "F3", "F7", "FT9", "FC5", "FC1", "C3", "T7", "TP9", "CP5", "CP1", "Pz", "P3",
    "P7", "O1", "Oz", "O2", "P4", "P8", "TP10", "CP6", "CP2", "C4", "T8", "FT10", "FC6", "FC2",
    "F4", "F8", "Fp2",
];

/// 31 channels × samples at 1000 Hz, microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecording {
    data: Array2<f64>,
    channel_labels: Vec<String>,
}

impl EegRecording {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        Self::with_labels(data, CHANNEL_LABELS.iter().map(|s| s.to_string()).collect())
    }

    pub fn with_labels(data: Array2<f64>, channel_labels: Vec<String>) -> Result<Self> {
        if data.nrows() != EEG_CHANNELS {
            return Err(Error::Shape(format!(
                "EEG needs {EEG_CHANNELS} data channels, got {}",
                data.nrows()
            )));
        }
        if channel_labels.len() != EEG_CHANNELS {
            return Err(Error::Shape(format!(
                "{} channel labels for {EEG_CHANNELS} channels",
                channel_labels.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("EEG samples".into()));
        }
        Ok(Self {
            data,
            channel_labels,
        })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.channel_labels
    }

    pub fn sample_rate_hz(&self) -> u32 {
        EEG_RATE_HZ
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            data: &self.data * gain,
            channel_labels: self.channel_labels.clone(),
        }
    }
}

/// Artifact-removal stage run after filtering. The default does nothing;
/// an ICA-based cleaner can be plugged in here.
pub trait ArtifactRemoval: Sync {
    fn clean(&self, x: EegRecording) -> Result<EegRecording>;
}

pub struct NoArtifactRemoval;

impl ArtifactRemoval for NoArtifactRemoval {
    fn clean(&self, x: EegRecording) -> Result<EegRecording> {
        Ok(x)
    }
}

struct Filters {
    bandpass: SosFilter,
    notch: SosFilter,
}

fn filters() -> &'static Filters {
    static FILTERS: OnceLock<Filters> = OnceLock::new();
    FILTERS.get_or_init(|| Filters {
        bandpass: design_iir(&IirFilterSpec::bandpass(4, 0.1, 70.0, EEG_RATE_HZ))
            .expect("EEG band-pass spec"),
        notch: design_iir(&IirFilterSpec::notch(60.0, 30.0, EEG_RATE_HZ)).expect("notch spec"),
    })
}

/// Band-pass then notch every channel.
pub fn preprocess_eeg(x: &EegRecording) -> Result<EegRecording> {
    preprocess_eeg_with(x, &NoArtifactRemoval, Exec::default())
}

pub fn preprocess_eeg_with(
    x: &EegRecording,
    artifacts: &dyn ArtifactRemoval,
    exec: Exec,
) -> Result<EegRecording> {
    let f = filters();
    let rows: Vec<Vec<f64>> = par::map_range(exec, EEG_CHANNELS, |c| {
        let row = x.data.row(c).to_vec();
        f.notch.apply_slice(&f.bandpass.apply_slice(&row))
    });
    let mut data = Array2::zeros(x.data.raw_dim());
    for (c, row) in rows.into_iter().enumerate() {
        data.row_mut(c).assign(&ndarray::Array1::from(row));
    }
    artifacts.clean(EegRecording::with_labels(data, x.channel_labels.clone())?)
}

/// 155-wide features at 100 Hz: `floor((samples − 100)/10) + 1` frames.
pub fn extract_eeg_features(x: &EegRecording) -> Result<FeatureSequence> {
    FeatureExtractor::standard().extract(x, Exec::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::EEG_WIDTH;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn noise_recording(samples: usize, seed: u64) -> EegRecording {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, 10.0).unwrap();
        EegRecording::new(Array2::from_shape_fn((EEG_CHANNELS, samples), |_| {
            n.sample(&mut rng)
        }))
        .unwrap()
    }

    fn sine_recording(freq: f64, samples: usize) -> EegRecording {
        EegRecording::new(Array2::from_shape_fn((EEG_CHANNELS, samples), |(_, i)| {
            (2.0 * PI * freq * i as f64 / 1000.0).sin()
        }))
        .unwrap()
    }

    fn rms(x: ndarray::ArrayView1<f64>) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn recording_shape_is_validated() {
        assert!(EegRecording::new(Array2::zeros((32, 100))).is_err());
        assert!(EegRecording::new(Array2::zeros((31, 100))).is_ok());
        assert_eq!(CHANNEL_LABELS.len(), 31);
    }

    #[test]
    fn mains_hum_is_notched() {
        let x = sine_recording(60.0, 5000);
        let y = preprocess_eeg(&x).unwrap();
        let tail = ndarray::s![2000..];
        assert!(rms(y.data().row(0).slice(tail)) <= 0.1 * rms(x.data().row(0).slice(tail)));
    }

    #[test]
    fn zero_recording_stays_zero() {
        let x = EegRecording::new(Array2::zeros((EEG_CHANNELS, 1000))).unwrap();
        let y = preprocess_eeg(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn out_of_band_tone_is_attenuated() {
        let x = sine_recording(300.0, 5000);
        let y = preprocess_eeg(&x).unwrap();
        // oracle: designed band-pass response at 300 Hz
        let designed = filters().bandpass.gain_db(300.0);
        assert!(designed <= -20.0);
        let tail = ndarray::s![1000..];
        let measured =
            20.0 * (rms(y.data().row(3).slice(tail)) / rms(x.data().row(3).slice(tail))).log10();
        assert!(measured <= -20.0, "measured {measured} dB");
    }

    #[test]
    fn one_second_gives_91_frames() {
        let f = extract_eeg_features(&noise_recording(1000, 1)).unwrap();
        assert_eq!((f.len(), f.width()), (91, EEG_WIDTH));
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(extract_eeg_features(&noise_recording(99, 1)).is_err());
    }

    #[test]
    fn zero_recording_features_follow_conventions() {
        let x = EegRecording::new(Array2::zeros((EEG_CHANNELS, 400))).unwrap();
        let f = extract_eeg_features(&x).unwrap();
        assert!(f.frames().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_and_exec_independent() {
        let x = noise_recording(1500, 9);
        let a = FeatureExtractor::standard()
            .extract(&x, Exec::Parallel)
            .unwrap();
        let b = FeatureExtractor::standard()
            .extract(&x, Exec::Sequential)
            .unwrap();
        let c = extract_eeg_features(&x).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn column_layout() {
        let x = noise_recording(300, 4);
        let f = extract_eeg_features(&x).unwrap();
        for c in [0usize, 7, 30] {
            for (j, kind) in EegFeature::ALL.iter().enumerate() {
                assert_eq!(kind.column(c), 5 * c + j);
                let w: Vec<f64> = x.data().row(c).iter().skip(20).take(100).copied().collect();
                let direct = window_feature(&w, *kind).unwrap();
                assert_eq!(f.frames()[[2, kind.column(c)]], direct);
            }
        }
    }

    #[test]
    fn amplitude_scaling() {
        let x = noise_recording(400, 5);
        let alpha = 3.7;
        let a = extract_eeg_features(&x).unwrap();
        let b = extract_eeg_features(&x.scaled(alpha)).unwrap();
        for c in 0..EEG_CHANNELS {
            for t in 0..a.len() {
                let get = |f: &FeatureSequence, k: EegFeature| f.frames()[[t, k.column(c)]];
                let tol = |v: f64| 1e-9 * v.abs().max(1.0);
                let rms_a = get(&a, EegFeature::Rms);
                assert!((get(&b, EegFeature::Rms) - alpha * rms_a).abs() <= tol(alpha * rms_a));
                let mwa_a = get(&a, EegFeature::MovingAverage);
                assert!(
                    (get(&b, EegFeature::MovingAverage) - alpha * mwa_a).abs()
                        <= tol(alpha * mwa_a)
                );
                for k in [
                    EegFeature::ZeroCrossingRate,
                    EegFeature::Kurtosis,
                    EegFeature::SpectralEntropy,
                ] {
                    assert!((get(&b, k) - get(&a, k)).abs() <= 1e-9, "{k:?}");
                }
            }
        }
    }

    #[test]
    fn feature_ranges() {
        let x = preprocess_eeg(&noise_recording(800, 6)).unwrap();
        let f = extract_eeg_features(&x).unwrap();
        for c in 0..EEG_CHANNELS {
            for t in 0..f.len() {
                assert!(f.frames()[[t, EegFeature::Rms.column(c)]] >= 0.0);
                assert!(f.frames()[[t, EegFeature::SpectralEntropy.column(c)]] >= 0.0);
                let z = f.frames()[[t, EegFeature::ZeroCrossingRate.column(c)]];
                assert!((0.0..=1.0).contains(&z));
            }
        }
    }
}
