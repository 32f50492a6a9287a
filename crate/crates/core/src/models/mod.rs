//! The two enhancement models and their training loops.
//!
//! * [`LstmRegression`]: (noisy MFCC ⊕ EEG) → LSTM → LSTM → per-step dense → clean MFCC, trained on MSE.
//! * [`Generator`] / [`Discriminator`]: parallel MFCC and EEG LSTMs merged
//!   into a third LSTM. The generator ends in a per-step dense layer; the
//!   discriminator reads the last valid step into a single sigmoid unit.
//!
//! Networks see features standardized by a [`Normalizer`] fitted on the
//! clean training split; Gaussian corruption is applied in raw MFCC units
//! before standardization.

mod data;
mod gan;
mod nets;
mod regression;

pub use data::{Batch, Normalizer, Segment, TrainingSet, UtterancePair};
pub use gan::{
    discriminator_loss, gan_losses, generator_loss, train_gan, GanLossRow, GanState, PROB_CLAMP,
};
pub use nets::{
    Discriminator, DiscriminatorCache, Generator, GeneratorCache, LstmRegression, RegressionCache,
};
pub use regression::{train_lstm_regression, LossRow, RegressionState};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::features::{FeatureKind, FeatureSequence, MFCC_WIDTH};
use crate::neural::AdamConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lstm,
    Gan,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Gan => "gan",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(ModelKind::Lstm),
            "gan" => Ok(ModelKind::Gan),
            other => Err(Error::InvalidInput(format!(
                "unknown model {other:?} (lstm|gan)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// LSTM regression, or the generator.
    pub lr: f64,
    pub lr_discriminator: f64,
    /// Frames per training segment.
    pub seq_len: usize,
    pub hidden: usize,
    /// Std-dev of the Gaussian MFCC corruption, raw MFCC units.
    pub noise_sigma: f64,
    pub clip_norm: Option<f64>,
    pub seed: u64,
    /// Train only the discriminator (diagnostic).
    #[serde(default)]
    pub freeze_generator: bool,
}

impl TrainConfig {
    /// 1000 epochs, batch 100, Adam lr 1e-3.
    pub fn reference_lstm() -> Self {
        Self {
            epochs: 1000,
            batch_size: 100,
            lr: 1e-3,
            lr_discriminator: 1e-4,
            seq_len: 200,
            hidden: 128,
            noise_sigma: 10.0,
            clip_norm: None,
            seed: 0,
            freeze_generator: false,
        }
    }

    /// 200 epochs, batch 32, Adam lr 1e-4 for both networks.
    pub fn reference_gan() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            lr: 1e-4,
            lr_discriminator: 1e-4,
            ..Self::reference_lstm()
        }
    }

    pub fn reference(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Lstm => Self::reference_lstm(),
            ModelKind::Gan => Self::reference_gan(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::InvalidInput(
                "epochs, batch size and hidden size must be ≥ 1".into(),
            ));
        }
        if self.seq_len < 2 {
            return Err(Error::InvalidInput("sequence length must be ≥ 2".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidInput(
                "noise sigma must be finite and ≥ 0".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr_discriminator > 0.0) {
            return Err(Error::InvalidInput(
                "learning rates must be positive".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            clip_norm: self.clip_norm,
            ..AdamConfig::with_lr(lr)
        }
    }
}

/// Trained network plus the feature standardization it expects.
#[derive(Debug, Clone, PartialEq)]
pub enum EnhancerNet {
    Lstm(LstmRegression),
    Gan(Generator),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enhancer {
    pub net: EnhancerNet,
    pub normalizer: Normalizer,
}

impl Enhancer {
    pub fn kind(&self) -> ModelKind {
        match self.net {
            EnhancerNet::Lstm(_) => ModelKind::Lstm,
            EnhancerNet::Gan(_) => ModelKind::Gan,
        }
    }

    pub fn eeg_dim(&self) -> usize {
        self.normalizer.eeg_dim()
    }

    /// Enhanced MFCC for one utterance (equal frame counts required).
    pub fn enhance(
        &self,
        mfcc: &FeatureSequence,
        eeg: &FeatureSequence,
    ) -> Result<FeatureSequence> {
        if mfcc.kind() != FeatureKind::Mfcc13 {
            return Err(Error::InvalidInput(
                "enhance expects mfcc13 as the first input".into(),
            ));
        }
        if eeg.width() != self.eeg_dim() {
            return Err(Error::Shape(format!(
                "model expects {}-wide EEG features, got {}",
                self.eeg_dim(),
                eeg.width()
            )));
        }
        if mfcc.len() != eeg.len() {
            return Err(Error::Shape(format!(
                "frame counts differ: {} MFCC vs {} EEG",
                mfcc.len(),
                eeg.len()
            )));
        }
        if mfcc.is_empty() {
            return FeatureSequence::new(FeatureKind::Mfcc13, Array2::zeros((0, MFCC_WIDTH)));
        }
        let m = self.normalizer.mfcc_in(mfcc.frames()).insert_axis(Axis(0));
        let e = self.normalizer.eeg_in(eeg.frames()).insert_axis(Axis(0));
        let out = match &self.net {
            EnhancerNet::Lstm(net) => net.forward(m.view(), e.view())?.0,
            EnhancerNet::Gan(net) => net.forward(m.view(), e.view())?.0,
        };
        let out = out.index_axis_move(Axis(0), 0);
        FeatureSequence::new(FeatureKind::Mfcc13, self.normalizer.mfcc_out(out.view()))
    }
}
