//! EEG-conditioned spoken-speech enhancement.
//!
//! The crate covers the whole chain from raw signals to scores:
//!
//! ```text
//! speech @16 kHz ──► dsp::mfcc ─────────────┐
//!                                           ├─► models::{LstmRegression, Gan} ──► dsp::mfcc_invert ──► dsp::griffin_lim ──► metrics
//! EEG @1000 Hz ──► eeg::preprocess ──► eeg::extract_features ──► dimred::KpcaModel ─┘
//! ```
//!
//! Everything is `f64`, seeded, and deterministic. Per-utterance and
//! per-channel stages run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain iterators otherwise; see [`par`].
//!
//! Real paired EEG/speech recordings are not bundled. [`synth`] generates a
//! seeded stand-in corpus with a known EEG-to-speech coupling, and
//! [`pipeline`] wires synth → extract → train → enhance → evaluate.

pub mod baseline;
pub mod dimred;
pub mod dsp;
pub mod eeg;
pub mod error;
pub mod features;
pub mod io;
pub mod metrics;
pub mod models;
pub mod neural;
pub mod par;
pub mod pipeline;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
pub use features::{FeatureKind, FeatureSequence};
