use ndarray::{concatenate, Array2, Axis};

use super::{ensure_dir, load_manifest, ExperimentConfig, Paths};
use crate::baseline::FrameTable;
use crate::dsp::mfcc;
use crate::eeg::{preprocess_eeg_with, EegRecording, FeatureExtractor, NoArtifactRemoval};
use crate::features::{align_pair, FeatureKind, FeatureSequence};
use crate::io::{read_eeg, read_features, read_wav, write_features};
use crate::par::{self, Exec};
use crate::seed::{self, stream};
use crate::synth::{corrupt_mfcc, CorpusManifest, Split, UtteranceRecord};
use crate::Result;

use super::reducer::EegReducer;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractSummary {
    pub utterances: usize,
    pub train_frames: usize,
    pub reduced_width: usize,
    /// Cumulative explained-variance fractions, kernel PCA then linear PCA.
    pub kpca_variance: Vec<f64>,
    pub pca_variance: Vec<f64>,
}

struct Extracted {
    input: FeatureSequence,
    clean: Option<FeatureSequence>,
    eeg: FeatureSequence,
}

pub(crate) fn eeg155(rec: &EegRecording) -> Result<FeatureSequence> {
    let filtered = preprocess_eeg_with(rec, &NoArtifactRemoval, Exec::Sequential)?;
    FeatureExtractor::standard().extract(&filtered, Exec::Sequential)
}

pub(crate) fn train_records<'a>(
    m: &'a CorpusManifest,
    config: &ExperimentConfig,
) -> Vec<&'a UtteranceRecord> {
    m.split(Split::Train)
        .filter(|u| {
            config
                .subjects
                .as_ref()
                .is_none_or(|s| s.contains(&u.subject_id))
        })
        .collect()
}

fn extract_one(paths: &Paths, u: &UtteranceRecord) -> Result<Extracted> {
    let clean = mfcc(&read_wav(&paths.corpus.join(&u.clean_wav))?)?;
    let eeg = eeg155(&read_eeg(&paths.corpus.join(&u.eeg))?)?;
    Ok(match &u.noisy_wav {
        None => {
            let (input, eeg) = align_pair(&clean, &eeg);
            Extracted {
                input,
                clean: None,
                eeg,
            }
        }
        Some(noisy) => {
            let noisy = mfcc(&read_wav(&paths.corpus.join(noisy))?)?;
            let n = noisy.len().min(clean.len()).min(eeg.len());
            Extracted {
                input: noisy.truncated(n),
                clean: Some(clean.truncated(n)),
                eeg: eeg.truncated(n),
            }
        }
    })
}

/// MFCC and EEG features for every utterance, then the EEG reducer fitted
/// on the training split. Training utterances store their clean MFCC as
/// `<id>.mfcc13`; test utterances store the noisy input there and the clean
/// reference as `<id>.clean.mfcc13`. All sequences of one utterance are
/// truncated to a common length.
pub fn cmd_extract(config: &ExperimentConfig, exec: Exec) -> Result<ExtractSummary> {
    config.validate()?;
    let paths = Paths::new(config);
    let m = load_manifest(&paths)?;
    ensure_dir(&paths.features())?;
    let t = std::time::Instant::now();
    let out = par::try_map(exec, &m.utterances, |u| extract_one(&paths, u))?;
    for (u, e) in m.utterances.iter().zip(&out) {
        write_features(&paths.feature(&u.id, "mfcc13"), &e.input)?;
        if let Some(c) = &e.clean {
            write_features(&paths.feature(&u.id, "clean.mfcc13"), c)?;
        }
        write_features(&paths.feature(&u.id, "eeg155"), &e.eeg)?;
    }
    log::info!(
        "extracted features of {} utterances in {:.1}s",
        out.len(),
        t.elapsed().as_secs_f64()
    );

    let train_ids: std::collections::HashSet<&str> = train_records(&m, config)
        .iter()
        .map(|u| u.id.as_str())
        .collect();
    let views: Vec<_> = m
        .utterances
        .iter()
        .zip(&out)
        .filter(|(u, _)| train_ids.contains(u.id.as_str()))
        .map(|(_, e)| e.eeg.frames())
        .collect();
    if views.is_empty() {
        return Err(crate::Error::InvalidInput(
            "no training utterances selected".into(),
        ));
    }
    let stacked = concatenate(Axis(0), &views).expect("equal widths");
    let f = &config.features;
    let t = std::time::Instant::now();
    let reducer = EegReducer::fit(
        stacked.view(),
        f.kpca_components,
        f.kpca_fit_rows,
        f.kernel,
        config.seed,
        exec,
    )?;
    reducer.save(&paths.reducer())?;
    log::info!(
        "kernel PCA on {} of {} frames -> {} components in {:.1}s",
        reducer.kpca().training_points().nrows(),
        stacked.nrows(),
        reducer.output_dim(),
        t.elapsed().as_secs_f64()
    );
    let kcurve = reducer.kpca().explained_variance();
    let pcurve = crate::dimred::pca_explained_variance(reducer.standardize(stacked.view()).view())?;
    super::write_text(
        &paths.features().join("kpca_explained_variance.csv"),
        &kcurve.to_csv(),
    )?;
    super::write_text(
        &paths.features().join("pca_explained_variance.csv"),
        &pcurve.to_csv(),
    )?;

    let reduced = par::try_map(exec, &out, |e| reducer.transform(&e.eeg, Exec::Sequential))?;
    for (u, r) in m.utterances.iter().zip(&reduced) {
        write_features(&paths.feature(&u.id, "eeg30"), r)?;
    }
    Ok(ExtractSummary {
        utterances: out.len(),
        train_frames: stacked.nrows(),
        reduced_width: reducer.output_dim(),
        kpca_variance: kcurve.cumulative,
        pca_variance: pcurve.cumulative,
    })
}

pub(crate) fn eeg_ext(config: &ExperimentConfig) -> &'static str {
    match config.features.eeg_input {
        FeatureKind::Eeg155 => "eeg155",
        _ => "eeg30",
    }
}

/// Frame tables for the ridge baseline. Training inputs are the clean MFCC
/// plus the training-time Gaussian corruption; test inputs are the MFCC of
/// the mixed audio.
pub fn load_frame_tables(config: &ExperimentConfig) -> Result<(FrameTable, FrameTable)> {
    let paths = Paths::new(config);
    let m = load_manifest(&paths)?;
    let ext = eeg_ext(config);
    let stack = |parts: Vec<FeatureSequence>| -> Array2<f64> {
        let v: Vec<_> = parts.iter().map(|p| p.frames()).collect();
        concatenate(Axis(0), &v).expect("equal widths")
    };
    let mut train = (Vec::new(), Vec::new(), Vec::new());
    for (i, u) in train_records(&m, config).into_iter().enumerate() {
        let clean = read_features(&paths.feature(&u.id, "mfcc13"))?;
        let sigma = config.lstm.noise_sigma;
        train.0.push(corrupt_mfcc(
            &clean,
            sigma,
            seed::derive(config.seed, stream::MFCC_NOISE, i as u64),
        )?);
        train.1.push(read_features(&paths.feature(&u.id, ext))?);
        train.2.push(clean);
    }
    let mut test = (Vec::new(), Vec::new(), Vec::new());
    for u in m.split(Split::Test) {
        test.0.push(read_features(&paths.feature(&u.id, "mfcc13"))?);
        test.1.push(read_features(&paths.feature(&u.id, ext))?);
        test.2
            .push(read_features(&paths.feature(&u.id, "clean.mfcc13"))?);
    }
    let table = |t: (Vec<_>, Vec<_>, Vec<_>)| FrameTable {
        noisy: stack(t.0),
        eeg: stack(t.1),
        clean: stack(t.2),
    };
    Ok((table(train), table(test)))
}
