use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{mix_background, synth_utterance_for, SynthParams};
use crate::io::{write_eeg, write_wav};
use crate::par::{self, Exec};
use crate::seed::{self, stream};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Who speaks what, and how many utterances each split gets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusLayout {
    pub preset: String,
    pub train_subjects: Vec<u32>,
    pub test_subjects: Vec<u32>,
    pub sentences: u32,
    pub train_utterances: usize,
    pub test_utterances: usize,
}

impl CorpusLayout {
    /// 4 subjects shared by both splits, 10 sentences, 50 train / 20 test.
    pub fn desk() -> Self {
        Self {
            preset: "desk".into(),
            train_subjects: (0..4).collect(),
            test_subjects: (0..4).collect(),
            sentences: 10,
            train_utterances: 50,
            test_utterances: 20,
        }
    }

    /// 10 train subjects and 8 test subjects (2 shared), 30 sentences × 3 repetitions each.
    pub fn full_scale() -> Self {
        Self {
            preset: "full-scale".into(),
            train_subjects: (0..10).collect(),
            test_subjects: (8..16).collect(),
            sentences: 30,
            train_utterances: 10 * 30 * 3,
            test_utterances: 8 * 30 * 3,
        }
    }

    /// Smallest useful corpus, for smoke and determinism runs.
    pub fn tiny() -> Self {
        Self {
            preset: "tiny".into(),
            train_subjects: vec![0, 1],
            test_subjects: vec![0, 1],
            sentences: 3,
            train_utterances: 6,
            test_utterances: 3,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full-scale" => Ok(Self::full_scale()),
            "tiny" => Ok(Self::tiny()),
            other => Err(Error::InvalidInput(format!(
                "unknown preset {other:?} (desk|full-scale|tiny)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_utterances == 0 || self.test_utterances == 0 {
            return Err(Error::InvalidInput(
                "each split needs at least one utterance".into(),
            ));
        }
        if self.train_subjects.is_empty() || self.test_subjects.is_empty() || self.sentences == 0 {
            return Err(Error::InvalidInput(
                "need at least one subject per split and one sentence".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    pub subject_id: u32,
    pub sentence_id: u32,
    pub split: Split,
    pub seed: u64,
    /// Paths are relative to the manifest's directory.
    pub clean_wav: String,
    pub noisy_wav: Option<String>,
    pub eeg: String,
    /// Test utterance whose subject also appears in the training split.
    pub subject_in_train: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format_version: u32,
    pub master_seed: u64,
    pub seed_rule: String,
    pub params: SynthParams,
    pub layout: CorpusLayout,
    pub utterances: Vec<UtteranceRecord>,
}

impl CorpusManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_json()?).map_err(|e| Error::from(e).at(&path))?;
        Ok(path)
    }

    /// Parses a manifest and checks ids are unique and every file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::from(e).at(path))?;
        let root = path.parent().unwrap_or(Path::new("."));
        let mut ids = HashSet::new();
        for u in &m.utterances {
            if !ids.insert(&u.id) {
                return Err(
                    Error::InvalidInput(format!("duplicate utterance id {}", u.id)).at(path),
                );
            }
            for rel in [Some(&u.clean_wav), u.noisy_wav.as_ref(), Some(&u.eeg)]
                .into_iter()
                .flatten()
            {
                let p = root.join(rel);
                if !p.is_file() {
                    return Err(Error::InvalidInput(format!(
                        "{}: missing file {}",
                        u.id,
                        p.display()
                    ))
                    .at(path));
                }
            }
        }
        Ok(m)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &UtteranceRecord> {
        self.utterances.iter().filter(move |u| u.split == split)
    }
}

fn records(layout: &CorpusLayout, master_seed: u64) -> Vec<UtteranceRecord> {
    let mut out = Vec::with_capacity(layout.train_utterances + layout.test_utterances);
    let train_set: HashSet<u32> = layout.train_subjects.iter().copied().collect();
    for (split, subjects, count) in [
        (
            Split::Train,
            &layout.train_subjects,
            layout.train_utterances,
        ),
        (Split::Test, &layout.test_subjects, layout.test_utterances),
    ] {
        for i in 0..count {
            let subject = subjects[i % subjects.len()];
            let sentence = (i / subjects.len()) as u32 % layout.sentences;
            let global = out.len() as u64;
            let id = format!("{}_{i:04}_s{subject:02}_t{sentence:02}", split.as_str());
            let dir = split.as_str();
            let (clean_wav, noisy_wav) = match split {
                Split::Train => (format!("{dir}/{id}.wav"), None),
                Split::Test => (
                    format!("{dir}/{id}.clean.wav"),
                    Some(format!("{dir}/{id}.noisy.wav")),
                ),
            };
            out.push(UtteranceRecord {
                eeg: format!("{dir}/{id}.eeg"),
                id,
                subject_id: subject,
                sentence_id: sentence,
                split,
                seed: seed::derive(master_seed, stream::UTTERANCE, global),
                clean_wav,
                noisy_wav,
                subject_in_train: split == Split::Test && train_set.contains(&subject),
            });
        }
    }
    out
}

/// Generates every utterance, writes audio and EEG under `out_dir` and
/// saves the manifest there.
pub fn build_corpus(
    params: &SynthParams,
    layout: &CorpusLayout,
    out_dir: &Path,
    exec: Exec,
) -> Result<CorpusManifest> {
    params.validate()?;
    layout.validate()?;
    for sub in ["train", "test"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::from(e).at(&d))?;
    }
    let recs = records(layout, params.seed);
    par::try_map(exec, &recs, |r| -> Result<()> {
        let u = synth_utterance_for(params, r.subject_id, r.sentence_id, r.seed)?;
        write_wav(&out_dir.join(&r.clean_wav), &u.clean)?;
        write_eeg(&out_dir.join(&r.eeg), &u.eeg)?;
        if let Some(noisy) = &r.noisy_wav {
            let mixed = mix_background(
                &u.clean,
                params.background_kind,
                params.background_level_db,
                seed::derive(r.seed, stream::NOISE, 0),
            )?;
            write_wav(&out_dir.join(noisy), &mixed)?;
        }
        Ok(())
    })?;
    let manifest = CorpusManifest {
        format_version: FORMAT_VERSION,
        master_seed: params.seed,
        seed_rule: "utterance seed = master ^ splitmix64(UTTERANCE ^ splitmix64(index)), index over train then test"
            .into(),
        params: params.clone(),
        layout: layout.clone(),
        utterances: recs,
    };
    manifest.save(out_dir)?;
    Ok(manifest)
}
