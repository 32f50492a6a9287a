use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use neurovox::io::{read_features, read_wav};
use neurovox::models::ModelKind;
use neurovox::par::Exec;
use neurovox::pipeline::{
    cmd_enhance, cmd_evaluate, cmd_extract, cmd_synth, cmd_train, EnhanceOptions, ExperimentConfig,
    TrainOptions,
};
use neurovox::synth::{CorpusManifest, Split};

fn tiny_in(root: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::tiny();
    c.corpus_dir = root.join("data");
    c.work_dir = root.join("runs");
    c
}

fn prepared(root: &Path) -> ExperimentConfig {
    let c = tiny_in(root);
    cmd_synth(&c, Exec::default()).unwrap();
    cmd_extract(&c, Exec::default()).unwrap();
    c
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            out.insert(p.file_name().unwrap().into(), fs::read(&p).unwrap());
        }
    }
    out
}

fn manifest(c: &ExperimentConfig) -> CorpusManifest {
    CorpusManifest::load(&c.corpus_dir.join("manifest.json")).unwrap()
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "json") {
            let c = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            c.validate().unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 3);
    let desk = ExperimentConfig::load(&dir.join("desk.json")).unwrap();
    assert_eq!(desk.lstm, ExperimentConfig::desk().lstm);
    assert_eq!(desk.gan, ExperimentConfig::desk().gan);
}

#[test]
fn extract_writes_aligned_features_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let c = prepared(tmp.path());
    let features = c.work_dir.join("features");
    for u in &manifest(&c).utterances {
        let m = read_features(&features.join(format!("{}.mfcc13", u.id))).unwrap();
        let e = read_features(&features.join(format!("{}.eeg30", u.id))).unwrap();
        assert_eq!(m.len(), e.len(), "{}", u.id);
        assert_eq!(e.width(), 30);
        if u.split == Split::Test {
            let clean = read_features(&features.join(format!("{}.clean.mfcc13", u.id))).unwrap();
            assert_eq!(clean.len(), m.len());
        }
    }
    let curve = fs::read_to_string(features.join("kpca_explained_variance.csv")).unwrap();
    let values: Vec<f64> = curve
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(!values.is_empty());
    assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(*values.last().unwrap() <= 1.0 + 1e-9);

    let before = files(&features);
    cmd_extract(&c, Exec::Sequential).unwrap();
    assert_eq!(before, files(&features));
}

fn resume_matches(model: ModelKind) {
    let tmp = tempfile::tempdir().unwrap();
    let c = prepared(tmp.path());
    let models = c.work_dir.join("models");

    cmd_train(&c, model, TrainOptions::default()).unwrap();
    let full = files(&models);
    fs::remove_dir_all(&models).unwrap();

    let s = cmd_train(
        &c,
        model,
        TrainOptions {
            resume: false,
            stop_after: Some(1),
        },
    )
    .unwrap();
    assert_eq!(s.epochs_done, 1);
    let s = cmd_train(
        &c,
        model,
        TrainOptions {
            resume: true,
            stop_after: None,
        },
    )
    .unwrap();
    assert_eq!(s.epochs_done, c.train_config(model).epochs);
    let resumed = files(&models);
    assert_eq!(
        full.keys().collect::<Vec<_>>(),
        resumed.keys().collect::<Vec<_>>()
    );
    for (name, bytes) in &full {
        if name.extension().is_some_and(|e| e == "csv") {
            assert_eq!(
                String::from_utf8_lossy(bytes),
                String::from_utf8_lossy(&resumed[name]),
                "{}",
                name.display()
            );
        }
        assert!(
            bytes == &resumed[name],
            "{} differs after resume",
            name.display()
        );
    }
}

#[test]
fn lstm_resume_matches_uninterrupted_run() {
    resume_matches(ModelKind::Lstm);
}

#[test]
fn gan_resume_matches_uninterrupted_run() {
    resume_matches(ModelKind::Gan);
}

#[test]
fn changed_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let c = prepared(tmp.path());
    cmd_train(&c, ModelKind::Lstm, TrainOptions::default()).unwrap();

    let mut changed = c.clone();
    changed.lstm.hidden += 1;
    let resume = TrainOptions {
        resume: true,
        stop_after: None,
    };
    assert!(cmd_train(&changed, ModelKind::Lstm, resume).is_err());
    assert!(cmd_enhance(
        &changed,
        ModelKind::Lstm,
        &EnhanceOptions::default(),
        Exec::default()
    )
    .is_err());

    // a GAN checkpoint passed off as the LSTM
    cmd_train(&c, ModelKind::Gan, TrainOptions::default()).unwrap();
    let wrong = EnhanceOptions {
        checkpoint: Some(c.work_dir.join("models/gan.ckpt")),
        out_dir: None,
    };
    assert!(cmd_enhance(&c, ModelKind::Lstm, &wrong, Exec::default()).is_err());

    // more epochs do not change the hash
    let mut longer = c.clone();
    longer.lstm.epochs += 1;
    let s = cmd_train(&longer, ModelKind::Lstm, resume).unwrap();
    assert_eq!(s.epochs_done, longer.lstm.epochs);
}

#[test]
fn enhance_and_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let c = prepared(tmp.path());
    cmd_train(&c, ModelKind::Lstm, TrainOptions::default()).unwrap();
    let written = cmd_enhance(
        &c,
        ModelKind::Lstm,
        &EnhanceOptions::default(),
        Exec::default(),
    )
    .unwrap();
    let m = manifest(&c);
    let tests: Vec<_> = m.split(Split::Test).collect();
    assert_eq!(written.len(), tests.len());
    for u in &tests {
        let noisy = read_wav(&c.corpus_dir.join(u.noisy_wav.as_ref().unwrap())).unwrap();
        let enhanced = read_wav(&c.work_dir.join(format!("enhanced/lstm/{}.wav", u.id))).unwrap();
        assert!(
            noisy.len().abs_diff(enhanced.len()) <= 160,
            "{}: {} vs {}",
            u.id,
            noisy.len(),
            enhanced.len()
        );
    }

    // an explicit checkpoint and output directory reproduce the same bytes
    let again = tmp.path().join("again");
    let opts = EnhanceOptions {
        checkpoint: Some(c.work_dir.join("models/lstm.ckpt")),
        out_dir: Some(again.clone()),
    };
    cmd_enhance(&c, ModelKind::Lstm, &opts, Exec::Sequential).unwrap();
    assert_eq!(files(&again), files(&c.work_dir.join("enhanced/lstm")));

    let s = cmd_evaluate(&c, &[ModelKind::Lstm], Exec::default()).unwrap();
    let r = &s.reports[0];
    assert_eq!(r.records.len(), tests.len());
    assert!(r.missing.is_empty());
    assert_eq!(s.gan_ge_lstm, None);
    let n = r.records.len() as f64;
    let mean = |f: fn(&neurovox::metrics::UtteranceMetrics) -> f64| {
        r.records.iter().map(f).sum::<f64>() / n
    };
    assert!((mean(|m| m.stoi_enhanced) - r.means.stoi_enhanced).abs() < 1e-12);
    assert!((mean(|m| m.snr_noisy) - r.means.snr_noisy).abs() < 1e-12);
    let reports = c.work_dir.join("reports");
    let csv = fs::read_to_string(reports.join("lstm_metrics.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    for col in ["snr_noisy", "snr_enhanced", "stoi_noisy", "stoi_enhanced"] {
        assert!(header.split(',').any(|h| h == col), "{header}");
    }
    assert!(reports.join("comparison.md").is_file());

    // a missing enhanced file is listed and the rest still scored
    let gone = &tests[0].id;
    fs::remove_file(c.work_dir.join(format!("enhanced/lstm/{gone}.wav"))).unwrap();
    let s = cmd_evaluate(&c, &[ModelKind::Lstm], Exec::default()).unwrap();
    assert_eq!(s.reports[0].records.len(), tests.len() - 1);
    assert_eq!(&s.reports[0].missing, &vec![gone.clone()]);
    let md = fs::read_to_string(reports.join("comparison.md")).unwrap();
    assert!(md.contains(gone.as_str()));
}

#[test]
fn evaluate_without_enhanced_audio_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let c = prepared(tmp.path());
    assert!(cmd_evaluate(&c, &[ModelKind::Gan], Exec::default()).is_err());
}

#[test]
fn synth_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = tiny_in(a.path());
    let cb = tiny_in(b.path());
    cmd_synth(&ca, Exec::Parallel).unwrap();
    cmd_synth(&cb, Exec::Sequential).unwrap();
    let m = manifest(&ca);
    assert_eq!(m, manifest(&cb));
    for u in &m.utterances {
        for rel in [Some(&u.clean_wav), u.noisy_wav.as_ref(), Some(&u.eeg)]
            .into_iter()
            .flatten()
        {
            assert_eq!(
                fs::read(ca.corpus_dir.join(rel)).unwrap(),
                fs::read(cb.corpus_dir.join(rel)).unwrap(),
                "{rel}"
            );
        }
    }
}
