use std::path::Path;

use super::{load_manifest, write_text, ExperimentConfig, Paths};
use crate::io::read_wav;
use crate::metrics::{
    pesq_external, snr_mean_std, spectral_convergence, stoi, MetricReport, UtteranceMetrics,
};
use crate::models::ModelKind;
use crate::par::{self, Exec};
use crate::synth::Split;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationSummary {
    pub reports: Vec<MetricReport>,
    /// Mean enhanced STOI of the GAN is at least the LSTM's, when both were evaluated.
    pub gan_ge_lstm: Option<bool>,
}

fn pesq(clean: &Path, degraded: &Path, template: Option<&str>) -> Option<f64> {
    template.and_then(|t| pesq_external(clean, degraded, Some(t)).score())
}

fn evaluate_model(
    config: &ExperimentConfig,
    paths: &Paths,
    model: ModelKind,
    exec: Exec,
) -> Result<MetricReport> {
    let m = load_manifest(paths)?;
    let tests: Vec<_> = m.split(Split::Test).collect();
    let dir = paths.enhanced(model);
    let (present, absent): (Vec<_>, Vec<_>) = tests
        .into_iter()
        .partition(|u| dir.join(format!("{}.wav", u.id)).is_file());
    if present.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no enhanced files for {} in {}",
            model.as_str(),
            dir.display()
        )));
    }
    let missing: Vec<String> = absent.iter().map(|u| u.id.clone()).collect();
    if !missing.is_empty() {
        log::warn!(
            "{}: {} enhanced file(s) missing, scoring the remaining {}:\n  {}",
            model.as_str(),
            missing.len(),
            present.len(),
            absent
                .iter()
                .map(|u| dir.join(format!("{}.wav", u.id)).display().to_string())
                .collect::<Vec<_>>()
                .join("\n  ")
        );
    }
    let template = config.pesq_command.as_deref();
    let records = par::try_map(exec, &present, |u| {
        let clean_path = paths.corpus.join(&u.clean_wav);
        let noisy_path = paths
            .corpus
            .join(u.noisy_wav.as_ref().expect("test split has noisy audio"));
        let enh_path = dir.join(format!("{}.wav", u.id));
        let clean = read_wav(&clean_path)?;
        let noisy = read_wav(&noisy_path)?;
        let enhanced = read_wav(&enh_path)?;
        let at = |e: Error| e.at(&enh_path);
        Ok::<_, Error>(UtteranceMetrics {
            id: u.id.clone(),
            snr_noisy: snr_mean_std(&noisy)?,
            snr_enhanced: snr_mean_std(&enhanced).map_err(at)?,
            stoi_noisy: stoi(&clean, &noisy)?,
            stoi_enhanced: stoi(&clean, &enhanced).map_err(at)?,
            spectral_convergence: spectral_convergence(&clean, &enhanced).map_err(at)?,
            pesq_noisy: pesq(&clean_path, &noisy_path, template),
            pesq_enhanced: pesq(&clean_path, &enh_path, template),
        })
    })?;
    let mut report = MetricReport::new(model.as_str(), records);
    report.missing = missing;
    Ok(report)
}

/// Corpus means of every report side by side, as CSV and Markdown.
pub fn comparison_table(reports: &[MetricReport]) -> (String, String) {
    let opt = |v: Option<f64>| v.map_or_else(|| "unavailable".to_string(), |x| format!("{x:.4}"));
    let mut csv = String::from("model,utterances,snr_noisy,snr_enhanced,stoi_noisy,stoi_enhanced,spectral_convergence,pesq_noisy,pesq_enhanced\n");
    let mut md = String::from(
        "| model | utterances | SNR noisy | SNR enhanced | STOI noisy | STOI enhanced | spectral convergence | PESQ noisy | PESQ enhanced |\n\
         |---|---|---|---|---|---|---|---|---|\n",
    );
    for r in reports {
        let m = &r.means;
        let n = r.records.len();
        csv += &format!(
            "{},{n},{},{},{},{},{},{},{}\n",
            r.model,
            m.snr_noisy,
            m.snr_enhanced,
            m.stoi_noisy,
            m.stoi_enhanced,
            m.spectral_convergence,
            m.pesq_noisy.map_or("unavailable".into(), |v| v.to_string()),
            m.pesq_enhanced
                .map_or("unavailable".into(), |v| v.to_string())
        );
        md += &format!(
            "| {} | {n} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} | {} | {} |\n",
            r.model,
            m.snr_noisy,
            m.snr_enhanced,
            m.stoi_noisy,
            m.stoi_enhanced,
            m.spectral_convergence,
            opt(m.pesq_noisy),
            opt(m.pesq_enhanced)
        );
    }
    (csv, md)
}

fn ranking_note(reports: &[MetricReport]) -> Option<bool> {
    let stoi_of = |name: &str| {
        reports
            .iter()
            .find(|r| r.model == name)
            .map(|r| r.means.stoi_enhanced)
    };
    Some(stoi_of("gan")? >= stoi_of("lstm")?)
}

/// Scores the enhanced test utterances of each model against the clean
/// references and writes per-model and comparison reports.
pub fn cmd_evaluate(
    config: &ExperimentConfig,
    models: &[ModelKind],
    exec: Exec,
) -> Result<EvaluationSummary> {
    config.validate()?;
    let paths = Paths::new(config);
    let mut reports = Vec::new();
    for &model in models {
        let r = evaluate_model(config, &paths, model, exec)?;
        let base = paths.reports().join(format!("{}_metrics", model.as_str()));
        write_text(&base.with_extension("csv"), &r.to_csv())?;
        write_text(&base.with_extension("json"), &(r.to_json()? + "\n"))?;
        log::info!(
            "{}: STOI {:.4} -> {:.4}, SNR {:.4} -> {:.4}",
            model.as_str(),
            r.means.stoi_noisy,
            r.means.stoi_enhanced,
            r.means.snr_noisy,
            r.means.snr_enhanced
        );
        reports.push(r);
    }
    let gan_ge_lstm = ranking_note(&reports);
    let (csv, table) = comparison_table(&reports);
    let mut md = String::from(
        "# Enhancement results\n\n\
         Every test utterance is scored against its clean synthetic reference.\n\
         SNR is mean/std of the waveform samples. STOI is computed at 10 kHz.\n\n",
    );
    md += &table;
    md += "\n";
    for r in &reports {
        let verdict = if r.means.stoi_enhanced > r.means.stoi_noisy {
            "improves"
        } else {
            "does not improve"
        };
        md += &format!("- {}: enhancement {verdict} mean STOI.\n", r.model);
        if !r.missing.is_empty() {
            md += &format!(
                "- {}: no enhanced audio for {}.\n",
                r.model,
                r.missing.join(", ")
            );
        }
    }
    match gan_ge_lstm {
        Some(true) => md += "- GAN ≥ LSTM on mean enhanced STOI.\n",
        Some(false) => md += "- GAN < LSTM on mean enhanced STOI.\n",
        None => {}
    }
    write_text(&paths.reports().join("comparison.csv"), &csv)?;
    write_text(&paths.reports().join("comparison.md"), &md)?;
    Ok(EvaluationSummary {
        reports,
        gan_ge_lstm,
    })
}
