use std::path::Path;
use std::process::Command;

/// Result of asking an external tool for a PESQ score.
#[derive(Debug, Clone, PartialEq)]
pub enum PesqOutcome {
    Score(f64),
    Unavailable(String),
}

impl PesqOutcome {
    pub fn score(&self) -> Option<f64> {
        match self {
            PesqOutcome::Score(s) => Some(*s),
            PesqOutcome::Unavailable(_) => None,
        }
    }
}

/// Runs `template` through `sh -c` with `{clean}` and `{degraded}`
/// replaced by the two paths and takes the last number it prints.
/// No template, a failing tool or unparseable output all give
/// [`PesqOutcome::Unavailable`]; the reason is also logged.
pub fn pesq_external(clean: &Path, degraded: &Path, template: Option<&str>) -> PesqOutcome {
    let unavailable = |reason: String| {
        log::warn!("pesq unavailable: {reason}");
        PesqOutcome::Unavailable(reason)
    };
    let Some(template) = template.filter(|t| !t.trim().is_empty()) else {
        return PesqOutcome::Unavailable("no external evaluator configured".into());
    };
    let cmd = template
        .replace("{clean}", &clean.display().to_string())
        .replace("{degraded}", &degraded.display().to_string());
    let output = match Command::new("sh").arg("-c").arg(&cmd).output() {
        Ok(o) => o,
        Err(e) => return unavailable(format!("could not run {cmd:?}: {e}")),
    };
    if !output.status.success() {
        return unavailable(format!(
            "{cmd:?} exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        ));
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    match stdout
        .split(|c: char| c.is_whitespace() || c == ',' || c == ';' || c == '=' || c == ':')
        .filter_map(|t| t.parse::<f64>().ok())
        .rfind(|v| v.is_finite())
    {
        Some(v) => PesqOutcome::Score(v),
        None => unavailable(format!("no number in output of {cmd:?}: {}", stdout.trim())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_stub_output() {
        let r = pesq_external(Path::new("a.wav"), Path::new("b.wav"), Some("echo 2.60"));
        assert_eq!(r, PesqOutcome::Score(2.60));
        let r = pesq_external(
            Path::new("a.wav"),
            Path::new("b.wav"),
            Some("echo 'P.862 prediction (MOS-LQO): = 1.96'"),
        );
        assert_eq!(r.score(), Some(1.96));
    }

    #[test]
    fn placeholders_substituted() {
        let r = pesq_external(
            Path::new("/x/clean.wav"),
            Path::new("/y/deg.wav"),
            Some("test {clean} = /x/clean.wav && test {degraded} = /y/deg.wav && echo 3.5"),
        );
        assert_eq!(r.score(), Some(3.5));
    }

    #[test]
    fn failures_are_unavailable() {
        assert!(matches!(
            pesq_external(Path::new("a"), Path::new("b"), None),
            PesqOutcome::Unavailable(_)
        ));
        match pesq_external(
            Path::new("a"),
            Path::new("b"),
            Some("echo boom >&2; exit 3"),
        ) {
            PesqOutcome::Unavailable(reason) => assert!(reason.contains("boom")),
            other => panic!("{other:?}"),
        }
        assert!(
            pesq_external(Path::new("a"), Path::new("b"), Some("echo none"))
                .score()
                .is_none()
        );
    }
}
