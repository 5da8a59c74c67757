use crate::finding::BiasFinding;

/// Severity after sentiment adjustment: negative tone amplifies by up to 1.5x,
/// capped at 1.
pub fn effective_severity(severity: f64, polarity: f64) -> f64 {
    (severity * (1.0 + 0.5 * (-polarity).max(0.0))).min(1.0)
}

/// Noisy-OR over sentiment-adjusted finding severities.
pub fn score_text(findings: &[BiasFinding], polarity: f64) -> f64 {
    noisy_or(findings.iter().map(|f| effective_severity(f.severity, polarity)))
}

/// `1 - prod(1 - p_i)`; zero for an empty sequence.
pub fn noisy_or(probabilities: impl IntoIterator<Item = f64>) -> f64 {
    let miss: f64 = probabilities.into_iter().map(|p| 1.0 - p).product();
    (1.0 - miss).clamp(0.0, 1.0)
}
