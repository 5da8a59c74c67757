//! Text bias detection: tokenize, score sentiment, match the bias lexicon and
//! combine finding severities into the text score `T`. An optional model
//! layer asks a chat backend for its own judgement; the reported score is the
//! larger of the two.

mod lexicon;
mod score;
mod sentiment;
mod tokenize;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use lexicon::{match_lexicon, BiasLexicon, LexiconEntry};
pub use score::{effective_severity, noisy_or, score_text};
pub use sentiment::{sentiment, ValenceLexicon};
pub use tokenize::{normalize_token, preprocess, preprocess_bytes, token_spans, Token, TokenizedText};

use crate::backends::{ChatBackend, ChatMessage, UsageRecord};
use crate::error::{Error, Result};
use crate::finding::{order_and_number, BiasFinding, Modality};

/// Whether and how strictly the chat-backend judgement is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelLayer {
    #[default]
    Disabled,
    /// Backend failures fall back to the lexicon score with a warning.
    Optional,
    /// Backend failures fail the analysis.
    Required,
}

#[derive(Debug, Clone)]
pub struct TextAnalysisConfig {
    pub lexicon: Arc<BiasLexicon>,
    pub valence: Arc<ValenceLexicon>,
    pub model_layer: ModelLayer,
    pub chunk_tokens: usize,
    pub chunk_overlap: usize,
}

impl TextAnalysisConfig {
    pub fn new(lexicon: Arc<BiasLexicon>, valence: Arc<ValenceLexicon>) -> Self {
        Self {
            lexicon,
            valence,
            model_layer: ModelLayer::Disabled,
            chunk_tokens: 2000,
            chunk_overlap: 100,
        }
    }

    /// Bundled lexicon and valence list, model layer off.
    pub fn builtin() -> Self {
        Self::new(
            Arc::new(BiasLexicon::builtin()),
            Arc::new(ValenceLexicon::builtin()),
        )
    }

    pub fn with_model_layer(mut self, layer: ModelLayer) -> Self {
        self.model_layer = layer;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelJudgement {
    pub score: f64,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TextAnalysis {
    pub text_score: f64,
    pub deterministic_score: f64,
    pub findings: Vec<BiasFinding>,
    pub polarity: f64,
    pub model_judgement: Option<ModelJudgement>,
    pub usage: UsageRecord,
    pub warnings: Vec<String>,
}

const JUDGE_SYSTEM_PROMPT: &str = "You audit content for social bias (gender, race, age, ability, religion and similar). \
Reply with a single JSON object {\"score\": <number between 0 and 1>, \"explanation\": \"<one sentence>\"} \
where score is the severity of bias in the text and 0 means no bias.";

/// Extract `{"score": .., "explanation": ..}` from a model reply.
pub fn parse_judgement(reply: &str) -> Result<ModelJudgement> {
    let start = reply.find('{');
    let end = reply.rfind('}');
    let (Some(start), Some(end)) = (start, end) else {
        return Err(Error::Protocol("judgement reply contains no JSON object".into()));
    };
    if end < start {
        return Err(Error::Protocol("judgement reply contains no JSON object".into()));
    }
    let value: serde_json::Value = serde_json::from_str(&reply[start..=end])
        .map_err(|e| Error::Protocol(format!("judgement reply is not valid JSON: {e}")))?;
    let score = value
        .get("score")
        .and_then(serde_json::Value::as_f64)
        .ok_or_else(|| Error::Protocol("judgement reply has no numeric score".into()))?;
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::Protocol(format!("judgement score {score} outside [0, 1]")));
    }
    let explanation = value
        .get("explanation")
        .and_then(serde_json::Value::as_str)
        .unwrap_or_default()
        .to_string();
    Ok(ModelJudgement { score, explanation })
}

/// Token windows of `size` tokens overlapping by `overlap`, as source spans.
fn chunk_ranges(t: &TokenizedText, size: usize, overlap: usize) -> Vec<(usize, usize)> {
    let n = t.tokens.len();
    if n == 0 {
        return Vec::new();
    }
    let size = size.max(1);
    let step = size.saturating_sub(overlap).max(1);
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + size).min(n);
        let span = t.source_between(start, end);
        out.push((span.start, span.end));
        if end == n {
            break;
        }
        start += step;
    }
    out
}

fn judge(
    t: &TokenizedText,
    cfg: &TextAnalysisConfig,
    backend: &dyn ChatBackend,
) -> Result<(ModelJudgement, UsageRecord)> {
    let mut usage = UsageRecord::default();
    let mut best: Option<ModelJudgement> = None;
    for (start, end) in chunk_ranges(t, cfg.chunk_tokens, cfg.chunk_overlap) {
        let exchange = backend.chat(vec![
            ChatMessage::system(JUDGE_SYSTEM_PROMPT),
            ChatMessage::user(&t.source[start..end]),
        ])?;
        usage = usage.merge(exchange.usage);
        let j = parse_judgement(&exchange.response_text)?;
        if best.as_ref().map_or(true, |b| j.score > b.score) {
            best = Some(j);
        }
    }
    Ok((best.expect("at least one chunk"), usage))
}

/// Analyze a piece of text read from `modality`.
pub fn analyze_surrogate(
    text: &str,
    modality: Modality,
    cfg: &TextAnalysisConfig,
    backend: Option<&dyn ChatBackend>,
) -> Result<TextAnalysis> {
    let tokens = preprocess(text);
    let mut findings = match_lexicon(&tokens, &cfg.lexicon, modality);
    let polarity = sentiment(&tokens, &cfg.valence);
    let deterministic_score = score_text(&findings, polarity);
    order_and_number(&mut findings);

    let mut analysis = TextAnalysis {
        text_score: deterministic_score,
        deterministic_score,
        findings,
        polarity,
        model_judgement: None,
        usage: UsageRecord::default(),
        warnings: Vec::new(),
    };
    if cfg.model_layer == ModelLayer::Disabled || tokens.is_empty() {
        return Ok(analysis);
    }
    let Some(backend) = backend else {
        if cfg.model_layer == ModelLayer::Required {
            return Err(Error::Configuration(
                "model layer is required but no chat backend is configured".into(),
            ));
        }
        analysis
            .warnings
            .push("model layer skipped: no chat backend configured".into());
        return Ok(analysis);
    };
    match judge(&tokens, cfg, backend) {
        Ok((judgement, usage)) => {
            analysis.text_score = deterministic_score.max(judgement.score);
            analysis.model_judgement = Some(judgement);
            analysis.usage = usage;
        }
        Err(e) if cfg.model_layer == ModelLayer::Optional => {
            analysis
                .warnings
                .push(format!("model layer failed, using lexicon score: {e}"));
        }
        Err(e) => return Err(e),
    }
    Ok(analysis)
}

/// Analyze user-supplied text.
pub fn analyze_text(
    text: &str,
    cfg: &TextAnalysisConfig,
    backend: Option<&dyn ChatBackend>,
) -> Result<TextAnalysis> {
    analyze_surrogate(text, Modality::OriginalText, cfg, backend)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{ScriptedChat, StubChat};

    const LEADERSHIP_SENTENCE: &str = "Some people say that women are not suitable for leadership roles";

    #[test]
    fn example_sentence_has_gender_finding() {
        let a = analyze_text(LEADERSHIP_SENTENCE, &TextAnalysisConfig::builtin(), None).unwrap();
        assert!(a.findings.iter().any(|f| f.category == "gender"));
        assert!(a.text_score > 0.0);
        assert_eq!(a.findings[0].id, "text-1");
    }

    #[test]
    fn empty_text() {
        let a = analyze_text("", &TextAnalysisConfig::builtin(), None).unwrap();
        assert_eq!(a.text_score, 0.0);
        assert!(a.findings.is_empty());
    }

    #[test]
    fn model_layer_max_rule() {
        let cfg = TextAnalysisConfig::builtin().with_model_layer(ModelLayer::Optional);
        let backend = ScriptedChat::new(r#"{"score": 0.9, "explanation": "stub"}"#);
        let a = analyze_text("The meeting is at noon.", &cfg, Some(&backend)).unwrap();
        assert_eq!(a.deterministic_score, 0.0);
        assert_eq!(a.text_score, 0.9);
        assert!(a.usage.tokens_in > 0);

        // a lower model score never hides a lexicon detection
        let low = ScriptedChat::new(r#"{"score": 0.1}"#);
        let a = analyze_text(LEADERSHIP_SENTENCE, &cfg, Some(&low)).unwrap();
        assert_eq!(a.text_score, a.deterministic_score);
    }

    #[test]
    fn disabled_layer_is_exactly_deterministic() {
        let backend = ScriptedChat::new(r#"{"score": 0.9}"#);
        let a = analyze_text(LEADERSHIP_SENTENCE, &TextAnalysisConfig::builtin(), Some(&backend)).unwrap();
        assert_eq!(a.text_score, a.deterministic_score);
        assert!(a.model_judgement.is_none());
    }

    #[test]
    fn optional_layer_falls_back_and_required_fails() {
        // The digest stub does not speak the judgement format.
        let optional = TextAnalysisConfig::builtin().with_model_layer(ModelLayer::Optional);
        let a = analyze_text(LEADERSHIP_SENTENCE, &optional, Some(&StubChat)).unwrap();
        assert_eq!(a.text_score, a.deterministic_score);
        assert_eq!(a.warnings.len(), 1);

        let required = TextAnalysisConfig::builtin().with_model_layer(ModelLayer::Required);
        assert!(matches!(
            analyze_text(LEADERSHIP_SENTENCE, &required, Some(&StubChat)),
            Err(Error::Protocol(_))
        ));
        assert!(matches!(
            analyze_text(LEADERSHIP_SENTENCE, &required, None),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn judgement_parsing() {
        let j = parse_judgement("Sure! {\"score\": 0.25, \"explanation\": \"mild\"} done").unwrap();
        assert_eq!(j.score, 0.25);
        assert_eq!(j.explanation, "mild");
        assert!(parse_judgement("no json").is_err());
        assert!(parse_judgement("{\"score\": 2}").is_err());
        assert!(parse_judgement("} {").is_err());
    }

    #[test]
    fn chunking_covers_long_inputs() {
        let text = (0..4500).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let t = preprocess(&text);
        let chunks = chunk_ranges(&t, 2000, 100);
        assert_eq!(chunks.len(), 3);
        assert_eq!(chunks[0].0, 0);
        assert_eq!(chunks.last().unwrap().1, text.len());
        // windows start at tokens 0, 1900, 3800
        assert_eq!(chunks[1].0, t.tokens[1900].span.start);
        assert_eq!(chunks[2].0, t.tokens[3800].span.start);
    }
}
