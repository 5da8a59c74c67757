use serde::{Deserialize, Serialize};

use crate::finding::BiasFinding;
use crate::fusion::{BiasComponents, BiasScore, FusionWeights};
use crate::recommend::Recommendation;
use crate::telemetry::RunTelemetry;
use crate::text::ModelJudgement;

/// Text derived from an image, included in image reports for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSurrogates {
    pub caption: String,
    pub ocr_text: String,
    pub ocr_confidence: f64,
}

/// Everything known about one analyzed content item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub content_id: String,
    pub components: BiasComponents,
    pub score: BiasScore,
    pub weights: FusionWeights,
    pub findings: Vec<BiasFinding>,
    pub recommendations: Vec<Recommendation>,
    pub telemetry: RunTelemetry,
    pub lexicon_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_judgement: Option<ModelJudgement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogates: Option<ImageSurrogates>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl BiasReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
