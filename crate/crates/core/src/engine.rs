//! End-to-end analysis: run the modality pipelines, fuse, attach
//! recommendations and account for energy.

use std::sync::Arc;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::backends::{ChatBackend, UsageRecord};
use crate::error::Result;
use crate::finding::order_and_number;
use crate::fusion::{fuse_scores, normalize_weights, BiasComponents, FusionWeights};
use crate::image::{analyze_image, ImageAnalysisConfig, ImageBackends, ImageInput, OcrAdapter};
use crate::recommend::{generate, rank};
use crate::report::{BiasReport, ImageSurrogates};
use crate::risk::RiskAssessment;
use crate::telemetry::{record, EnergyConfig, RunTelemetry, TelemetryAggregator};
use crate::text::{analyze_text, ModelLayer, TextAnalysisConfig};

/// Shared, read-only analysis configuration plus backend handles.
#[derive(Clone)]
pub struct Engine {
    pub weights: FusionWeights,
    pub text: TextAnalysisConfig,
    pub max_image_dim: u32,
    pub allow_missing_ocr: bool,
    pub energy: EnergyConfig,
    pub chat: Option<Arc<dyn ChatBackend>>,
    pub vision: Option<Arc<dyn ChatBackend>>,
    pub ocr: Option<Arc<dyn OcrAdapter>>,
    pub recommendation_layer: ModelLayer,
    pub telemetry: Arc<TelemetryAggregator>,
}

pub fn content_id_for(prefix: &str, bytes: &[u8]) -> String {
    format!("{prefix}-{}", &hex::encode(Sha256::digest(bytes))[..16])
}

impl Engine {
    /// Default weights, bundled lexicons, no backends.
    pub fn new(energy: EnergyConfig) -> Self {
        Self {
            weights: FusionWeights::default(),
            text: TextAnalysisConfig::builtin(),
            max_image_dim: crate::image::DEFAULT_MAX_DIM,
            allow_missing_ocr: true,
            energy,
            chat: None,
            vision: None,
            ocr: None,
            recommendation_layer: ModelLayer::Disabled,
            telemetry: Arc::new(TelemetryAggregator::new()),
        }
    }

    fn finish(
        &self,
        report: &mut BiasReport,
        usage: UsageRecord,
        started: Instant,
        risk_context: Option<&RiskAssessment>,
    ) -> Result<()> {
        let generated = generate(
            report,
            self.chat.as_deref(),
            risk_context,
            self.recommendation_layer,
        )?;
        report.recommendations = rank(generated.recommendations);
        report.warnings.extend(generated.warnings);
        let mut telemetry = record(&usage.merge(generated.usage), &self.energy);
        telemetry.wall_ms = started.elapsed().as_millis() as u64;
        self.telemetry.add(&telemetry);
        report.telemetry = telemetry;
        Ok(())
    }

    pub fn analyze_text(&self, content_id: Option<&str>, text: &str) -> Result<BiasReport> {
        self.analyze_text_with_context(content_id, text, None)
    }

    pub fn analyze_text_with_context(
        &self,
        content_id: Option<&str>,
        text: &str,
        risk_context: Option<&RiskAssessment>,
    ) -> Result<BiasReport> {
        let started = Instant::now();
        let weights = normalize_weights(self.weights)?;
        let analysis = analyze_text(text, &self.text, self.chat.as_deref())?;
        let components = BiasComponents::text_only(analysis.text_score);
        let mut report = BiasReport {
            content_id: content_id
                .map(str::to_string)
                .unwrap_or_else(|| content_id_for("txt", text.as_bytes())),
            components,
            score: fuse_scores(&components, &weights)?,
            weights,
            findings: analysis.findings,
            recommendations: Vec::new(),
            telemetry: RunTelemetry::zero(),
            lexicon_version: self.text.lexicon.version().to_string(),
            model_judgement: analysis.model_judgement,
            surrogates: None,
            warnings: analysis.warnings,
        };
        self.finish(&mut report, analysis.usage, started, risk_context)?;
        Ok(report)
    }

    /// Image reports use the OCR-text score as `T`, the surrogate noisy-OR as
    /// `I` and the cross-surrogate category overlap as `C`.
    pub fn analyze_image(&self, img: &ImageInput) -> Result<BiasReport> {
        let started = Instant::now();
        let weights = normalize_weights(self.weights)?;
        let cfg = ImageAnalysisConfig {
            max_dim: self.max_image_dim,
            allow_missing_ocr: self.allow_missing_ocr,
            text: self.text.clone(),
        };
        let backends = ImageBackends {
            ocr: self.ocr.as_deref(),
            vision: self.vision.as_deref(),
            text_model: self.chat.as_deref(),
        };
        let analysis = analyze_image(img, &cfg, backends)?;
        let components = BiasComponents::new(
            Some(analysis.ocr_score),
            Some(analysis.image_score),
            Some(analysis.context_score),
        );
        let mut findings = analysis.findings;
        order_and_number(&mut findings);
        let content_id = if img.content_id.is_empty() {
            content_id_for("img", &img.bytes)
        } else {
            img.content_id.clone()
        };
        let mut report = BiasReport {
            content_id,
            components,
            score: fuse_scores(&components, &weights)?,
            weights,
            findings,
            recommendations: Vec::new(),
            telemetry: RunTelemetry::zero(),
            lexicon_version: self.text.lexicon.version().to_string(),
            model_judgement: None,
            surrogates: Some(ImageSurrogates {
                caption: analysis.caption,
                ocr_text: analysis.ocr.text,
                ocr_confidence: analysis.ocr.confidence,
            }),
            warnings: analysis.warnings,
        };
        self.finish(&mut report, analysis.usage, started, None)?;
        Ok(report)
    }
}
