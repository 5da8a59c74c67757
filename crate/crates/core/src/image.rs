//! Image bias analysis through textual surrogates.
//!
//! An image is resized and color-normalized, then two surrogates are derived:
//! the text an OCR adapter reads from it and a caption from a vision backend.
//! Each surrogate goes through the text analyzer. The image score is the
//! noisy-OR of the two surrogate scores and the context score is the category
//! overlap between them.

use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use image::codecs::jpeg::JpegEncoder;
use image::imageops::FilterType;
use image::{DynamicImage, ImageFormat};
use serde::{Deserialize, Serialize};

use crate::backends::{ChatBackend, ChatMessage, UsageRecord};
use crate::error::{Error, Result};
use crate::finding::{BiasFinding, Modality};
use crate::fusion::contextual_score;
use crate::text::{analyze_surrogate, noisy_or, TextAnalysis, TextAnalysisConfig};

pub const DEFAULT_MAX_DIM: u32 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaType {
    Png,
    Jpeg,
}

impl MediaType {
    pub fn from_mime(mime: &str) -> Result<Self> {
        match mime.trim().to_ascii_lowercase().as_str() {
            "image/png" | "png" => Ok(MediaType::Png),
            "image/jpeg" | "image/jpg" | "jpeg" | "jpg" => Ok(MediaType::Jpeg),
            other => Err(Error::Format(format!("unsupported image type {other:?}"))),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or_default();
        Self::from_mime(ext)
    }

    /// Detect PNG or JPEG from the leading bytes.
    pub fn sniff(bytes: &[u8]) -> Result<Self> {
        match image::guess_format(bytes) {
            Ok(ImageFormat::Png) => Ok(MediaType::Png),
            Ok(ImageFormat::Jpeg) => Ok(MediaType::Jpeg),
            Ok(other) => Err(Error::Format(format!("unsupported image format {other:?}"))),
            Err(_) => Err(Error::Decode("unrecognized image data".into())),
        }
    }

    pub fn mime(&self) -> &'static str {
        match self {
            MediaType::Png => "image/png",
            MediaType::Jpeg => "image/jpeg",
        }
    }

    fn extension(&self) -> &'static str {
        match self {
            MediaType::Png => "png",
            MediaType::Jpeg => "jpg",
        }
    }

    fn format(&self) -> ImageFormat {
        match self {
            MediaType::Png => ImageFormat::Png,
            MediaType::Jpeg => ImageFormat::Jpeg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageInput {
    pub content_id: String,
    pub bytes: Vec<u8>,
    pub media_type: MediaType,
}

impl ImageInput {
    pub fn new(content_id: impl Into<String>, bytes: Vec<u8>, media_type: MediaType) -> Self {
        Self {
            content_id: content_id.into(),
            bytes,
            media_type,
        }
    }

    pub fn decode(&self) -> Result<DynamicImage> {
        if self.bytes.is_empty() {
            return Err(Error::Decode("empty image payload".into()));
        }
        image::load_from_memory_with_format(&self.bytes, self.media_type.format())
            .map_err(|e| Error::Decode(format!("cannot decode {}: {e}", self.media_type.mime())))
    }
}

fn encode(img: &DynamicImage, media_type: MediaType) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    match media_type {
        MediaType::Png => img
            .write_to(&mut out, ImageFormat::Png)
            .map_err(|e| Error::Decode(format!("PNG encode failed: {e}")))?,
        MediaType::Jpeg => img
            .write_with_encoder(JpegEncoder::new_with_quality(&mut out, 90))
            .map_err(|e| Error::Decode(format!("JPEG encode failed: {e}")))?,
    }
    Ok(out.into_inner())
}

/// Dimensions after an aspect-preserving downscale so the longest side is at
/// most `max_dim`.
pub fn fitted_dimensions(width: u32, height: u32, max_dim: u32) -> (u32, u32) {
    let longest = width.max(height);
    if longest <= max_dim {
        return (width, height);
    }
    let scale = f64::from(max_dim) / f64::from(longest);
    let fit = |v: u32| ((f64::from(v) * scale).round() as u32).clamp(1, max_dim);
    (fit(width), fit(height))
}

/// Downscale to fit `max_dim`, convert to 8-bit RGB and re-encode in the
/// input format.
pub fn preprocess_image(img: &ImageInput, max_dim: u32) -> Result<ImageInput> {
    if max_dim == 0 {
        return Err(Error::Input("max_dim must be positive".into()));
    }
    let decoded = img.decode()?;
    let (w, h) = fitted_dimensions(decoded.width(), decoded.height(), max_dim);
    let resized = if (w, h) == (decoded.width(), decoded.height()) {
        decoded
    } else {
        decoded.resize_exact(w, h, FilterType::Triangle)
    };
    let rgb = DynamicImage::ImageRgb8(resized.to_rgb8());
    Ok(ImageInput {
        content_id: img.content_id.clone(),
        bytes: encode(&rgb, img.media_type)?,
        media_type: img.media_type,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OcrResult {
    pub text: String,
    pub confidence: f64,
}

impl OcrResult {
    pub fn empty() -> Self {
        Self::default()
    }
}

pub trait OcrAdapter: Send + Sync {
    fn extract(&self, img: &ImageInput) -> Result<OcrResult>;
}

/// Runs `program [args..] <image path>`; reads the text from stdout and the
/// confidence as a decimal on the last non-empty stderr line.
#[derive(Debug, Clone)]
pub struct CommandOcr {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl CommandOcr {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
            args: Vec::new(),
        }
    }

    pub fn with_args(mut self, args: Vec<String>) -> Self {
        self.args = args;
        self
    }
}

fn parse_confidence(raw: &str) -> Result<f64> {
    let c: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::Adapter(format!("confidence {raw:?} is not a decimal")))?;
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Adapter(format!("confidence {c} outside [0, 1]")));
    }
    Ok(c)
}

impl OcrAdapter for CommandOcr {
    fn extract(&self, img: &ImageInput) -> Result<OcrResult> {
        let file = tempfile::Builder::new()
            .suffix(&format!(".{}", img.media_type.extension()))
            .tempfile()
            .map_err(|e| Error::Adapter(format!("cannot create temporary image: {e}")))?;
        std::fs::write(file.path(), &img.bytes)
            .map_err(|e| Error::Adapter(format!("cannot write temporary image: {e}")))?;
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg(file.path())
            .output()
            .map_err(|e| Error::Adapter(format!("cannot run {}: {e}", self.program.display())))?;
        let stderr = String::from_utf8_lossy(&output.stderr);
        if !output.status.success() {
            return Err(Error::Adapter(format!(
                "{} exited with {}: {}",
                self.program.display(),
                output.status,
                stderr.trim()
            )));
        }
        let text = String::from_utf8(output.stdout)
            .map_err(|_| Error::Adapter("OCR output is not UTF-8".into()))?
            .trim()
            .to_string();
        let confidence = match stderr.lines().rev().find(|l| !l.trim().is_empty()) {
            Some(line) => parse_confidence(line)?,
            None if text.is_empty() => 0.0,
            None => return Err(Error::Adapter("OCR adapter reported no confidence".into())),
        };
        Ok(OcrResult { text, confidence })
    }
}

/// POSTs the image bytes and expects `{"text": .., "confidence": ..}`.
#[derive(Debug, Clone)]
pub struct HttpOcr {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpOcr {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Configuration(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            url: url.into(),
            client,
        })
    }
}

impl OcrAdapter for HttpOcr {
    fn extract(&self, img: &ImageInput) -> Result<OcrResult> {
        let resp = self
            .client
            .post(&self.url)
            .header("content-type", img.media_type.mime())
            .body(img.bytes.clone())
            .send()
            .map_err(|e| Error::Adapter(format!("OCR service unreachable: {e}")))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::Adapter(format!("OCR service returned HTTP {status}")));
        }
        let result: OcrResult = resp
            .json()
            .map_err(|e| Error::Adapter(format!("bad OCR response: {e}")))?;
        if !(0.0..=1.0).contains(&result.confidence) {
            return Err(Error::Adapter(format!(
                "confidence {} outside [0, 1]",
                result.confidence
            )));
        }
        Ok(result)
    }
}

/// Run the adapter; blank output always reports confidence 0.
pub fn extract_text(img: &ImageInput, ocr: &dyn OcrAdapter) -> Result<OcrResult> {
    let mut r = ocr.extract(img)?;
    r.text = r.text.trim().to_string();
    if r.text.is_empty() {
        r.confidence = 0.0;
    }
    Ok(r)
}

const CAPTION_SYSTEM_PROMPT: &str =
    "You describe images for a fairness review. Be literal and concise.";
const CAPTION_USER_PROMPT: &str = "Describe this image in at most two sentences, including any visible text and how people or groups are portrayed.";

pub fn caption_image(img: &ImageInput, backend: &dyn ChatBackend) -> Result<(String, UsageRecord)> {
    let exchange = backend.chat(vec![
        ChatMessage::system(CAPTION_SYSTEM_PROMPT),
        ChatMessage::user(CAPTION_USER_PROMPT).with_image(img.media_type.mime(), img.bytes.clone()),
    ])?;
    let caption = exchange.response_text.trim().to_string();
    if caption.is_empty() {
        return Err(Error::Protocol("vision backend returned an empty caption".into()));
    }
    Ok((caption, exchange.usage))
}

#[derive(Debug, Clone)]
pub struct ImageAnalysisConfig {
    pub max_dim: u32,
    /// Continue with an empty OCR surrogate when the adapter fails.
    pub allow_missing_ocr: bool,
    pub text: TextAnalysisConfig,
}

impl ImageAnalysisConfig {
    pub fn new(text: TextAnalysisConfig) -> Self {
        Self {
            max_dim: DEFAULT_MAX_DIM,
            allow_missing_ocr: true,
            text,
        }
    }
}

#[derive(Clone, Copy, Default)]
pub struct ImageBackends<'a> {
    pub ocr: Option<&'a dyn OcrAdapter>,
    pub vision: Option<&'a dyn ChatBackend>,
    /// Chat backend for the optional model layer over the surrogates.
    pub text_model: Option<&'a dyn ChatBackend>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageAnalysis {
    pub image_score: f64,
    pub context_score: f64,
    pub ocr_score: f64,
    pub caption_score: f64,
    pub caption: String,
    pub ocr: OcrResult,
    pub findings: Vec<BiasFinding>,
    pub usage: UsageRecord,
    pub warnings: Vec<String>,
}

pub fn analyze_image(
    img: &ImageInput,
    cfg: &ImageAnalysisConfig,
    backends: ImageBackends<'_>,
) -> Result<ImageAnalysis> {
    let prepared = preprocess_image(img, cfg.max_dim)?;
    let mut warnings = Vec::new();
    let mut usage = UsageRecord::default();

    let ocr = match backends.ocr {
        Some(adapter) => match extract_text(&prepared, adapter) {
            Ok(r) => Some(r),
            Err(e) if cfg.allow_missing_ocr => {
                warnings.push(format!("OCR unavailable, continuing without it: {e}"));
                None
            }
            Err(e) => return Err(e),
        },
        None => None,
    };
    let caption = match backends.vision {
        Some(vision) => {
            let (caption, u) = caption_image(&prepared, vision)?;
            usage = usage.merge(u);
            Some(caption)
        }
        None => None,
    };
    if ocr.is_none() && caption.is_none() {
        return Err(Error::UnanalyzableImage);
    }

    let mut surrogate = |text: Option<&str>, modality| -> Result<Option<TextAnalysis>> {
        let Some(text) = text else { return Ok(None) };
        let a = analyze_surrogate(text, modality, &cfg.text, backends.text_model)?;
        usage = usage.merge(a.usage);
        warnings.extend(a.warnings.iter().cloned());
        Ok(Some(a))
    };
    let ocr_analysis = surrogate(ocr.as_ref().map(|o| o.text.as_str()), Modality::OcrText)?;
    let caption_analysis = surrogate(caption.as_deref(), Modality::Caption)?;

    let ocr_findings = ocr_analysis.as_ref().map(|a| a.findings.clone()).unwrap_or_default();
    let caption_findings = caption_analysis
        .as_ref()
        .map(|a| a.findings.clone())
        .unwrap_or_default();
    let ocr_score = ocr_analysis.as_ref().map_or(0.0, |a| a.text_score);
    let caption_score = caption_analysis.as_ref().map_or(0.0, |a| a.text_score);

    let context_score = contextual_score(&ocr_findings, &caption_findings);
    let mut findings = ocr_findings;
    findings.extend(caption_findings);

    Ok(ImageAnalysis {
        image_score: noisy_or([ocr_score, caption_score]),
        context_score,
        ocr_score,
        caption_score,
        caption: caption.unwrap_or_default(),
        ocr: ocr.unwrap_or_default(),
        findings,
        usage,
        warnings,
    })
}
