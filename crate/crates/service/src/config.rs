//! Service configuration file (TOML) and the runtime it builds.
//!
//! Relative paths are resolved against the directory holding the config
//! file. API keys are never read from the file; they come from
//! `FAIRSENSE_CHAT_API_KEY`, `FAIRSENSE_VISION_API_KEY` and
//! `FAIRSENSE_EMBEDDING_API_KEY`.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use fairsense_core::backends::{BackendConfig, ChatBackend, HttpChat, HttpEmbedder, Limiter, StubChat};
use fairsense_core::fusion::{normalize_weights, FusionWeights};
use fairsense_core::image::{CommandOcr, HttpOcr, OcrAdapter};
use fairsense_core::index::{load_index, EmbeddingProvider, StubEmbedder, VectorIndex};
use fairsense_core::telemetry::EnergyConfig;
use fairsense_core::testkit::GlyphOcr;
use fairsense_core::text::{BiasLexicon, ModelLayer, TextAnalysisConfig, ValenceLexicon};
use fairsense_core::Engine;
use serde::Deserialize;

pub const CONFIG_ENV: &str = "FAIRSENSE_CONFIG";
pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_TEXT_BODY_LIMIT: usize = 1 << 20;
pub const DEFAULT_IMAGE_BODY_LIMIT: usize = 10 << 20;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Engine(#[from] fairsense_core::Error),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_concurrency")]
    pub backend_concurrency: usize,
    #[serde(default)]
    pub weights: FusionWeights,
    pub energy: EnergyConfig,
    #[serde(default)]
    pub lexicon: LexiconPaths,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    #[serde(default)]
    pub ocr: OcrSettings,
    #[serde(default)]
    pub chat: BackendSettings,
    #[serde(default)]
    pub vision: BackendSettings,
    #[serde(default)]
    pub embedding: EmbeddingSettings,
    #[serde(default)]
    pub index: IndexPaths,
    #[serde(default)]
    pub limits: BodyLimits,
    #[serde(default)]
    pub batch: BatchSettings,
}

fn default_port() -> u16 {
    DEFAULT_PORT
}

fn default_concurrency() -> usize {
    Limiter::DEFAULT_LIMIT
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconPaths {
    /// Bias lexicon JSON; the bundled lexicon when unset.
    pub bias: Option<PathBuf>,
    /// Valence TSV; the bundled list when unset.
    pub valence: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    /// Model judgement over text and surrogates; needs `[chat]`.
    pub model_layer: ModelLayer,
    /// Model-written recommendations; needs `[chat]`.
    pub recommendation_layer: ModelLayer,
    pub chunk_tokens: usize,
    pub chunk_overlap: usize,
    pub max_image_dim: u32,
    pub allow_missing_ocr: bool,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            model_layer: ModelLayer::Disabled,
            recommendation_layer: ModelLayer::Disabled,
            chunk_tokens: 2000,
            chunk_overlap: 100,
            max_image_dim: fairsense_core::image::DEFAULT_MAX_DIM,
            allow_missing_ocr: true,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OcrSettings {
    #[default]
    None,
    Command {
        program: PathBuf,
        #[serde(default)]
        args: Vec<String>,
    },
    Http {
        url: String,
        #[serde(default = "default_ocr_timeout_ms")]
        timeout_ms: u64,
    },
    /// Reads posters drawn by the bundled test kit. For demos and tests.
    Glyph,
}

fn default_ocr_timeout_ms() -> u64 {
    30_000
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendSettings {
    #[default]
    None,
    Stub,
    Http(RemoteBackend),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteBackend {
    pub base_url: String,
    pub model_name: String,
    pub timeout_ms: Option<u64>,
    pub max_retries: Option<u32>,
    pub retry_base_delay_ms: Option<u64>,
    pub retry_jitter: Option<bool>,
    /// Expected vector size; embedding backends only.
    pub dim: Option<usize>,
}

impl RemoteBackend {
    fn backend_config(&self, key_env: &str) -> BackendConfig {
        let mut cfg = BackendConfig::new(&self.base_url, &self.model_name);
        if let Some(t) = self.timeout_ms {
            cfg.timeout_ms = t;
        }
        if let Some(r) = self.max_retries {
            cfg.max_retries = r;
        }
        if let Some(d) = self.retry_base_delay_ms {
            cfg.retry.base_delay_ms = d;
        }
        if let Some(j) = self.retry_jitter {
            cfg.retry.jitter = j;
        }
        cfg.api_key = std::env::var(key_env).ok().filter(|k| !k.is_empty());
        cfg
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EmbeddingSettings {
    None,
    Stub {
        #[serde(default = "default_stub_dim")]
        dim: usize,
    },
    Http(RemoteBackend),
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        EmbeddingSettings::Stub {
            dim: default_stub_dim(),
        }
    }
}

fn default_stub_dim() -> usize {
    256
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexPaths {
    pub risks: Option<PathBuf>,
    pub rmf: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BodyLimits {
    pub text_bytes: usize,
    pub image_bytes: usize,
}

impl Default for BodyLimits {
    fn default() -> Self {
        Self {
            text_bytes: DEFAULT_TEXT_BODY_LIMIT,
            image_bytes: DEFAULT_IMAGE_BODY_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatchSettings {
    pub workers: usize,
}

impl Default for BatchSettings {
    fn default() -> Self {
        Self { workers: 4 }
    }
}

/// Pick the config path: `FAIRSENSE_CONFIG` when set, otherwise `flag`.
pub fn resolve_config_path(flag: Option<PathBuf>) -> Option<PathBuf> {
    std::env::var_os(CONFIG_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or(flag)
}

impl EngineConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: EngineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: base_dir.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.lexicon.bias,
            &mut self.lexicon.valence,
            &mut self.index.risks,
            &mut self.index.rmf,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let OcrSettings::Command { program, .. } = &mut self.ocr {
            // Bare names are looked up on PATH.
            if program.components().count() > 1 {
                fix(program);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.port == 0 {
            return Err(ConfigError::Invalid("port must be in [1, 65535]".into()));
        }
        if self.backend_concurrency == 0 {
            return Err(ConfigError::Invalid("backend_concurrency must be at least 1".into()));
        }
        if self.batch.workers == 0 {
            return Err(ConfigError::Invalid("batch.workers must be at least 1".into()));
        }
        if self.limits.text_bytes == 0 || self.limits.image_bytes == 0 {
            return Err(ConfigError::Invalid("body limits must be positive".into()));
        }
        self.energy.validate()?;
        normalize_weights(self.weights)?;
        let a = &self.analysis;
        if a.chunk_tokens == 0 || a.chunk_overlap >= a.chunk_tokens {
            return Err(ConfigError::Invalid(
                "analysis.chunk_overlap must be smaller than a positive chunk_tokens".into(),
            ));
        }
        if a.max_image_dim == 0 {
            return Err(ConfigError::Invalid("analysis.max_image_dim must be positive".into()));
        }
        let needs_chat = a.model_layer != ModelLayer::Disabled
            || a.recommendation_layer != ModelLayer::Disabled;
        if needs_chat && matches!(self.chat, BackendSettings::None) {
            return Err(ConfigError::Invalid(
                "a model layer is enabled but no [chat] backend is configured".into(),
            ));
        }
        if self.index.risks.is_some() != self.index.rmf.is_some() {
            return Err(ConfigError::Invalid(
                "index.risks and index.rmf must be configured together".into(),
            ));
        }
        Ok(())
    }

    pub fn limiter(&self) -> Arc<Limiter> {
        Arc::new(Limiter::new(self.backend_concurrency))
    }

    pub fn embedder(&self, limiter: Arc<Limiter>) -> Result<Option<Arc<dyn EmbeddingProvider>>, ConfigError> {
        Ok(match &self.embedding {
            EmbeddingSettings::None => None,
            EmbeddingSettings::Stub { dim } => Some(Arc::new(StubEmbedder::new(*dim)?)),
            EmbeddingSettings::Http(remote) => {
                let mut e = HttpEmbedder::new(remote.backend_config("FAIRSENSE_EMBEDDING_API_KEY"), limiter)?;
                if let Some(d) = remote.dim {
                    e = e.with_dim(d);
                }
                Some(Arc::new(e))
            }
        })
    }

    fn chat_backend(
        settings: &BackendSettings,
        key_env: &str,
        limiter: &Arc<Limiter>,
    ) -> Result<Option<Arc<dyn ChatBackend>>, ConfigError> {
        Ok(match settings {
            BackendSettings::None => None,
            BackendSettings::Stub => Some(Arc::new(StubChat)),
            BackendSettings::Http(remote) => Some(Arc::new(HttpChat::new(
                remote.backend_config(key_env),
                limiter.clone(),
            )?)),
        })
    }

    fn ocr_adapter(&self) -> Result<Option<Arc<dyn OcrAdapter>>, ConfigError> {
        Ok(match &self.ocr {
            OcrSettings::None => None,
            OcrSettings::Command { program, args } => {
                Some(Arc::new(CommandOcr::new(program).with_args(args.clone())))
            }
            OcrSettings::Http { url, timeout_ms } => {
                Some(Arc::new(HttpOcr::new(url, Duration::from_millis(*timeout_ms))?))
            }
            OcrSettings::Glyph => Some(Arc::new(GlyphOcr)),
        })
    }

    /// Load lexicons and construct backends. Fails on the first unreadable
    /// file or invalid setting.
    pub fn engine(&self, limiter: &Arc<Limiter>) -> Result<Engine, ConfigError> {
        self.validate()?;
        let lexicon = match &self.lexicon.bias {
            Some(p) => BiasLexicon::load(p)?,
            None => BiasLexicon::builtin(),
        };
        let valence = match &self.lexicon.valence {
            Some(p) => ValenceLexicon::load(p)?,
            None => ValenceLexicon::builtin(),
        };
        let mut text = TextAnalysisConfig::new(Arc::new(lexicon), Arc::new(valence))
            .with_model_layer(self.analysis.model_layer);
        text.chunk_tokens = self.analysis.chunk_tokens;
        text.chunk_overlap = self.analysis.chunk_overlap;

        let mut engine = Engine::new(self.energy);
        engine.weights = self.weights;
        engine.text = text;
        engine.max_image_dim = self.analysis.max_image_dim;
        engine.allow_missing_ocr = self.analysis.allow_missing_ocr;
        engine.recommendation_layer = self.analysis.recommendation_layer;
        engine.chat = Self::chat_backend(&self.chat, "FAIRSENSE_CHAT_API_KEY", limiter)?;
        engine.vision = Self::chat_backend(&self.vision, "FAIRSENSE_VISION_API_KEY", limiter)?;
        engine.ocr = self.ocr_adapter()?;
        Ok(engine)
    }

    /// Both indexes, or neither when none are configured.
    pub fn indexes(&self) -> Result<Option<(VectorIndex, VectorIndex)>, ConfigError> {
        match (&self.index.risks, &self.index.rmf) {
            (Some(r), Some(m)) => Ok(Some((load_index(r)?, load_index(m)?))),
            _ => Ok(None),
        }
    }
}
