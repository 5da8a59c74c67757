//! Content bias scoring for text and images, semantic risk retrieval over
//! two catalog indexes, and per-run energy accounting.
//!
//! The deterministic layers (lexicon matching, fusion, exact kNN) run fully
//! offline. Model backends are reached through a chat-completion wire client
//! and can be replaced with pure stubs for reproducible runs.

pub mod backends;
pub mod engine;
pub mod error;
pub mod finding;
pub mod fusion;
pub mod image;
pub mod index;
pub mod recommend;
pub mod report;
pub mod risk;
pub mod telemetry;
pub mod testkit;
pub mod text;

pub use engine::Engine;
pub use error::{Error, Result};
pub use finding::{BiasFinding, Modality, Span};
pub use fusion::{
    band_of, contextual_score, fuse_scores, normalize_weights, BiasComponents, BiasScore,
    FusionWeights, SeverityBand,
};
pub use report::BiasReport;
