//! Service layer for the fairsense engine: configuration, batch runs and
//! the HTTP API. The `fairsense` binary wraps these as CLI verbs.

pub mod batch;
pub mod config;
pub mod server;

pub use batch::{batch_analyze_images, batch_analyze_text, BatchResult, FailureRow};
pub use config::{ConfigError, EngineConfig};
pub use server::{router, AppState};
