//! File formats, configuration, pipeline stages and the command-line
//! interface around `artdesc-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod logging;
pub mod pipeline;

pub use config::{KnowledgeMode, PipelineConfig};
pub use error::{AppError, AppResult};
