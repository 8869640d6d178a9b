//! Pipeline, file formats, CLI plumbing and HTTP service for gesture-preserving
//! latent editing on top of `latent-edit-core`.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod serve;

pub use config::RunConfig;
pub use error::{PipelineError, Result};
