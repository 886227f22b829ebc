//! IO companion to `hvacopt-core`: experiment configuration, CSV/JSON file
//! formats, run manifests, plot emission, and the pipeline commands behind
//! the `hvacopt` binary.

pub mod artifacts;
pub mod config;
pub mod csvio;
pub mod error;
pub mod pipeline;
pub mod svg;

pub use error::{Category, PipelineError, PipelineResult};
