//! File formats, threaded evaluation harness, SVG figures and the pipeline
//! behind the `rulegate` binary. Algorithms live in `rulegate-core`.

pub mod config;
pub mod error;
pub mod formats;
pub mod harness;
pub mod labeling;
pub mod pipeline;
pub mod svg;

pub use config::{RunConfig, Scale};
pub use error::{Error, Result};
