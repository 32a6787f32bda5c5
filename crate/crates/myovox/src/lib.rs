//! File formats, batch pipeline, command line and authoring service for the
//! muscle-modelling engine in `myovox-core`.

pub mod config;
pub mod error;
pub mod io;
pub mod json;
pub mod manifest;
pub mod pipeline;
pub mod service;

pub use error::{Error, Result};
pub use myovox_core as core;
