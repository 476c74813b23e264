//! Files, HTTP, parallel stage execution and reports around `bankrun_core`.

pub mod client;
pub mod config;
pub mod error;
pub mod inputs;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod rules;
pub mod svg;
pub mod synth;

pub use error::{Error, ExitClass, Result};
