//! IO, file formats, configuration and orchestration around `authcil-core`.

pub mod compare;
pub mod config;
pub mod corpus_io;
pub mod error;
pub mod manifest;
pub mod persist;
pub mod report;
pub mod runner;
pub mod synth;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use manifest::{load_manifest, save_manifest, Manifest};
pub use report::RunReport;
pub use runner::{run_in_memory, run_sessions, train_to_dir, RunState};
pub use synth::SynthConfig;
