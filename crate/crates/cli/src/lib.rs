//! Configuration-driven experiment runner for MIUB waveform design.
//!
//! A TOML config describes the scenario, objective, optimizer and
//! evaluation settings. Each command writes plain-text result files that
//! start with a provenance header, plus a `manifest.json` listing them.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod validation;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use manifest::{ResultManifest, Role};
pub use pipeline::{execute, run_pipeline, Command};

/// Runs `f` on a pool of `threads` workers, or on the global pool when
/// `threads` is `None`. Results do not depend on the thread count.
#[cfg(feature = "parallel")]
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Sequential build: the thread count is accepted and ignored.
#[cfg(not(feature = "parallel"))]
pub fn with_threads<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    Ok(f())
}
