//! Constant-modulus radar waveform design under Gaussian-mixture target
//! and clutter models.
//!
//! The crate evaluates the MIUB surrogate objective (a KL-divergence term
//! plus a log-determinant mutual-information term), optimizes phase codes
//! with PC-DOA and the PSO / random-code baselines, and scores designs by
//! Monte-Carlo detection, estimation and ambiguity analysis.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
pub mod gmd;
pub mod io;
pub mod linalg;
pub mod objective;
pub mod optimizer;
pub mod oracle;
pub mod par;
pub mod rng;
pub mod waveform;

pub use error::{Error, Result};
