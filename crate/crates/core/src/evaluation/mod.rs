//! Monte-Carlo detection and estimation, plus waveform analysis.

mod analysis;
mod detection;
mod estimation;
mod sampling;

pub use analysis::{ambiguity, autocorrelation, doppler_grid, AmbiguitySurface, Autocorrelation, DEFAULT_DOPPLER_POINTS};
pub use detection::{
    detection_statistics, llr_statistic, roc_curve, DetectionRun, DetectionStatistics, LlrDetector, MixtureDensity,
    RocCurve, RocPoint,
};
pub use estimation::{
    estimation_mse, mmse_estimate, mse_vs_scr, squared_errors, EstimationRun, MmseEstimator, MseEstimate, MseRow,
};
pub use sampling::{sample_gmd, standard_complex_normal, GmdSampler};
