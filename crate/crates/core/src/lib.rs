//! Quantum trajectory toolkit: correlation functions assembled from
//! independently propagated Bohmian trajectories, closed by evolving spatial
//! derivatives of the log-amplitude and phase along each path, plus a
//! grid-based reference solver (split-operator propagation and sinc-DVR
//! diagonalization) for cross-checking.

pub mod config;
pub mod dpm;
pub mod ivr;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod spectrum;

use thiserror::Error;

/// Errors produced by the numerical layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state component exceeded {limit:e} at t = {t} (diverged trajectory)")]
    Overflow { t: f64, limit: f64 },
    #[error("operator amplitude vanishes at x = {x} (evaluation at a node)")]
    EvaluationAtNode { x: f64 },
    #[error("n_order = {n_order} is too small; the hierarchy needs n_order >= 2")]
    OrderTooSmall { n_order: usize },
    #[error("need at least 2 quadrature points, got {n_points}")]
    TooFewPoints { n_points: usize },
    #[error("density cutoff must lie in (0, 1), got {cutoff}")]
    BadCutoff { cutoff: f64 },
    #[error("trajectory records do not share a snapshot time grid")]
    MismatchedTimeGrids,
    #[error("degenerate ensemble: duplicate initial positions at x = {x}")]
    DegenerateInitialPoints { x: f64 },
    #[error("grid has {n_grid} points but {n_records} trajectory records")]
    GridRecordMismatch { n_grid: usize, n_records: usize },
    #[error("trajectory endpoint x = {x} lies outside the reconstructed field support [{lo}, {hi}]")]
    EndpointOutOfRange { x: f64, lo: f64, hi: f64 },
    #[error("operator amplitude changes sign across the ensemble at t = {t} (node crossing)")]
    NodeCrossing { t: f64 },
    #[error("correlation series is not uniform in time")]
    NonUniformTimeGrid,
    #[error("frequency window is empty: omega_min = {omega_min} >= omega_max = {omega_max}")]
    EmptyFrequencyWindow { omega_min: f64, omega_max: f64 },
    #[error("wavepacket density {density:e} at the grid edge exceeds {limit:e} (edge leakage)")]
    EdgeLeakage { density: f64, limit: f64 },
    #[error("eigensolver failed to converge")]
    EigenFailure,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
