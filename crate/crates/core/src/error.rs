//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Result`]. Variants are
//! grouped by failure class rather than by module so that callers (the CLI,
//! the solver loop) can decide between "user gave us a bad problem" and
//! "the numerics gave up" without string-matching.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The request lies outside the implemented problem domain
    /// (non-hydrogen atoms, wrong electron count, and similar).
    #[error("unsupported problem domain: {0}")]
    Domain(String),

    /// A mathematically invalid argument (negative Boys argument,
    /// zero shots, out-of-range dates, malformed ranges).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Geometry is degenerate (coincident nuclei).
    #[error("degenerate geometry: {0}")]
    Geometry(String),

    /// The AO overlap matrix is numerically singular.
    #[error("near-linear-dependent basis: smallest overlap eigenvalue {eigmin:.3e} is below {limit:.1e}")]
    LinearDependence { eigmin: f64, limit: f64 },

    /// An internal consistency precondition failed (non-orthonormal
    /// orbitals, wrong matrix dimensions, occupations off the pinned
    /// surface).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A normalization check failed (2-RDM trace, negative radicand).
    #[error("normalization error: {0}")]
    Normalization(String),

    /// The SCF loop did not converge.
    #[error("SCF did not converge within {iterations} iterations (last |dE| = {delta_e:.3e} Ha)")]
    ScfDivergence { iterations: usize, delta_e: f64 },

    /// Calibration data could not be parsed or is structurally unusable.
    #[error("calibration data: {0}")]
    Schema(String),

    /// Calibration measurements are too degenerate to invert.
    #[error("calibration failure: {0}")]
    Calibration(String),

    /// The derivative-free optimizer aborted (non-finite objective).
    #[error("optimizer abort: {0}")]
    Optimizer(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
