//! Delay-Doppler chirp-spread modem simulator.
//!
//! The library covers the whole desk-scale simulation chain:
//!
//! - [`chirp`]: discrete orthogonal chirp families (Fresnel and affine-Fourier
//!   flavours), their sparse delay-Doppler images, and the exact forward /
//!   inverse chirp-Zak transforms built on those images.
//! - [`modem`]: per-row (I)DFT between the DD grid and time samples, cyclic
//!   prefix handling, square-root raised-cosine pulse shaping with matched
//!   filtering, and Welch PSD estimation for out-of-band emission studies.
//! - [`channel`]: the P-path doubly-selective channel in three equivalent
//!   representations (DD twisted convolution, block matrix, time-domain path
//!   sum), AWGN calibration, an EVA-derived random channel generator, and
//!   regularized least-squares equalization.
//! - [`pilot`]: superimposed and embedded pilot frames, threshold-based
//!   delay/Doppler detection, and correlation-based path-gain estimation.
//! - [`detect`]: QPSK mapping, max-path correlation detection (plain and
//!   extended-correlation variants), equalize-then-correlate detection, and
//!   BER counting.
//! - [`harness`]: seeded, reproducible Monte Carlo experiments (BER, NMSE,
//!   pilot-power sweeps, PSD export) driven by line-oriented config files.
//!
//! Everything is deterministic given a master seed: per-trial RNG streams are
//! derived from `(seed, point, trial)` so results do not depend on worker
//! scheduling.

pub mod channel;
pub mod chirp;
pub mod detect;
mod fft;
pub mod grid;
pub mod harness;
pub mod modem;
pub mod pilot;

pub use channel::{ChannelMatrix, DDChannel, PathTap};
pub use chirp::{ChirpBasis, ChirpKind};
pub use detect::{Constellation, DetectionReport};
pub use grid::{DDFrame, GridDims};
pub use harness::{ExperimentConfig, MetricRecord};
pub use pilot::{EpConfig, PathEstimate, SpConfig};

use std::fmt;

/// Library-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum CddmError {
    /// Grid dimensions violate a structural requirement.
    BadDims(String),
    /// Input length or frame shape does not match the expected grid.
    DimensionMismatch { expected: usize, got: usize },
    /// Index outside the valid range for the operation.
    IndexOutOfRange { index: usize, bound: usize },
    /// Channel construction rejected the path set.
    BadChannel(String),
    /// Pilot configuration rejected.
    BadPilot(String),
    /// Normal matrix is singular and no regularization was requested.
    SingularSystem,
    /// Configuration file failed validation.
    BadConfig(String),
    /// Filesystem failure while reading or writing run artifacts.
    Io(String),
}

impl fmt::Display for CddmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CddmError::BadDims(msg) => write!(f, "bad grid dimensions: {msg}"),
            CddmError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            CddmError::IndexOutOfRange { index, bound } => {
                write!(f, "index {index} out of range (bound {bound})")
            }
            CddmError::BadChannel(msg) => write!(f, "bad channel: {msg}"),
            CddmError::BadPilot(msg) => write!(f, "bad pilot config: {msg}"),
            CddmError::SingularSystem => write!(f, "singular normal matrix (reg = 0)"),
            CddmError::BadConfig(msg) => write!(f, "bad config: {msg}"),
            CddmError::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for CddmError {}

impl From<std::io::Error> for CddmError {
    fn from(e: std::io::Error) -> Self {
        CddmError::Io(e.to_string())
    }
}

/// Convenience result alias used across the crate.
pub type Result<T> = std::result::Result<T, CddmError>;
