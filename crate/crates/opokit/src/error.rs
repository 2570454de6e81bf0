//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Error`]. Variants are
//! grouped into coarse [`ErrorClass`]es so that front ends can map failures
//! onto distinct exit codes without matching on individual variants: bad
//! input is distinguishable from "the physics says no" (unstable resonator,
//! pump at or above threshold), which in turn is distinguishable from a
//! numerical method giving up.

use thiserror::Error;

use crate::ray::TransversePlane;

/// Coarse failure category, used by callers to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or out-of-range input: config files, parameters, data files.
    Usage,
    /// The model is valid but the configuration is physically inadmissible.
    Physics,
    /// An iterative numerical method failed to produce a result.
    Numerical,
    /// Underlying I/O failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// The requested free-parameter set cannot be determined from the data
    /// (e.g. two parameters that only ever appear as a product).
    #[error("unidentifiable fit: {0}")]
    Unidentifiable(String),

    #[error("too few data points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("modes have different wavelengths ({a_nm:.3} nm vs {b_nm:.3} nm)")]
    WavelengthMismatch { a_nm: f64, b_nm: f64 },

    #[error("record too short for analysis: {samples} samples, need {needed}")]
    RecordTooShort { samples: usize, needed: usize },

    #[error("cavity is unstable in the {plane} plane ((A+D)/2 = {m:.6} lies outside (-1, 1))")]
    UnstableCavity { plane: TransversePlane, m: f64 },

    /// Round trip is (close to) plus or minus the identity: any beam
    /// reproduces itself and no unique eigenmode exists.
    #[error("cavity round trip is degenerate in the {plane} plane; eigenmode undetermined")]
    DegenerateCavity { plane: TransversePlane },

    #[error("pump at or above threshold (xi = {xi:.6} >= 1)")]
    AboveThreshold { xi: f64 },

    /// Root bracketing found no crossing and no tangency inside the interval.
    #[error("no waist crossing in bracket [{lo_mm:.3}, {hi_mm:.3}] mm")]
    NoCrossing { lo_mm: f64, hi_mm: f64 },

    /// The objective vanishes across the whole bracket (e.g. a layout with no
    /// astigmatism, where every distance is a crossing).
    #[error("degenerate bracket: waists coincide everywhere in [{lo_mm:.3}, {hi_mm:.3}] mm")]
    DegenerateBracket { lo_mm: f64, hi_mm: f64 },

    #[error("numerical failure: {0}")]
    NoConvergence(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidParameter(_)
            | Config(_)
            | Parse { .. }
            | Unidentifiable(_)
            | TooFewPoints { .. }
            | WavelengthMismatch { .. }
            | RecordTooShort { .. } => ErrorClass::Usage,
            UnstableCavity { .. }
            | DegenerateCavity { .. }
            | AboveThreshold { .. }
            | NoCrossing { .. }
            | DegenerateBracket { .. } => ErrorClass::Physics,
            NoConvergence(_) => ErrorClass::Numerical,
            Io(_) => ErrorClass::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
