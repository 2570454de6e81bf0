//! Design and analysis toolkit for cavity-based squeezed-vacuum sources:
//! astigmatic ring-cavity eigenmodes, squeezing spectra with a detection-loss
//! budget, stochastic homodyne-record synthesis with spectrum-analyzer
//! emulation, and damped-least-squares parameter recovery.
//!
//! Core numerics are generic over the scalar type (any [`scalar::Real`],
//! in practice `f32` or `f64`); the crate root re-exports double-precision
//! aliases for the common types.

pub mod analyzer;
pub mod cavity;
pub mod config;
pub mod error;
pub mod fit;
pub mod homodyne;
pub mod io;
pub mod mode;
pub mod ray;
pub mod scalar;
pub mod squeezing;
pub mod units;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Real;

/// Double-precision aliases for the main domain types.
pub type RayMatrix = ray::RayMatrix<f64>;
pub type GaussianMode = mode::GaussianMode<f64>;
pub type OpticalElement = cavity::OpticalElement<f64>;
pub type CavityLayout = cavity::CavityLayout<f64>;
pub type Linewidth = cavity::Linewidth<f64>;
pub type OpoParams = squeezing::OpoParams<f64>;
pub type DetectionChain = squeezing::DetectionChain<f64>;
pub type LossTable = squeezing::LossTable<f64>;
pub type TraceConfig = homodyne::TraceConfig<f64>;
pub type Record = homodyne::Record<f64>;
pub type AnalyzerConfig = analyzer::AnalyzerConfig<f64>;
pub type AnalyzedSpectrum = analyzer::AnalyzedSpectrum<f64>;
pub type SqueezingModel = fit::SqueezingModel<f64>;
pub type SpectrumData = fit::SpectrumData<f64>;
pub type FitProblem = fit::FitProblem<f64>;
pub type FitResult = fit::FitResult<f64>;
