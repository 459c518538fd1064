//! Simulation and dimension estimation for iterated function systems whose
//! maps contract only on average and whose probabilities depend on the
//! current point.

pub mod builtin;
pub mod config;
pub mod dimension;
pub mod ergodic;
pub mod error;
pub mod geometry;
pub mod model;
pub mod point;
pub mod sampler;
pub mod seed;
pub mod symbolic;

pub use builtin::NamedSystem;
pub use config::RunConfig;
pub use dimension::{CoverReport, DimensionSummary, LocalDimEstimate};
pub use ergodic::{EstimateWithError, TailReport};
pub use error::{Error, Result};
pub use geometry::{OpenSet, OscReport};
pub use model::{IfsSystem, MapSpec, MarginEstimate, ProbabilityField, ValidationReport};
pub use point::Point;
pub use sampler::{EmpiricalMeasure, GridMeasure, Trajectory};
pub use symbolic::{CodingResult, SymbolStream, Word};
