//! IFS definitions: map families, probability fields, and the standing-hypothesis checks.

mod checks;
mod maps;
mod matrix;
mod probs;
mod system;

pub use checks::{coa_margin, validate_system, CheckResult, MarginEstimate, ValidationReport};
pub use maps::{chord_ratio_by_images, derivative_norm_fd, MapSpec, PiecewiseAffine};
pub use matrix::Matrix;
pub use probs::{FieldKind, ProbabilityField, WeightFn};
pub use system::IfsSystem;
