//! Post-processing: phase-boundary tracing and critical-entropy scaling fits.

mod boundary;
mod fit;

pub use boundary::{line_crossings, trace_boundary, BoundarySegment, BoundaryTrace, TracedCrossing};
pub use fit::{fit_log_scaling, sensitivity, ScalingFit, SensitivityReport};
