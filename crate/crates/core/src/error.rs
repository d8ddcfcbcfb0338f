use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(ValidationReport),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not Hermitian (|A_ij - conj(A_ji)| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("unperturbed ground state is degenerate (gap {gap:e})")]
    DegenerateGroundState { gap: f64 },

    #[error("odd-order energy correction E{order} = {value:e} does not vanish")]
    OddOrderNonzero { order: usize, value: f64 },

    #[error("mean-field minimizer failed to bracket the minimum up to phi = {phi_max}")]
    Unbracketed { phi_max: f64 },

    #[error("mean-field stationarity violated: D_11 = {d11:e}")]
    NotStationary { d11: f64 },

    #[error("complex couplings cannot be gauged real; exact diagonalization needs a real dipole matrix")]
    ComplexCouplings,

    #[error("requested size {requested_mb:.1} MB exceeds memory cap {cap_mb} MB")]
    MemoryCap { requested_mb: f64, cap_mb: usize },

    #[error("eigensolver did not converge after {iterations} iterations (max residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("rank-deficient fit input: {0}")]
    RankDeficient(String),

    #[error("no phase boundary inside the scanned window")]
    NoBoundary,

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
