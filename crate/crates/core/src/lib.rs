//! Multicritical generalized Dicke model: `N` multi-level atoms coupled to
//! one cavity mode.
//!
//! * [`model`]: atom models (`h`, `d`, parity) and coupling parameters.
//! * [`meanfield`]: order parameter, Landau coefficients, criticality
//!   conditions and phase-diagram scans.
//! * [`fluctuations`]: Gaussian theory around the mean-field state
//!   (normal modes, atom-photon entanglement entropy, photon fluctuation).
//! * [`ed`]: exact diagonalization in the permutation-symmetric sector.
//! * [`analysis`]: boundary tracing and critical-entropy scaling fits.
//! * [`io`]: model files and CSV/JSON records.

pub mod analysis;
pub mod ed;
pub mod error;
pub mod fluctuations;
pub mod io;
pub mod linalg;
pub mod meanfield;
pub mod model;

pub use error::{Error, Result};
pub use model::{AtomModel, ModelParams, Parity, TClassModel};
