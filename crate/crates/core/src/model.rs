//! Atom models, coupling parameters and their validation.
//!
//! Every model is expressed in the basis where the single-atom Hamiltonian `h`
//! is diagonal, with `h_diag[0] = 0` the non-degenerate atomic ground level.
//! Energies are in units of the atomic scale, so `omega` and `kappa` are the
//! only free knobs and `g = sqrt(omega / kappa)`.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for the structural checks (hermiticity, parity zeros).
pub const STRUCTURE_TOL: f64 = 1e-12;

/// Eigenvalue of the parity operator on one atomic level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> i32 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }

    pub fn from_sign(sign: i32) -> Option<Self> {
        match sign {
            1 => Some(Parity::Even),
            -1 => Some(Parity::Odd),
            _ => None,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// The `(h, d, P)` triple defining an `l`-level atom.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomModel {
    h_diag: Vec<f64>,
    d_matrix: DMatrix<Complex64>,
    parity: Vec<Parity>,
}

impl AtomModel {
    /// Builds a model without checking it; see [`validate`] and [`AtomModel::checked`].
    pub fn new(h_diag: Vec<f64>, d_matrix: DMatrix<Complex64>, parity: Vec<Parity>) -> Self {
        AtomModel {
            h_diag,
            d_matrix,
            parity,
        }
    }

    /// Builds a model from a real dipole matrix.
    pub fn from_real(h_diag: Vec<f64>, d_matrix: DMatrix<f64>, parity: Vec<Parity>) -> Self {
        Self::new(h_diag, d_matrix.map(|x| Complex64::new(x, 0.0)), parity)
    }

    /// Builds a model and rejects it if the validation report is non-empty.
    pub fn checked(
        h_diag: Vec<f64>,
        d_matrix: DMatrix<Complex64>,
        parity: Vec<Parity>,
    ) -> Result<Self> {
        let model = Self::new(h_diag, d_matrix, parity);
        let report = validate(&model);
        if report.is_valid() {
            Ok(model)
        } else {
            Err(Error::InvalidModel(report))
        }
    }

    pub fn levels(&self) -> usize {
        self.h_diag.len()
    }

    pub fn h_diag(&self) -> &[f64] {
        &self.h_diag
    }

    pub fn d_matrix(&self) -> &DMatrix<Complex64> {
        &self.d_matrix
    }

    pub fn parity(&self) -> &[Parity] {
        &self.parity
    }

    pub fn d(&self, i: usize, j: usize) -> Complex64 {
        self.d_matrix[(i, j)]
    }

    /// True when every dipole element is real.
    pub fn is_real(&self) -> bool {
        self.d_matrix.iter().all(|z| z.im.abs() <= STRUCTURE_TOL)
    }

    /// Real part of the dipole matrix.
    pub fn d_real(&self) -> DMatrix<f64> {
        self.d_matrix.map(|z| z.re)
    }

    /// Returns a copy with `h_diag[index]` replaced.
    pub fn with_h(&self, index: usize, value: f64) -> Self {
        let mut out = self.clone();
        out.h_diag[index] = value;
        out
    }

    /// Returns a copy with every dipole element multiplied by `factor`.
    pub fn scaled_dipole(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.d_matrix *= Complex64::new(factor, 0.0);
        out
    }

    /// The T-class view of a tridiagonal model (coupling moduli only).
    pub fn as_tclass(&self) -> Option<TClassModel> {
        let l = self.levels();
        for i in 0..l {
            for j in 0..l {
                if i.abs_diff(j) != 1 && self.d_matrix[(i, j)].norm() > STRUCTURE_TOL {
                    return None;
                }
            }
        }
        let couplings = (1..l).map(|k| self.d_matrix[(k, k - 1)].norm()).collect();
        TClassModel::new(self.h_diag.clone(), couplings).ok()
    }

    /// Rephases the basis so that the dipole matrix becomes real.
    ///
    /// The phases are fixed along a spanning forest of the coupling graph;
    /// the model is returned unchanged when it is already real and
    /// [`Error::ComplexCouplings`] when a loop of couplings carries a
    /// non-removable phase.
    pub fn gauge_real(&self) -> Result<AtomModel> {
        if self.is_real() {
            return Ok(self.clone());
        }
        let l = self.levels();
        let mut phase: Vec<Option<Complex64>> = vec![None; l];
        for root in 0..l {
            if phase[root].is_some() {
                continue;
            }
            phase[root] = Some(Complex64::new(1.0, 0.0));
            let mut stack = vec![root];
            while let Some(i) = stack.pop() {
                let pi = phase[i].unwrap();
                for j in 0..l {
                    let dij = self.d_matrix[(i, j)];
                    if phase[j].is_none() && dij.norm() > STRUCTURE_TOL {
                        // choose u_j so that conj(u_i) d_ij u_j is real positive
                        let u = pi * dij.conj() / dij.norm();
                        phase[j] = Some(u);
                        stack.push(j);
                    }
                }
            }
        }
        let u: Vec<Complex64> = phase.into_iter().map(|p| p.unwrap()).collect();
        let d = DMatrix::from_fn(l, l, |i, j| u[i].conj() * self.d_matrix[(i, j)] * u[j]);
        if d.iter().any(|z| z.im.abs() > 1e-10 * (1.0 + z.norm())) {
            return Err(Error::ComplexCouplings);
        }
        Ok(AtomModel::new(
            self.h_diag.clone(),
            d.map(|z| Complex64::new(z.re, 0.0)),
            self.parity.clone(),
        ))
    }
}

/// Photon frequency and the dimensionless coupling `kappa = omega / g^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    omega: f64,
    kappa: f64,
}

impl ModelParams {
    pub fn new(omega: f64, kappa: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidArgument(format!("omega must be > 0, got {omega}")));
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidArgument(format!("kappa must be > 0, got {kappa}")));
        }
        Ok(ModelParams { omega, kappa })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Atom-photon coupling in units of the atomic energy scale.
    pub fn g(&self) -> f64 {
        (self.omega / self.kappa).sqrt()
    }

    pub fn epsilon(&self) -> f64 {
        1.0
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            omega: 1.0,
            kappa: 1.0,
        }
    }
}

/// Tridiagonal ("T-class") coupling scheme: only `d_{k,k-1}` is non-zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TClassModel {
    pub h_diag: Vec<f64>,
    /// `|d_{k,k-1}|` for `k = 2..=l`.
    pub couplings: Vec<f64>,
}

impl TClassModel {
    pub fn new(h_diag: Vec<f64>, couplings: Vec<f64>) -> Result<Self> {
        if h_diag.len() < 2 || couplings.len() + 1 != h_diag.len() {
            return Err(Error::InvalidArgument(format!(
                "T-class model needs l >= 2 levels and l-1 couplings (got {} levels, {} couplings)",
                h_diag.len(),
                couplings.len()
            )));
        }
        if couplings.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidArgument(
                "T-class couplings must be finite and non-negative".into(),
            ));
        }
        Ok(TClassModel { h_diag, couplings })
    }

    pub fn levels(&self) -> usize {
        self.h_diag.len()
    }

    pub fn with_h(&self, index: usize, value: f64) -> Self {
        let mut out = self.clone();
        out.h_diag[index] = value;
        out
    }

    /// Expands to the full tridiagonal dipole matrix with alternating parity.
    pub fn to_atom_model(&self) -> AtomModel {
        let l = self.levels();
        let mut d = DMatrix::<f64>::zeros(l, l);
        for (k, &c) in self.couplings.iter().enumerate() {
            d[(k + 1, k)] = c;
            d[(k, k + 1)] = c;
        }
        let parity = (0..l)
            .map(|i| if i % 2 == 0 { Parity::Even } else { Parity::Odd })
            .collect();
        AtomModel::from_real(self.h_diag.clone(), d, parity)
    }
}

/// One violated model invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Violation {
    TooFewLevels { levels: usize },
    ShapeMismatch { what: &'static str, expected: usize, found: usize },
    NonFinite { row: usize, col: usize },
    GroundNotZero { value: f64 },
    NonPositiveLevel { index: usize, value: f64 },
    NotHermitian { row: usize, col: usize },
    ParityViolation { row: usize, col: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewLevels { levels } => write!(f, "need at least 2 levels, got {levels}"),
            Violation::ShapeMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected size {expected}, found {found}"),
            Violation::NonFinite { row, col } => write!(f, "non-finite entry at ({row},{col})"),
            Violation::GroundNotZero { value } => write!(f, "h_diag[0] = {value}, must be 0"),
            Violation::NonPositiveLevel { index, value } => {
                write!(f, "h_diag[{index}] = {value}, must be > 0")
            }
            Violation::NotHermitian { row, col } => {
                write!(f, "d[{row}][{col}] != conj(d[{col}][{row}])")
            }
            Violation::ParityViolation { row, col } => write!(
                f,
                "d[{row}][{col}] couples levels of equal parity (Z2 violation)"
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Checks every model invariant and reports all violations.
pub fn validate(model: &AtomModel) -> ValidationReport {
    let mut violations = Vec::new();
    let l = model.levels();
    if l < 2 {
        violations.push(Violation::TooFewLevels { levels: l });
    }
    let d = model.d_matrix();
    if d.nrows() != l || d.ncols() != l {
        violations.push(Violation::ShapeMismatch {
            what: "d_matrix",
            expected: l,
            found: d.nrows().max(d.ncols()),
        });
        return ValidationReport { violations };
    }
    if model.parity().len() != l {
        violations.push(Violation::ShapeMismatch {
            what: "parity_signs",
            expected: l,
            found: model.parity().len(),
        });
        return ValidationReport { violations };
    }
    for (k, &h) in model.h_diag().iter().enumerate() {
        if !h.is_finite() {
            violations.push(Violation::NonFinite { row: k, col: k });
        } else if k == 0 && h != 0.0 {
            violations.push(Violation::GroundNotZero { value: h });
        } else if k > 0 && h <= 0.0 {
            violations.push(Violation::NonPositiveLevel { index: k, value: h });
        }
    }
    for i in 0..l {
        for j in 0..l {
            let z = d[(i, j)];
            if !(z.re.is_finite() && z.im.is_finite()) {
                violations.push(Violation::NonFinite { row: i, col: j });
                continue;
            }
            if j > i && (z - d[(j, i)].conj()).norm() > STRUCTURE_TOL {
                violations.push(Violation::NotHermitian { row: i, col: j });
            }
            if model.parity()[i] == model.parity()[j] && z.norm() > STRUCTURE_TOL {
                violations.push(Violation::ParityViolation { row: i, col: j });
            }
        }
    }
    ValidationReport { violations }
}

/// Upper bound on the number of independently tunable parameters,
/// `G = (l^2 - delta^2)/2 - 1`, where `(l +- delta)/2` count the parity
/// eigenvalues `+-1`.
pub fn tunable_parameter_count(levels: i64, delta: i64) -> Result<i64> {
    if levels < 2 {
        return Err(Error::InvalidArgument(format!("l must be >= 2, got {levels}")));
    }
    if delta.abs() > levels {
        return Err(Error::InvalidArgument(format!("|delta| = {} exceeds l = {levels}", delta.abs())));
    }
    if (levels - delta).rem_euclid(2) != 0 {
        return Err(Error::InvalidArgument(format!(
            "l = {levels} and delta = {delta} must have equal parity"
        )));
    }
    Ok((levels * levels - delta * delta) / 2 - 1)
}

/// Couplings `(d12, d23, d34, d45)` of the cavity-assisted Raman scheme.
pub fn raman_couplings() -> [f64; 4] {
    [2f64.sqrt(), 3f64.sqrt(), 3f64.sqrt(), 2f64.sqrt()]
}

/// Level energies `(h11, .., h55)` of the fifth-order critical point at `kappa = 1`.
pub const RAMAN_CRITICAL_H: [f64; 5] = [0.0, 2.0, 3.0, 3.0, 2.0];

/// The Raman-scheme T-class model critical to the given order at `kappa = omega = 1`.
///
/// Levels beyond `order` are removed entirely, which is how an infinitely
/// detuned level enters the finite-`N` problem.
pub fn reference_model(order: usize) -> Result<(TClassModel, ModelParams)> {
    if !(2..=5).contains(&order) {
        return Err(Error::InvalidArgument(format!(
            "reference order must be in 2..=5, got {order}"
        )));
    }
    let h = RAMAN_CRITICAL_H[..order].to_vec();
    let c = raman_couplings()[..order - 1].to_vec();
    Ok((TClassModel::new(h, c)?, ModelParams::default()))
}

/// Infers parity labels from the coupling graph (level 0 is even).
///
/// Returns `None` when the graph is not bipartite, i.e. no Z2 parity exists.
pub fn infer_parity(d: &DMatrix<Complex64>) -> Option<Vec<Parity>> {
    let l = d.nrows();
    let mut parity: Vec<Option<Parity>> = vec![None; l];
    for root in 0..l {
        if parity[root].is_some() {
            continue;
        }
        parity[root] = Some(Parity::Even);
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            let pi = parity[i].unwrap();
            for j in 0..l {
                if d[(i, j)].norm() <= STRUCTURE_TOL {
                    continue;
                }
                match parity[j] {
                    None => {
                        parity[j] = Some(pi.flip());
                        stack.push(j);
                    }
                    Some(pj) if pj == pi => return None,
                    Some(_) => {}
                }
            }
        }
    }
    Some(parity.into_iter().map(|p| p.unwrap()).collect())
}
