//! Mean-field theory of the generalized Dicke model.
//!
//! Replacing the photon operator by `sqrt(N) phi / g` leaves the single-atom
//! problem `H_MF = kappa phi^2 + phi d + h`. Its lowest eigenvalue
//! `eps1(phi)` is even in `phi`; the global minimizer over `phi >= 0` is the
//! order parameter.

mod boundary;
mod landau;
mod scan;
mod tclass;

pub use boundary::{refine_crossing, Crossing, CrossingOptions, JUMP_THRESHOLD};
pub use landau::{
    c2_residual, landau_coefficients, ordinary_critical_residual, rs_energy_series,
    LandauCoefficients,
};
pub use scan::{scan_phase_diagram, HParam, ScanAxis, ScanPoint, ScanResult, ScanSpec};
pub use tclass::{tclass_criticality_order, tclass_determinant, TClassDeterminant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_hermitian, golden_section_min, hermitian_eigen, symmetric_eigen};
use crate::model::AtomModel;

/// Below this the order parameter is reported as zero.
pub const PHI_ZERO_TOL: f64 = 1e-6;
/// Relative energy gain (in units of `kappa phi^2`) needed to prefer `phi != 0`.
pub const ENERGY_TIE_TOL: f64 = 1e-12;
/// Coarse grid resolution of the minimizer.
pub const COARSE_GRID: usize = 200;
/// Maximum number of times the search window is doubled.
pub const MAX_EXPANSIONS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Normal,
    Superradiant,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Normal => "normal",
            Phase::Superradiant => "superradiant",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionOrder {
    FirstOrder,
    SecondOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSolution {
    /// Non-negative order parameter; `-phi_star` is the Z2 partner.
    pub phi_star: f64,
    /// `eps1(phi_star)`, never above `eps1(0) = 0`.
    pub energy: f64,
    pub phase: Phase,
    pub transition_order_hint: Option<TransitionOrder>,
}

/// The mean-field matrix `kappa phi^2 + phi d + h`.
pub fn mean_field_matrix(model: &AtomModel, kappa: f64, phi: f64) -> DMatrix<Complex64> {
    let l = model.levels();
    let shift = kappa * phi * phi;
    DMatrix::from_fn(l, l, |i, j| {
        let mut z = model.d(i, j) * phi;
        if i == j {
            z += Complex64::new(model.h_diag()[i] + shift, 0.0);
        }
        z
    })
}

/// Eigenvalues (ascending) and eigenvectors of the mean-field matrix.
pub fn mean_field_eigen(
    model: &AtomModel,
    kappa: f64,
    phi: f64,
) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let m = mean_field_matrix(model, kappa, phi);
    ensure_hermitian(&m)?;
    if model.is_real() {
        let (vals, vecs) = symmetric_eigen(m.map(|z| z.re));
        Ok((vals, vecs.map(|x| Complex64::new(x, 0.0))))
    } else {
        Ok(hermitian_eigen(m))
    }
}

/// Lowest eigenvalue of the mean-field matrix by a dense eigensolve.
pub fn ground_energy(model: &AtomModel, kappa: f64, phi: f64) -> Result<f64> {
    ensure_hermitian(&mean_field_matrix(model, kappa, phi))?;
    Ok(lowest_eigenvalue(model, kappa, phi))
}

fn lowest_eigenvalue(model: &AtomModel, kappa: f64, phi: f64) -> f64 {
    let vals = if model.is_real() {
        let l = model.levels();
        let d = model.d_matrix();
        let shift = kappa * phi * phi;
        DMatrix::from_fn(l, l, |i, j| {
            d[(i, j)].re * phi + if i == j { model.h_diag()[i] + shift } else { 0.0 }
        })
        .symmetric_eigenvalues()
    } else {
        mean_field_matrix(model, kappa, phi).symmetric_eigenvalues()
    };
    vals.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `(eps1(phi) - h_diag[0]) / phi^2`, evaluated without cancellation.
///
/// Eliminating level 0 gives the exact secular relation
/// `E = -phi^2 b^dag (A - E)^{-1} b` with `A = h_rest + phi d_rest` and
/// `b = d_{k0}`; solving it by safeguarded Newton iteration keeps full
/// relative precision in `E / phi^2`, which a dense eigensolve loses once
/// `|eps1| << kappa phi^2`. At `phi = 0` this is the Landau coefficient `c1`.
pub fn reduced_energy(model: &AtomModel, kappa: f64, phi: f64) -> Result<f64> {
    let l = model.levels();
    let h0 = model.h_diag()[0];
    let b: Vec<Complex64> = (1..l).map(|k| model.d(k, 0)).collect();
    if phi == 0.0 {
        let mut s = 0.0;
        for (k, bk) in b.iter().enumerate() {
            let gap = model.h_diag()[k + 1] - h0;
            if gap <= 0.0 {
                return Err(Error::DegenerateGroundState { gap });
            }
            s += bk.norm_sqr() / gap;
        }
        return Ok(kappa - s);
    }
    let (lam, w): (Vec<f64>, Vec<f64>) = if model.is_real() {
        let d = model.d_matrix();
        let rest = DMatrix::from_fn(l - 1, l - 1, |i, j| {
            d[(i + 1, j + 1)].re * phi + if i == j { model.h_diag()[i + 1] - h0 } else { 0.0 }
        });
        let eig = rest.symmetric_eigen();
        let w = (0..l - 1)
            .map(|j| {
                let c: f64 = (0..l - 1).map(|i| eig.eigenvectors[(i, j)] * b[i].re).sum();
                c * c
            })
            .collect();
        (eig.eigenvalues.iter().copied().collect(), w)
    } else {
        let rest = DMatrix::from_fn(l - 1, l - 1, |i, j| {
            let mut z = model.d(i + 1, j + 1) * phi;
            if i == j {
                z += Complex64::new(model.h_diag()[i + 1] - h0, 0.0);
            }
            z
        });
        let (lam, u) = hermitian_eigen(rest);
        let c = u.adjoint() * DVector::from_vec(b);
        (lam, c.iter().map(|z| z.norm_sqr()).collect())
    };
    let e_dense = lowest_eigenvalue(model, 0.0, phi) - h0;
    let lam_min = lam.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = 1.0 + lam.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if e_dense >= lam_min - 1e-12 * scale || w.iter().all(|&x| x == 0.0) {
        return Ok(kappa + e_dense / (phi * phi));
    }
    let p2 = phi * phi;
    let s_of = |e: f64| -> (f64, f64) {
        let mut s = 0.0;
        let mut sp = 0.0;
        for (lj, wj) in lam.iter().zip(&w) {
            let inv = 1.0 / (lj - e);
            s += wj * inv;
            sp += wj * inv * inv;
        }
        (s, sp)
    };
    let mut e = e_dense;
    let mut hi = lam_min;
    let mut lo = f64::NEG_INFINITY;
    for _ in 0..60 {
        let (s, sp) = s_of(e);
        let f = e + p2 * s;
        if f > 0.0 {
            hi = hi.min(e);
        } else {
            lo = lo.max(e);
        }
        let step = f / (1.0 + p2 * sp);
        let mut next = e - step;
        if !(next < hi && next > lo) {
            next = if lo.is_finite() {
                0.5 * (lo + hi)
            } else {
                e - 2.0 * step.abs().max(1e-300)
            };
        }
        if (next - e).abs() <= 4.0 * f64::EPSILON * e.abs().max(f64::MIN_POSITIVE) {
            e = next;
            break;
        }
        e = next;
    }
    Ok(kappa + e / p2)
}

/// `eps1(phi)` evaluated through [`reduced_energy`].
pub fn ground_energy_precise(model: &AtomModel, kappa: f64, phi: f64) -> Result<f64> {
    Ok(model.h_diag()[0] + phi * phi * reduced_energy(model, kappa, phi)?)
}

/// `d eps1 / d phi = <1|D|1>` with `D = d + 2 kappa phi`, and the curvature
/// `d^2 eps1 / d phi^2` from second-order perturbation theory.
pub fn stationarity(model: &AtomModel, kappa: f64, phi: f64) -> Result<(f64, f64)> {
    let (vals, vecs) = mean_field_eigen(model, kappa, phi)?;
    let d = model.d_matrix();
    let v1 = vecs.column(0);
    let dv1 = d * v1;
    let d11 = v1.dotc(&dv1).re + 2.0 * kappa * phi;
    let mut curv = 2.0 * kappa;
    for k in 1..vals.len() {
        let dk1 = vecs.column(k).dotc(&dv1);
        curv += 2.0 * dk1.norm_sqr() / (vals[0] - vals[k]);
    }
    Ok((d11, curv))
}

/// Global minimizer of `eps1` over `phi >= 0`.
pub fn order_parameter(model: &AtomModel, kappa: f64) -> Result<MeanFieldSolution> {
    let h0 = model.h_diag()[0];
    let f = |phi: f64| -> f64 {
        match reduced_energy(model, kappa, phi) {
            Ok(r) => phi * phi * r,
            Err(_) => f64::NAN,
        }
    };
    // error surface for the degenerate / non-Hermitian cases
    reduced_energy(model, kappa, 0.0)?;
    ensure_hermitian(&mean_field_matrix(model, kappa, 1.0))?;

    let hmax = model.h_diag()[1..]
        .iter()
        .fold(0.0f64, |a, &h| a.max((h - h0).abs()));
    let mut phi_max = 2.0 * (hmax / kappa).sqrt().max(1.0 / kappa.sqrt());
    let mut expansions = 0;
    let (grid, values, imin) = loop {
        let grid: Vec<f64> = (0..COARSE_GRID)
            .map(|i| phi_max * i as f64 / (COARSE_GRID - 1) as f64)
            .collect();
        let values: Vec<f64> = grid.iter().map(|&p| f(p)).collect();
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Inconsistent("mean-field energy evaluation failed".into()));
        }
        let imin = argmin(&values);
        if imin == COARSE_GRID - 1 {
            if expansions == MAX_EXPANSIONS {
                return Err(Error::Unbracketed { phi_max });
            }
            expansions += 1;
            phi_max *= 2.0;
            continue;
        }
        break (grid, values, imin);
    };

    let mut best = (0.0, 0.0);
    let mut consider = |x: f64, fx: f64| {
        if fx < best.1 {
            best = (x, fx);
        }
    };
    consider(grid[imin], values[imin]);
    let lo = grid[imin.saturating_sub(1)];
    let hi = grid[imin + 1];
    let (x, fx) = golden_section_min(&f, lo, hi, 1e-15, 1e-12);
    consider(x, fx);
    // a continuous transition puts a tiny minimum inside the first cell
    let (x, fx) = golden_section_min(&f, 0.0, grid[1], 1e-15, 1e-12);
    consider(x, fx);

    let (mut phi, mut energy) = best;
    if phi < PHI_ZERO_TOL || energy >= -ENERGY_TIE_TOL * kappa * phi * phi {
        return Ok(MeanFieldSolution {
            phi_star: 0.0,
            energy: h0,
            phase: Phase::Normal,
            transition_order_hint: None,
        });
    }
    // Newton polish on the stationarity condition D_11 = 0
    for _ in 0..8 {
        let (d11, curv) = stationarity(model, kappa, phi)?;
        if d11.abs() < 1e-14 || curv <= 0.0 {
            break;
        }
        let cand = phi - d11 / curv;
        if !(cand > 0.0) {
            break;
        }
        // the energy is flat to rounding here; only reject real increases
        let fc = f(cand);
        if fc <= energy + 1e-13 * (1.0 + energy.abs()) {
            phi = cand;
            energy = fc;
        } else {
            break;
        }
    }
    Ok(MeanFieldSolution {
        phi_star: phi,
        energy: h0 + energy,
        phase: Phase::Superradiant,
        transition_order_hint: None,
    })
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{reference_model, Parity};
    use proptest::prelude::*;

    fn two_level(h22: f64) -> AtomModel {
        reference_model(2).unwrap().0.with_h(1, h22).to_atom_model()
    }

    /// Brute-force scan oracle for the minimizer.
    fn scan_min(model: &AtomModel, kappa: f64) -> (f64, f64) {
        let mut best = (0.0, ground_energy(model, kappa, 0.0).unwrap());
        for i in 0..=40000 {
            let phi = 4.0 * i as f64 / 40000.0;
            let e = ground_energy(model, kappa, phi).unwrap();
            if e < best.1 {
                best = (phi, e);
            }
        }
        best
    }

    #[test]
    fn ground_energy_at_zero_is_zero() {
        let m = reference_model(5).unwrap().0.to_atom_model();
        assert_eq!(ground_energy(&m, 1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn two_level_closed_form() {
        // 2x2: [[1, sqrt2],[sqrt2, 3]] -> 2 - sqrt(3)
        let e = ground_energy(&two_level(2.0), 1.0, 1.0).unwrap();
        assert!((e - (2.0 - 3f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn normal_and_superradiant_two_level() {
        let s = order_parameter(&two_level(3.0), 1.0).unwrap();
        assert_eq!(s.phase, Phase::Normal);
        assert_eq!(s.phi_star, 0.0);
        let (phi, _) = scan_min(&two_level(3.0), 1.0);
        assert_eq!(phi, 0.0);

        let s = order_parameter(&two_level(1.0), 1.0).unwrap();
        assert_eq!(s.phase, Phase::Superradiant);
        let (phi, e) = scan_min(&two_level(1.0), 1.0);
        assert!((s.phi_star - phi).abs() < 2e-4);
        assert!(s.energy <= e + 1e-12);
        // closed form: 8 phi^2 = 4 - h^2 at kappa = 1
        assert!((s.phi_star - (3.0f64 / 8.0).sqrt()).abs() < 1e-10);

        let s = order_parameter(&two_level(2.0), 1.0).unwrap();
        assert_eq!(s.phase, Phase::Normal);
    }

    #[test]
    fn superradiant_solution_is_stationary() {
        let m = reference_model(4).unwrap().0.with_h(1, 1.7).to_atom_model();
        let s = order_parameter(&m, 1.0).unwrap();
        assert_eq!(s.phase, Phase::Superradiant);
        let (d11, _) = stationarity(&m, 1.0, s.phi_star).unwrap();
        assert!(d11.abs() < 1e-8, "D11 = {d11}");
    }

    #[test]
    fn reduced_energy_resolves_tiny_order_parameter() {
        // c1 = 1 - 2/h22 < 0 by ~1e-10
        let m = two_level(2.0 - 4e-10);
        let s = order_parameter(&m, 1.0).unwrap();
        assert_eq!(s.phase, Phase::Superradiant);
        // phi^2 = (4 - h^2)/8
        let expected = ((4.0 - (2.0f64 - 4e-10).powi(2)) / 8.0).sqrt();
        assert!((s.phi_star - expected).abs() < 1e-3 * expected);
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let mut d = DMatrix::<Complex64>::zeros(2, 2);
        d[(0, 1)] = Complex64::new(1.0, 0.0);
        let m = AtomModel::new(vec![0.0, 1.0], d, vec![Parity::Even, Parity::Odd]);
        assert!(matches!(
            ground_energy(&m, 1.0, 0.5),
            Err(Error::NotHermitian { .. })
        ));
    }

    proptest! {
        #[test]
        fn energy_is_even_and_reduced_form_agrees(
            h in proptest::collection::vec(0.2f64..5.0, 4),
            c in proptest::collection::vec(0.0f64..2.5, 4),
            kappa in 0.3f64..3.0,
            phi in 0.0f64..3.0,
        ) {
            let mut hd = vec![0.0];
            hd.extend(h);
            let m = crate::model::TClassModel::new(hd, c).unwrap().to_atom_model();
            let ep = ground_energy(&m, kappa, phi).unwrap();
            let em = ground_energy(&m, kappa, -phi).unwrap();
            prop_assert!((ep - em).abs() < 1e-12 * (1.0 + ep.abs()));
            let precise = ground_energy_precise(&m, kappa, phi).unwrap();
            prop_assert!((precise - ep).abs() < 1e-11 * (1.0 + kappa * phi * phi));
            prop_assert!(order_parameter(&m, kappa).unwrap().energy <= 1e-15);
        }
    }
}
