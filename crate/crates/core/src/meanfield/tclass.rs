use serde::{Deserialize, Serialize};

use crate::model::TClassModel;

/// Largest `n` with `|d_{k,k-1}|^2 = kappa h_kk` for every `2 <= k <= n`.
///
/// Returns 1 when already the `k = 2` condition fails. `tol` is relative to
/// `max(1, kappa h_kk)`.
pub fn tclass_criticality_order(model: &TClassModel, kappa: f64, tol: f64) -> usize {
    let mut order = 1;
    for k in 1..model.levels() {
        let lhs = model.couplings[k - 1].powi(2);
        let rhs = kappa * model.h_diag[k];
        if (lhs - rhs).abs() <= tol * rhs.abs().max(1.0) {
            order = k + 1;
        } else {
            break;
        }
    }
    order
}

/// Determinant `zeta_l` of the tridiagonal mean-field matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TClassDeterminant {
    /// `zeta_l(phi)` from the scalar recurrence.
    pub value: f64,
    /// Coefficients of `zeta_l` in powers of `phi^2` (index `j` multiplies `phi^(2j)`).
    pub coefficients: Vec<f64>,
    /// Power of `phi` of the lowest non-vanishing coefficient.
    pub lowest_power: Option<usize>,
}

/// Relative threshold below which a coefficient counts as vanishing.
pub const COEFF_ZERO_TOL: f64 = 1e-12;

/// Evaluates `zeta_k = (h_kk + kappa phi^2) zeta_{k-1} - phi^2 |d_{k,k-1}|^2 zeta_{k-2}`
/// numerically and as an exact polynomial in `phi^2`.
pub fn tclass_determinant(model: &TClassModel, kappa: f64, phi: f64) -> TClassDeterminant {
    let x = phi * phi;
    let h = &model.h_diag;

    let mut prev2 = 1.0;
    let mut prev1 = h[0] + kappa * x;
    for k in 1..model.levels() {
        let next = (h[k] + kappa * x) * prev1 - x * model.couplings[k - 1].powi(2) * prev2;
        prev2 = prev1;
        prev1 = next;
    }

    let mut p2: Vec<f64> = vec![1.0];
    let mut p1: Vec<f64> = vec![h[0], kappa];
    for k in 1..model.levels() {
        let c2 = model.couplings[k - 1].powi(2);
        let mut next = vec![0.0; p1.len() + 1];
        for (j, &a) in p1.iter().enumerate() {
            next[j] += h[k] * a;
            next[j + 1] += kappa * a;
        }
        for (j, &a) in p2.iter().enumerate() {
            next[j + 1] -= c2 * a;
        }
        p2 = p1;
        p1 = next;
    }
    let scale = p1.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let lowest = p1
        .iter()
        .position(|c| c.abs() > COEFF_ZERO_TOL * scale)
        .map(|j| 2 * j);
    TClassDeterminant {
        value: prev1,
        coefficients: p1,
        lowest_power: lowest,
    }
}
