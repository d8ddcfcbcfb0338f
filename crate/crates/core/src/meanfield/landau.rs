//! Landau expansion `eps1 = sum_k c_k phi^(2k)` and the closed-form
//! criticality conditions.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AtomModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandauCoefficients {
    /// `c[k]` multiplies `phi^(2k)`; `c[1]` includes the `kappa phi^2` term.
    pub c: Vec<f64>,
}

impl LandauCoefficients {
    /// Index of the first coefficient above `tol` in magnitude, starting at `c1`.
    pub fn first_nonvanishing(&self, tol: f64) -> Option<usize> {
        (1..self.c.len()).find(|&k| self.c[k].abs() > tol)
    }
}

/// Rayleigh-Schroedinger energy corrections `E_0..=E_order` of `h + phi d`
/// in powers of `phi`, with `h` (diagonal) as the unperturbed Hamiltonian.
///
/// Uses intermediate normalization:
/// `E_n = <0|d|psi_{n-1}>`,
/// `(h_j - E_0) psi_n[j] = -(d psi_{n-1})_j + sum_{k=1}^{n-1} E_k psi_{n-k}[j]`.
pub fn rs_energy_series(model: &AtomModel, order: usize) -> Result<Vec<Complex64>> {
    let l = model.levels();
    let h = model.h_diag();
    let e0 = h[0];
    let gap = h[1..].iter().map(|&x| x - e0).fold(f64::INFINITY, f64::min);
    let scale = 1.0 + h.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if !(gap > 1e-12 * scale) {
        return Err(Error::DegenerateGroundState { gap });
    }
    let d = model.d_matrix();
    let zero = Complex64::new(0.0, 0.0);
    let mut energies = vec![Complex64::new(e0, 0.0)];
    let mut psi: Vec<DVector<Complex64>> = vec![DVector::from_fn(l, |i, _| {
        if i == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            zero
        }
    })];
    for n in 1..=order {
        let dpsi = d * &psi[n - 1];
        energies.push(dpsi[0]);
        let mut next = DVector::from_element(l, zero);
        for j in 1..l {
            let mut acc = -dpsi[j];
            for k in 1..n {
                acc += energies[k] * psi[n - k][j];
            }
            next[j] = acc / (h[j] - e0);
        }
        psi.push(next);
    }
    Ok(energies)
}

/// Landau coefficients `c_0..=c_max_order` from the perturbative series.
///
/// `c_1 = kappa + E_2`, `c_k = E_2k`; odd corrections must vanish by Z2.
pub fn landau_coefficients(
    model: &AtomModel,
    kappa: f64,
    max_order: usize,
) -> Result<LandauCoefficients> {
    let series = rs_energy_series(model, 2 * max_order.max(1))?;
    let mut scale = 1.0f64;
    for (n, e) in series.iter().enumerate() {
        scale = scale.max(e.norm());
        if e.im.abs() > 1e-12 * scale {
            return Err(Error::Inconsistent(format!(
                "energy correction E{n} has imaginary part {:e}",
                e.im
            )));
        }
        if n % 2 == 1 && e.re.abs() > 1e-12 * scale {
            return Err(Error::OddOrderNonzero {
                order: n,
                value: e.re,
            });
        }
    }
    let mut c = Vec::with_capacity(max_order + 1);
    c.push(series[0].re);
    for k in 1..=max_order {
        let mut ck = series[2 * k].re;
        if k == 1 {
            ck += kappa;
        }
        c.push(ck);
    }
    Ok(LandauCoefficients { c })
}

/// `kappa - sum_{k>=2} |d_1k|^2 / h_kk`; zero on the ordinary critical manifold.
pub fn ordinary_critical_residual(model: &AtomModel, kappa: f64) -> f64 {
    let h = model.h_diag();
    kappa
        - (1..model.levels())
            .map(|k| model.d(0, k).norm_sqr() / h[k])
            .sum::<f64>()
}

/// Left minus right side of the fourth-order condition
///
/// `sum_{k1 k2 k3} d_{1k1} d_{k1k2} d_{k2k3} d_{k31} / (h_k1 h_k2 h_k3)
///   = sum_{k1 k2} |d_{1k1}|^2 |d_{1k2}|^2 / (h_k1^2 h_k2)`,
///
/// all indices running over the excited levels. It equals `-c_2`.
pub fn c2_residual(model: &AtomModel, _kappa: f64) -> f64 {
    let l = model.levels();
    let h = model.h_diag();
    let mut lhs = Complex64::new(0.0, 0.0);
    for k1 in 1..l {
        let a = model.d(0, k1);
        if a.norm_sqr() == 0.0 {
            continue;
        }
        for k2 in 1..l {
            let b = a * model.d(k1, k2);
            if b.norm_sqr() == 0.0 {
                continue;
            }
            for k3 in 1..l {
                lhs += b * model.d(k2, k3) * model.d(k3, 0) / (h[k1] * h[k2] * h[k3]);
            }
        }
    }
    let mut rhs = 0.0;
    for k1 in 1..l {
        for k2 in 1..l {
            rhs += model.d(0, k1).norm_sqr() * model.d(0, k2).norm_sqr() / (h[k1] * h[k1] * h[k2]);
        }
    }
    lhs.re - rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::ground_energy;
    use crate::model::{reference_model, TClassModel};
    use proptest::prelude::*;

    fn two_level(h22: f64) -> AtomModel {
        reference_model(2).unwrap().0.with_h(1, h22).to_atom_model()
    }

    #[test]
    fn two_level_critical_c1() {
        let c = landau_coefficients(&two_level(2.0), 1.0, 3).unwrap();
        assert!(c.c[0].abs() < 1e-15);
        assert!(c.c[1].abs() < 1e-14);
        // exact: eps1 = phi^2 + (h - sqrt(h^2 + 8 phi^2))/2, h = 2
        //   = phi^2 - phi^2 + phi^4/2 - phi^6/2 + ...
        assert!((c.c[2] - 0.5).abs() < 1e-14);
        assert!((c.c[3] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn fifth_order_reference_point() {
        let m = reference_model(5).unwrap().0.to_atom_model();
        let c = landau_coefficients(&m, 1.0, 5).unwrap();
        for k in 1..5 {
            assert!(c.c[k].abs() < 1e-10, "c{k} = {}", c.c[k]);
        }
        assert!(c.c[5].abs() > 1e-3);
    }

    #[test]
    fn c1_positive_at_large_kappa() {
        let m = reference_model(4).unwrap().0.to_atom_model();
        assert!(landau_coefficients(&m, 50.0, 1).unwrap().c[1] > 0.0);
    }

    #[test]
    fn ordinary_residual_examples() {
        assert!(ordinary_critical_residual(&two_level(2.0), 1.0).abs() < 1e-15);
        assert!((ordinary_critical_residual(&two_level(4.0), 1.0) - 0.5).abs() < 1e-15);
        let decoupled = two_level(2.0).scaled_dipole(0.0);
        assert_eq!(ordinary_critical_residual(&decoupled, 0.7), 0.7);
    }

    #[test]
    fn c2_residual_examples() {
        let m = reference_model(3).unwrap().0.to_atom_model();
        assert!(c2_residual(&m, 1.0).abs() < 1e-12);
        // two levels: no closed three-step path, only the right side survives
        let r = c2_residual(&two_level(3.0), 1.0);
        assert!((r + 4.0 / 27.0).abs() < 1e-15);
        assert_eq!(c2_residual(&two_level(3.0).scaled_dipole(0.0), 1.0), 0.0);
        // opposite sign to c2
        let c2 = landau_coefficients(&two_level(3.0), 1.0, 2).unwrap().c[2];
        assert!(c2 > 0.0 && r < 0.0);
    }

    #[test]
    fn degenerate_ground_state_rejected() {
        let m = two_level(2.0).with_h(1, 0.0);
        assert!(matches!(
            landau_coefficients(&m, 1.0, 2),
            Err(Error::DegenerateGroundState { .. })
        ));
    }

    /// Polynomial fit oracle: eps1(phi) sampled at small phi.
    #[test]
    fn coefficients_match_energy_curve() {
        let m = TClassModel::new(vec![0.0, 1.3, 2.1, 0.9], vec![0.8, 1.1, 0.6])
            .unwrap()
            .to_atom_model();
        let c = landau_coefficients(&m, 1.4, 4).unwrap();
        for &phi in &[0.01, 0.03, 0.05] {
            let p2: f64 = phi * phi;
            let series: f64 = (0..=4).map(|k| c.c[k] * p2.powi(k as i32)).sum();
            let exact = ground_energy(&m, 1.4, phi).unwrap();
            assert!((series - exact).abs() < 1e-13 + 1e3 * p2.powi(5), "phi={phi}");
        }
    }

    proptest! {
        #[test]
        fn c1_matches_closed_form(
            h in proptest::collection::vec(0.2f64..5.0, 3),
            c in proptest::collection::vec(0.0f64..2.5, 3),
            kappa in 0.1f64..3.0,
        ) {
            let mut hd = vec![0.0];
            hd.extend(h);
            let m = TClassModel::new(hd, c).unwrap().to_atom_model();
            let lc = landau_coefficients(&m, kappa, 3).unwrap();
            prop_assert!((lc.c[1] - ordinary_critical_residual(&m, kappa)).abs() < 1e-12 * (1.0 + kappa));
            prop_assert!((lc.c[2] + c2_residual(&m, kappa)).abs() < 1e-10 * (1.0 + lc.c[2].abs()));
        }
    }
}
