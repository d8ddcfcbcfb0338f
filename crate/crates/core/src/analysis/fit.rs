use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares fit `S_cri = s0 + s1 ln N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub s0: f64,
    pub s1: f64,
    pub se_s0: f64,
    pub se_s1: f64,
    /// Covariance of `(s0, s1)`.
    pub covariance: [[f64; 2]; 2],
    pub n_window: (f64, f64),
    pub residuals: Vec<f64>,
    pub r_squared: f64,
}

pub fn fit_log_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "scaling fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) || points[0].0 <= 0.0 {
        return Err(Error::InvalidArgument(
            "atom numbers must be positive and strictly increasing".into(),
        ));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ybar).powi(2)).sum();
    if !(sxx > 1e-14 * (1.0 + xbar * xbar)) {
        return Err(Error::RankDeficient("all ln N coincide".into()));
    }
    let s1 = sxy / sxx;
    let s0 = ybar - s1 * xbar;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - s0 - s1 * x).collect();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let sigma2 = ssr / (n - 2.0);
    let var_s1 = sigma2 / sxx;
    let var_s0 = sigma2 * (1.0 / n + xbar * xbar / sxx);
    let cov = -xbar * sigma2 / sxx;
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(ScalingFit {
        s0,
        s1,
        se_s0: var_s0.sqrt(),
        se_s1: var_s1.sqrt(),
        covariance: [[var_s0, cov], [cov, var_s1]],
        n_window: (points[0].0, points[points.len() - 1].0),
        residuals,
        r_squared,
    })
}

/// Full-window fit plus a refit on the upper part of the window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub full: ScalingFit,
    /// Fit over the last `max(4, ceil(n/2))` points, when that is a proper subset.
    pub upper: Option<ScalingFit>,
}

impl SensitivityReport {
    pub fn s1_shift(&self) -> Option<f64> {
        self.upper.as_ref().map(|u| u.s1 - self.full.s1)
    }
}

pub fn sensitivity(points: &[(f64, f64)]) -> Result<SensitivityReport> {
    let full = fit_log_scaling(points)?;
    let keep = 4usize.max(points.len().div_ceil(2));
    let upper = if keep < points.len() {
        Some(fit_log_scaling(&points[points.len() - keep..])?)
    } else {
        None
    };
    Ok(SensitivityReport { full, upper })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_generator() {
        let pts: Vec<(f64, f64)> = [4.0, 8.0, 16.0, 32.0, 64.0]
            .iter()
            .map(|&n: &f64| (n, 0.5 + 0.2 * n.ln()))
            .collect();
        let f = fit_log_scaling(&pts).unwrap();
        assert!((f.s0 - 0.5).abs() < 1e-12);
        assert!((f.s1 - 0.2).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.se_s1 < 1e-12);
    }

    #[test]
    fn standard_errors_match_textbook() {
        // y = 1 + 2x with residuals (+e, -e, -e, +e) at x = ln(1..4)
        let xs: Vec<f64> = [1.0f64, 2.0, 3.0, 4.0].to_vec();
        let e = 0.01;
        let noise = [e, -e, -e, e];
        let pts: Vec<(f64, f64)> = xs
            .iter()
            .zip(noise)
            .map(|(&n, r)| (n, 1.0 + 2.0 * n.ln() + r))
            .collect();
        let f = fit_log_scaling(&pts).unwrap();
        let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let m = lx.iter().sum::<f64>() / 4.0;
        let sxx: f64 = lx.iter().map(|x| (x - m).powi(2)).sum();
        let ssr: f64 = f.residuals.iter().map(|r| r * r).sum();
        assert!((f.se_s1 - (ssr / 2.0 / sxx).sqrt()).abs() < 1e-15);
        assert!(f.r_squared < 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_log_scaling(&[(1.0, 0.0), (2.0, 0.1), (3.0, 0.2)]).is_err());
        assert!(fit_log_scaling(&[(1.0, 0.0), (2.0, 0.1), (2.0, 0.2), (3.0, 0.3)]).is_err());
    }

    #[test]
    fn sensitivity_upper_window() {
        let pts: Vec<(f64, f64)> = (3..9)
            .map(|k| {
                let n = 2f64.powi(k);
                (n, 0.6 + 0.14 * n.ln() + 0.3 / n)
            })
            .collect();
        let rep = sensitivity(&pts).unwrap();
        let up = rep.upper.unwrap();
        assert_eq!(up.n_window, (32.0, 256.0));
        // finite-size term bends the small-N end, so the upper fit is closer
        assert!((up.s1 - 0.14).abs() < (rep.full.s1 - 0.14).abs());
    }
}
