//! Gaussian fluctuations about the mean-field state in the thermodynamic limit.
//!
//! Shifting the photon by its mean-field value and keeping the leading order
//! in `1/N` gives the quadratic Hamiltonian
//!
//! ```text
//! H_eff = w b^dag b + sum_i [ w_i b_i^dag b_i + (g/2)|D_1i| (b + b^dag)(b_i + b_i^dag) ]
//! ```
//!
//! with `D = d + 2 kappa phi` and `w_i` the mean-field excitation energies.
//! In oscillator coordinates it is `(P^2 + X Omega^2 X)/2` with
//! `Omega^2_kk = w_k^2` and `Omega^2_1k = g |D_1k| sqrt(w w_k)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{determinant, symmetric_eigen};
use crate::meanfield::{mean_field_eigen, order_parameter};
use crate::model::{AtomModel, ModelParams};

/// Stationarity tolerance on `D_11` at the expansion point.
pub const D11_TOL: f64 = 1e-8;
/// Relative spacing below which excitation energies are merged.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// Negative `lambda^2` beyond this (relative) marks an unstable expansion point.
pub const NEGATIVE_MODE_TOL: f64 = 1e-12;
/// Below this `gamma` the entropy uses `S = 1 - ln gamma`.
pub const SMALL_GAMMA: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationInput {
    pub phi_star: f64,
    /// `<1|D|1>`; vanishes at a stationary point.
    pub d11: f64,
    /// `|D_1k|` of the bright modes after dark-state reduction.
    pub couplings: Vec<f64>,
    /// Excitation energies `w_k` of the bright modes, strictly increasing.
    pub excitations: Vec<f64>,
    /// Excitation energies of the discarded dark modes.
    pub dark_modes: Vec<f64>,
    /// `|D_1k|` and `w_k` for `k = 2..=l` before the reduction.
    pub raw_couplings: Vec<f64>,
    pub raw_excitations: Vec<f64>,
}

/// Solves the mean-field problem and expands around its minimum.
pub fn build_fluctuation_input(model: &AtomModel, params: &ModelParams) -> Result<FluctuationInput> {
    let sol = order_parameter(model, params.kappa())?;
    build_fluctuation_input_at(model, params.kappa(), sol.phi_star)
}

/// Expansion around a given stationary `phi` (e.g. the normal branch `phi = 0`).
pub fn build_fluctuation_input_at(model: &AtomModel, kappa: f64, phi: f64) -> Result<FluctuationInput> {
    let (vals, vecs) = mean_field_eigen(model, kappa, phi)?;
    let l = vals.len();
    let d = model.d_matrix();
    let v1 = vecs.column(0);
    let dv1 = d * v1;
    let d11 = v1.dotc(&dv1).re + 2.0 * kappa * phi;
    if d11.abs() > D11_TOL {
        return Err(Error::NotStationary { d11 });
    }
    let raw_excitations: Vec<f64> = vals[1..].iter().map(|e| e - vals[0]).collect();
    let raw_couplings: Vec<f64> = (1..l).map(|k| vecs.column(k).dotc(&dv1).norm()).collect();
    let wmax = raw_excitations.iter().fold(0.0f64, |a, &w| a.max(w));
    if raw_excitations[0] <= DEGENERACY_TOL * wmax.max(1.0) {
        return Err(Error::DegenerateGroundState {
            gap: raw_excitations[0],
        });
    }
    let (couplings, excitations, dark_modes) = reduce_dark_states(&raw_couplings, &raw_excitations);
    Ok(FluctuationInput {
        phi_star: phi,
        d11,
        couplings,
        excitations,
        dark_modes,
        raw_couplings,
        raw_excitations,
    })
}

/// Collapses each block of degenerate excitation energies onto its single
/// bright combination (`|D_eff|^2 = sum |D_1k|^2`); the orthogonal
/// combinations, and any mode with no coupling at all, are dark.
fn reduce_dark_states(couplings: &[f64], excitations: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let wmax = excitations.iter().fold(0.0f64, |a, &w| a.max(w));
    let cmax = couplings.iter().fold(0.0f64, |a, &c| a.max(c));
    let mut bright_c = Vec::new();
    let mut bright_w = Vec::new();
    let mut dark = Vec::new();
    let mut k = 0;
    while k < excitations.len() {
        let mut end = k + 1;
        while end < excitations.len()
            && (excitations[end] - excitations[end - 1]).abs() < DEGENERACY_TOL * wmax
        {
            end += 1;
        }
        let block_w = excitations[k..end].iter().sum::<f64>() / (end - k) as f64;
        let c2: f64 = couplings[k..end].iter().map(|c| c * c).sum();
        let c = c2.sqrt();
        if c > 1e-14 * (1.0 + cmax) {
            bright_c.push(c);
            bright_w.push(block_w);
            dark.extend(std::iter::repeat_n(block_w, end - k - 1));
        } else {
            dark.extend(std::iter::repeat_n(block_w, end - k));
        }
        k = end;
    }
    (bright_c, bright_w, dark)
}

/// The `(1 + n) x (1 + n)` matrix `Omega^2`, photon first.
pub fn build_omega_sq(input: &FluctuationInput, omega: f64, g: f64) -> DMatrix<f64> {
    let n = input.excitations.len();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m[(0, 0)] = omega * omega;
    for (k, (&w, &c)) in input.excitations.iter().zip(&input.couplings).enumerate() {
        m[(k + 1, k + 1)] = w * w;
        let off = g * c * (omega * w).sqrt();
        m[(0, k + 1)] = off;
        m[(k + 1, 0)] = off;
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecularRoots {
    /// Squared normal-mode frequencies, ascending.
    pub lambda_sq: Vec<f64>,
    /// False when `lambda_1^2 < 0`: the expansion point is unstable.
    pub expansion_valid: bool,
}

/// `q(x) = w^2 - x + g^2 w sum_k |D_1k|^2 w_k / (x - w_k^2)`.
pub fn secular_function(input: &FluctuationInput, omega: f64, g: f64, x: f64) -> f64 {
    let mut q = omega * omega - x;
    for (&w, &c) in input.excitations.iter().zip(&input.couplings) {
        q += g * g * omega * c * c * w / (x - w * w);
    }
    q
}

/// Roots of `q(lambda^2) = 0`, one per interval between consecutive poles
/// `w_k^2`, found by bisection; `q` is strictly decreasing on each interval.
pub fn secular_roots(input: &FluctuationInput, omega: f64, g: f64) -> SecularRoots {
    let mut roots = Vec::new();
    let mut poles = Vec::new();
    let mut weights = Vec::new();
    for (&w, &c) in input.excitations.iter().zip(&input.couplings) {
        let wt = g * g * omega * c * c * w;
        if wt == 0.0 {
            roots.push(w * w);
        } else {
            poles.push(w * w);
            weights.push(wt);
        }
    }
    let q = |x: f64| -> f64 {
        let mut s = omega * omega - x;
        for (p, wt) in poles.iter().zip(&weights) {
            s += wt / (x - p);
        }
        s
    };
    if poles.is_empty() {
        roots.push(omega * omega);
    } else {
        let scale = 1.0 + omega * omega + poles[poles.len() - 1];
        // lowest root: extend the lower end until q > 0
        let hi = poles[0];
        let mut lo = hi.min(omega * omega) - scale;
        let mut step = scale;
        while q(lo) <= 0.0 {
            step *= 2.0;
            lo -= step;
        }
        roots.push(bisect(&q, lo, hi));
        for w in poles.windows(2) {
            roots.push(bisect(&q, w[0], w[1]));
        }
        let lo = poles[poles.len() - 1];
        let mut hi = lo + scale;
        let mut step = scale;
        while q(hi) >= 0.0 {
            step *= 2.0;
            hi += step;
        }
        roots.push(bisect(&q, lo, hi));
    }
    roots.sort_by(f64::total_cmp);
    let expansion_valid = roots[0] > 0.0;
    SecularRoots {
        lambda_sq: roots,
        expansion_valid,
    }
}

/// Root of a decreasing function on the open interval `(lo, hi)`.
fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..4000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v > 0.0 {
            lo = mid;
        } else if v < 0.0 {
            hi = mid;
        } else {
            return mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSpectrum {
    pub omega: f64,
    pub g: f64,
    pub omega_sq_matrix: DMatrix<f64>,
    /// Principal square root `Omega` of `Omega^2` (only when stable).
    pub omega_matrix: Option<DMatrix<f64>>,
    /// Eigenvalues of `Omega^2`, ascending (may start negative).
    pub lambda_sq: Vec<f64>,
    /// Normal-mode frequencies (empty when the expansion is unstable).
    pub lambdas: Vec<f64>,
    pub valid: bool,
    pub det_omega: Option<f64>,
    pub minor11: Option<f64>,
    pub gamma: Option<f64>,
    /// `+inf` at a critical point.
    pub entropy: Option<f64>,
    /// `lambda_1`; zero at criticality.
    pub gap: Option<f64>,
    pub photon_fluct: Option<f64>,
    pub depletion: Option<f64>,
}

/// Normal modes and derived observables of an expansion point.
pub fn spectrum(input: &FluctuationInput, omega: f64, g: f64) -> Result<FluctuationSpectrum> {
    let omega_sq = build_omega_sq(input, omega, g);
    let (vals, vecs) = symmetric_eigen(omega_sq.clone());
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut spec = FluctuationSpectrum {
        omega,
        g,
        omega_sq_matrix: omega_sq,
        omega_matrix: None,
        lambda_sq: vals.clone(),
        lambdas: Vec::new(),
        valid: false,
        det_omega: None,
        minor11: None,
        gamma: None,
        entropy: None,
        gap: None,
        photon_fluct: None,
        depletion: None,
    };
    if vals[0] < -NEGATIVE_MODE_TOL * scale {
        return Ok(spec);
    }
    let lambdas: Vec<f64> = vals.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let n = lambdas.len();
    let diag = DMatrix::from_fn(n, n, |i, j| if i == j { lambdas[i] } else { 0.0 });
    let om = &vecs * diag * vecs.transpose();
    let det: f64 = lambdas.iter().product();
    let minor = determinant(&om.view((1, 1), (n - 1, n - 1)).into_owned());
    spec.valid = true;
    spec.gap = Some(lambdas[0]);
    spec.lambdas = lambdas;
    spec.det_omega = Some(det);
    spec.minor11 = Some(minor);
    spec.omega_matrix = Some(om);
    let (gamma, s) = entanglement_entropy(&spec)?;
    spec.gamma = Some(gamma);
    spec.entropy = Some(s);
    spec.photon_fluct = Some(photon_fluctuation(&spec));
    spec.depletion = Some(depletion(&spec, input));
    Ok(spec)
}

/// `S(gamma) = gamma/(e^gamma - 1) - ln(1 - e^-gamma)`.
pub fn entropy_from_gamma(gamma: f64) -> f64 {
    if gamma.is_infinite() {
        0.0
    } else if gamma <= 0.0 {
        f64::INFINITY
    } else if gamma < SMALL_GAMMA {
        1.0 - gamma.ln()
    } else {
        gamma / gamma.exp_m1() - (-(-gamma).exp_m1()).ln()
    }
}

/// `gamma = acosh((Omega_11 M_11 + det Omega) / (Omega_11 M_11 - det Omega))`
/// and the atom-photon entanglement entropy `S(gamma)`.
pub fn entanglement_entropy(spec: &FluctuationSpectrum) -> Result<(f64, f64)> {
    let (Some(om), Some(det), Some(minor)) = (&spec.omega_matrix, spec.det_omega, spec.minor11) else {
        return Err(Error::InvalidArgument(
            "entropy needs a stable expansion point (lambda_1^2 >= 0)".into(),
        ));
    };
    let a = om[(0, 0)] * minor;
    let denom = a - det;
    if denom < -1e-10 * a.abs() {
        return Err(Error::Inconsistent(format!(
            "Fischer inequality violated: Omega_11 M_11 = {a:e} < det Omega = {det:e}"
        )));
    }
    if denom <= 1e-15 * a.abs() {
        return Ok((f64::INFINITY, 0.0));
    }
    if det == 0.0 {
        return Ok((0.0, f64::INFINITY));
    }
    // acosh(1 + x) without cancellation
    let x = 2.0 * det / denom;
    let gamma = (x + (x * (x + 2.0)).sqrt()).ln_1p();
    Ok((gamma, entropy_from_gamma(gamma)))
}

/// `<(b^dag + b)^2> = w M_11 / det Omega`.
pub fn photon_fluctuation(spec: &FluctuationSpectrum) -> f64 {
    match (spec.det_omega, spec.minor11) {
        (Some(det), Some(minor)) if det > 0.0 => spec.omega * minor / det,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => f64::NAN,
    }
}

/// `sum_{i>=2} <b_i^dag b_i>` from the Gaussian ground-state covariances
/// `<X X> = Omega^-1 / 2`, `<P P> = Omega / 2`.
pub fn depletion(spec: &FluctuationSpectrum, input: &FluctuationInput) -> f64 {
    let Some(om) = &spec.omega_matrix else {
        return f64::NAN;
    };
    if spec.lambdas.first().is_some_and(|&l| l == 0.0) {
        return f64::INFINITY;
    }
    let (vals, vecs) = symmetric_eigen(om.clone());
    let n = vals.len();
    let inv = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / vals[i] } else { 0.0 });
    let om_inv = &vecs * inv * vecs.transpose();
    input
        .excitations
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let i = k + 1;
            let x2 = 0.5 * om_inv[(i, i)];
            let p2 = 0.5 * om[(i, i)];
            0.5 * (w * x2 + p2 / w - 1.0)
        })
        .sum()
}

/// True when the excited-mode occupation is no longer small against `N`.
pub fn depletion_warning(spec: &FluctuationSpectrum, atoms: f64) -> bool {
    spec.depletion.is_none_or(|d| !(d < 0.1 * atoms))
}

/// Mean-field solve, expansion and normal-mode analysis in one call.
pub fn analyze(model: &AtomModel, params: &ModelParams) -> Result<(FluctuationInput, FluctuationSpectrum)> {
    let input = build_fluctuation_input(model, params)?;
    let spec = spectrum(&input, params.omega(), params.g())?;
    Ok((input, spec))
}
