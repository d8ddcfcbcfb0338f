//! Exact diagonalization at finite atom number `N` in the permutation-symmetric
//! subspace, with a photon cutoff `n_max`.

mod basis;
mod hamiltonian;
mod lanczos;

pub use basis::{build_basis, symmetric_dimension, SymmetricBasis};
pub use hamiltonian::{assemble_hamiltonian, assemble_sector, real_dipole, state_parity, SparseHamiltonian};
pub use lanczos::{dense_lowest, lowest_eigenpairs, Eigenpairs, LanczosOptions};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{golden_section_min, shannon_entropy, symmetric_eigen};
use crate::meanfield::{order_parameter, HParam};
use crate::model::{AtomModel, ModelParams, Parity};

/// Successive entropies must agree to this for a cutoff to be certified.
pub const ENTROPY_CUTOFF_TOL: f64 = 1e-8;
/// Relative agreement required of successive gaps.
pub const GAP_CUTOFF_TOL: f64 = 1e-10;
pub const MIN_CUTOFF: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdOptions {
    pub lanczos: LanczosOptions,
    /// Also resolve the first excited state.
    pub want_gap: bool,
    /// Diagonalize the two global-parity blocks separately.
    pub parity_sectors: bool,
    pub mem_cap_mb: usize,
    /// Cutoff doublings allowed after the starting value.
    pub max_doublings: usize,
}

impl Default for EdOptions {
    fn default() -> Self {
        EdOptions {
            lanczos: LanczosOptions {
                tol: 1e-12,
                ..LanczosOptions::default()
            },
            want_gap: true,
            parity_sectors: true,
            mem_cap_mb: 4096,
            max_doublings: 5,
        }
    }
}

/// Lowest eigenvalues of a single matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundAndGap {
    pub e0: f64,
    pub e1: Option<f64>,
    pub gap: Option<f64>,
    pub ground: Vec<f64>,
    pub residuals: Vec<f64>,
    pub matvecs: usize,
}

/// Lowest `k` (1 or 2) eigenpairs of `h` by Lanczos.
pub fn ground_and_gap(h: &SparseHamiltonian, k: usize, opts: &LanczosOptions) -> Result<GroundAndGap> {
    let eig = lowest_eigenpairs(h, k, opts)?;
    let e1 = eig.values.get(1).copied();
    Ok(GroundAndGap {
        e0: eig.values[0],
        e1,
        gap: e1.map(|e| e - eig.values[0]),
        ground: eig.vectors.into_iter().next().unwrap(),
        residuals: eig.residuals,
        matvecs: eig.matvecs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdResult {
    pub atoms: usize,
    pub n_max: usize,
    pub e0: f64,
    pub e1: Option<f64>,
    /// `E1 - E0` over both parity sectors.
    pub gap: Option<f64>,
    pub ground_parity: Option<Parity>,
    /// Atom-photon entanglement entropy of the ground state.
    pub entropy: f64,
    /// `<a^dag a>`.
    pub photon_number: f64,
    /// Weight of the ground state on the highest photon number kept.
    pub cutoff_weight: f64,
    pub residuals: Vec<f64>,
    pub matvecs: usize,
    /// Ground state in the photon-major product basis.
    #[serde(skip)]
    pub ground: Vec<f64>,
}

/// Estimated peak memory for one solve, in MB.
pub fn estimate_memory_mb(model: &AtomModel, atoms: usize, n_max: usize, opts: &EdOptions) -> f64 {
    let dim_atoms = symmetric_dimension(atoms, model.levels()).unwrap_or(u64::MAX) as f64;
    let dim = dim_atoms * (n_max + 1) as f64;
    let l = model.levels();
    let couplings = (0..l)
        .flat_map(|i| (0..l).map(move |j| (i, j)))
        .filter(|&(i, j)| model.d(i, j).norm() > 0.0)
        .count() as f64;
    let sector = if opts.parity_sectors { 0.5 } else { 1.0 };
    let vectors = sector * dim * 8.0 * (opts.lanczos.basis_size as f64 + 4.0) + 3.0 * dim * 8.0;
    let matrix = sector * dim * 12.0 * (1.0 + 2.0 * couplings);
    (vectors + matrix) / 1048576.0
}

/// Full ED at one cutoff: ground state, optional gap, entropy and photon number.
pub fn solve(
    model: &AtomModel,
    params: &ModelParams,
    atoms: usize,
    n_max: usize,
    opts: &EdOptions,
) -> Result<EdResult> {
    real_dipole(model)?;
    let mb = estimate_memory_mb(model, atoms, n_max, opts);
    if mb > opts.mem_cap_mb as f64 {
        return Err(Error::MemoryCap {
            requested_mb: mb,
            cap_mb: opts.mem_cap_mb,
        });
    }
    let basis = build_basis(atoms, model.levels(), n_max)?;
    let k = if opts.want_gap { 2 } else { 1 };
    // (energy, parity, vector in product basis)
    let mut states: Vec<(f64, Option<Parity>, Vec<f64>)> = Vec::new();
    let mut residuals = Vec::new();
    let mut matvecs = 0;
    if opts.parity_sectors {
        for (s, sector) in [Parity::Even, Parity::Odd].into_iter().enumerate() {
            let (h, index) = assemble_sector(model, params, &basis, sector)?;
            if index.is_empty() {
                continue;
            }
            let mut lo = opts.lanczos.clone();
            lo.seed = lo.seed.wrapping_add(s as u64);
            let eig = lowest_eigenpairs(&h, k.min(index.len()), &lo)?;
            matvecs += eig.matvecs;
            residuals.extend(&eig.residuals);
            for (e, v) in eig.values.into_iter().zip(eig.vectors) {
                let mut full = vec![0.0; basis.dim_total()];
                for (&i, x) in index.iter().zip(v) {
                    full[i] = x;
                }
                states.push((e, Some(sector), full));
            }
        }
    } else {
        let h = assemble_hamiltonian(model, params, &basis)?;
        let eig = lowest_eigenpairs(&h, k.min(h.dim()), &opts.lanczos)?;
        matvecs += eig.matvecs;
        residuals.extend(&eig.residuals);
        for (e, v) in eig.values.into_iter().zip(eig.vectors) {
            states.push((e, None, v));
        }
    }
    states.sort_by(|a, b| a.0.total_cmp(&b.0));
    let e0 = states[0].0;
    let e1 = if opts.want_gap { states.get(1).map(|s| s.0) } else { None };
    let ground_parity = states[0].1;
    let ground = states.swap_remove(0).2;
    Ok(EdResult {
        atoms,
        n_max,
        e0,
        e1,
        gap: e1.map(|e| e - e0),
        ground_parity,
        entropy: entanglement_entropy_ed(&ground, &basis),
        photon_number: photon_number(&ground, &basis),
        cutoff_weight: cutoff_weight(&ground, &basis),
        residuals,
        matvecs,
        ground,
    })
}

/// Dense-eigensolver counterpart of [`solve`] on the full product basis.
pub fn solve_dense(model: &AtomModel, params: &ModelParams, atoms: usize, n_max: usize) -> Result<EdResult> {
    let basis = build_basis(atoms, model.levels(), n_max)?;
    let h = assemble_hamiltonian(model, params, &basis)?;
    let (vals, vecs) = symmetric_eigen(h.to_dense());
    let ground: Vec<f64> = vecs.column(0).iter().copied().collect();
    let e1 = vals.get(1).copied();
    Ok(EdResult {
        atoms,
        n_max,
        e0: vals[0],
        e1,
        gap: e1.map(|e| e - vals[0]),
        ground_parity: None,
        entropy: entanglement_entropy_ed(&ground, &basis),
        photon_number: photon_number(&ground, &basis),
        cutoff_weight: cutoff_weight(&ground, &basis),
        residuals: vec![],
        matvecs: 0,
        ground,
    })
}

/// Von Neumann entropy of the photon (equivalently atomic) reduced state,
/// from the smaller of the two Gram matrices of the reshaped ground vector.
pub fn entanglement_entropy_ed(ground: &[f64], basis: &SymmetricBasis) -> f64 {
    let psi = DMatrix::from_row_slice(basis.n_max() + 1, basis.dim_atoms(), ground);
    let rho = if psi.nrows() <= psi.ncols() {
        &psi * psi.transpose()
    } else {
        psi.transpose() * &psi
    };
    let (p, _) = symmetric_eigen(rho);
    shannon_entropy(p.into_iter().map(|x| x.max(0.0)))
}

pub fn photon_number(ground: &[f64], basis: &SymmetricBasis) -> f64 {
    ground
        .chunks(basis.dim_atoms())
        .enumerate()
        .map(|(n, c)| n as f64 * c.iter().map(|x| x * x).sum::<f64>())
        .sum()
}

fn cutoff_weight(ground: &[f64], basis: &SymmetricBasis) -> f64 {
    ground[basis.n_max() * basis.dim_atoms()..].iter().map(|x| x * x).sum()
}

/// Starting cutoff `max(16, 4 N (phi*/g)^2)` from the mean-field photon number.
pub fn initial_cutoff(model: &AtomModel, params: &ModelParams, atoms: usize) -> Result<usize> {
    let phi = order_parameter(model, params.kappa())?.phi_star;
    let estimate = (4.0 * atoms as f64 * (phi / params.g()).powi(2)).ceil() as usize;
    Ok(MIN_CUTOFF.max(estimate))
}

/// `start, 2 start, 4 start, ...` with `doublings` doublings.
pub fn doubling_schedule(start: usize, doublings: usize) -> Vec<usize> {
    (0..=doublings).map(|k| start << k).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffStep {
    pub n_max: usize,
    pub e0: f64,
    pub gap: Option<f64>,
    pub entropy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffReport {
    pub steps: Vec<CutoffStep>,
    pub converged: bool,
    /// Result at the last cutoff evaluated.
    pub result: EdResult,
}

fn steps_agree(a: &CutoffStep, b: &CutoffStep) -> bool {
    let s_ok = (a.entropy - b.entropy).abs() < ENTROPY_CUTOFF_TOL;
    let gap_ok = match (a.gap, b.gap) {
        (Some(x), Some(y)) => (x - y).abs() <= GAP_CUTOFF_TOL * y.abs() + 1e-12 * (1.0 + b.e0.abs()),
        _ => true,
    };
    s_ok && gap_ok
}

/// Re-solves along an increasing cutoff schedule until two successive
/// cutoffs agree (`S` to 1e-8, `Delta` to 1e-10 relative).
pub fn cutoff_convergence(
    model: &AtomModel,
    params: &ModelParams,
    atoms: usize,
    schedule: &[usize],
    opts: &EdOptions,
) -> Result<CutoffReport> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "cutoff schedule must be non-empty and strictly increasing".into(),
        ));
    }
    let mut steps: Vec<CutoffStep> = Vec::new();
    let mut last = None;
    for &n_max in schedule {
        let r = solve(model, params, atoms, n_max, opts)?;
        let step = CutoffStep {
            n_max,
            e0: r.e0,
            gap: r.gap,
            entropy: r.entropy,
        };
        let converged = steps.last().is_some_and(|prev| steps_agree(prev, &step));
        steps.push(step);
        last = Some(r);
        if converged {
            return Ok(CutoffReport {
                steps,
                converged: true,
                result: last.unwrap(),
            });
        }
    }
    Ok(CutoffReport {
        steps,
        converged: false,
        result: last.unwrap(),
    })
}

/// How the photon cutoff is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutoffPolicy {
    /// Use this cutoff without certification.
    Fixed(usize),
    /// Start from [`initial_cutoff`] and double until certified.
    Auto,
}

/// One ED point under a cutoff policy.
pub fn solve_with_policy(
    model: &AtomModel,
    params: &ModelParams,
    atoms: usize,
    policy: CutoffPolicy,
    opts: &EdOptions,
) -> Result<CutoffReport> {
    match policy {
        CutoffPolicy::Fixed(n) => {
            let r = solve(model, params, atoms, n, opts)?;
            Ok(CutoffReport {
                steps: vec![CutoffStep {
                    n_max: n,
                    e0: r.e0,
                    gap: r.gap,
                    entropy: r.entropy,
                }],
                converged: false,
                result: r,
            })
        }
        CutoffPolicy::Auto => {
            let start = initial_cutoff(model, params, atoms)?;
            cutoff_convergence(model, params, atoms, &doubling_schedule(start, opts.max_doublings), opts)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CritEntropyOptions {
    pub param: HParam,
    pub prescan_points: usize,
    /// Final bracket width in the tuned parameter.
    pub tol: f64,
    pub policy: CutoffPolicy,
}

impl Default for CritEntropyOptions {
    fn default() -> Self {
        CritEntropyOptions {
            param: HParam::new(1),
            prescan_points: 32,
            tol: 1e-6,
            policy: CutoffPolicy::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalEntropy {
    pub atoms: usize,
    pub h_star: f64,
    pub s_cri: f64,
    pub n_max: usize,
    /// Cutoff certified at both the bracket's low end and `h_star`.
    pub certified: bool,
    /// Pre-scan was unimodal with an interior maximum.
    pub unimodal: bool,
    pub prescan: Vec<(f64, f64)>,
    pub evaluations: usize,
}

/// Maximizes the ground-state entropy over one diagonal parameter.
///
/// The cutoff is certified once at the low end of the bracket (the most
/// superradiant point, which needs the most photons); the search runs at the
/// smaller of the two agreeing cutoffs and the maximizer is certified again.
pub fn locate_critical_entropy(
    model: &AtomModel,
    params: &ModelParams,
    atoms: usize,
    bracket: (f64, f64),
    crit: &CritEntropyOptions,
    opts: &EdOptions,
) -> Result<CriticalEntropy> {
    let (lo, hi) = bracket;
    if !(lo < hi) || crit.prescan_points < 3 {
        return Err(Error::InvalidArgument(format!(
            "entropy search needs lo < hi and >= 3 pre-scan points (got [{lo}, {hi}], {})",
            crit.prescan_points
        )));
    }
    let idx = crit.param.index();
    if idx == 0 || idx >= model.levels() {
        return Err(Error::InvalidArgument(format!(
            "{} is not a tunable level of a {}-level model",
            crit.param,
            model.levels()
        )));
    }
    let s_opts = EdOptions {
        want_gap: false,
        ..opts.clone()
    };
    let at = |x: f64| model.with_h(idx, x);

    let low_report = solve_with_policy(&at(lo), params, atoms, crit.policy, &s_opts)?;
    let mut certified = low_report.converged || matches!(crit.policy, CutoffPolicy::Fixed(_));
    // the smaller of the two agreeing cutoffs is already within tolerance
    let n_max = if low_report.converged {
        low_report.steps[low_report.steps.len() - 2].n_max
    } else {
        low_report.result.n_max
    };
    let mut evaluations = low_report.steps.len();

    let np = crit.prescan_points;
    let xs: Vec<f64> = (0..np).map(|i| lo + (hi - lo) * i as f64 / (np - 1) as f64).collect();
    let mut prescan = Vec::with_capacity(np);
    for &x in &xs {
        let s = solve(&at(x), params, atoms, n_max, &s_opts)?.entropy;
        prescan.push((x, s));
    }
    evaluations += np;
    let imax = (0..np).fold(0, |b, i| if prescan[i].1 > prescan[b].1 { i } else { b });
    let rising = prescan[..=imax].windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12);
    let falling = prescan[imax..].windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    let unimodal = rising && falling && imax > 0 && imax + 1 < np;

    let (h_star, s_search) = if unimodal {
        let mut failure = None;
        let mut count = 0;
        let (x, neg_s) = golden_section_min(
            |x| {
                count += 1;
                match solve(&at(x), params, atoms, n_max, &s_opts) {
                    Ok(r) => -r.entropy,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::INFINITY
                    }
                }
            },
            xs[imax - 1],
            xs[imax + 1],
            crit.tol,
            0.0,
        );
        evaluations += count;
        if let Some(e) = failure {
            return Err(e);
        }
        if -neg_s >= prescan[imax].1 {
            (x, -neg_s)
        } else {
            prescan[imax]
        }
    } else {
        prescan[imax]
    };

    let (s_cri, n_used) = match crit.policy {
        CutoffPolicy::Fixed(_) => (s_search, n_max),
        CutoffPolicy::Auto => {
            let rep = cutoff_convergence(
                &at(h_star),
                params,
                atoms,
                &doubling_schedule(n_max, opts.max_doublings),
                &s_opts,
            )?;
            evaluations += rep.steps.len();
            certified &= rep.converged;
            (rep.result.entropy, rep.result.n_max)
        }
    };
    Ok(CriticalEntropy {
        atoms,
        h_star,
        s_cri,
        n_max: n_used,
        certified,
        unimodal,
        prescan,
        evaluations,
    })
}
