//! Thick-restart Lanczos for the lowest eigenpairs of a real symmetric
//! sparse matrix, with full (two-pass classical Gram-Schmidt)
//! reorthogonalization.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ed::hamiltonian::SparseHamiltonian;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

const CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanczosOptions {
    /// Converged when `||H v - theta v|| < tol * ||H||` (Gershgorin bound).
    pub tol: f64,
    /// Krylov basis size before a restart.
    pub basis_size: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: 1e-10,
            basis_size: 48,
            max_restarts: 400,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors, one per value.
    pub vectors: Vec<Vec<f64>>,
    /// True residual norms `||H v - theta v||`.
    pub residuals: Vec<f64>,
    pub matvecs: usize,
    pub norm_bound: f64,
}

/// Deterministic dot product: fixed chunks summed in a fixed order.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .for_each(|(ys, xs)| {
            for (yi, xi) in ys.iter_mut().zip(xs) {
                *yi += alpha * xi;
            }
        });
}

fn scale(alpha: f64, x: &mut [f64]) {
    x.par_chunks_mut(CHUNK).for_each(|c| c.iter_mut().for_each(|v| *v *= alpha));
}

/// Removes the components of `w` along `basis` (two passes), returning the
/// accumulated coefficients.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut coeff = vec![0.0; basis.len()];
    for _ in 0..2 {
        let c: Vec<f64> = basis.iter().map(|v| dot(v, w)).collect();
        for (v, ci) in basis.iter().zip(&c) {
            axpy(-ci, v, w);
        }
        for (a, ci) in coeff.iter_mut().zip(c) {
            *a += ci;
        }
    }
    coeff
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..4 {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        orthogonalize(basis, &mut v);
        let n = dot(&v, &v).sqrt();
        if n > 1e-8 {
            scale(1.0 / n, &mut v);
            return Some(v);
        }
    }
    None
}

/// Lowest `k` eigenpairs of `h`.
pub fn lowest_eigenpairs(h: &SparseHamiltonian, k: usize, opts: &LanczosOptions) -> Result<Eigenpairs> {
    let dim = h.dim();
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of a {dim}-dimensional matrix"
        )));
    }
    let norm = h.norm_bound().max(f64::MIN_POSITIVE);
    let threshold = opts.tol * norm;
    let m = opts.basis_size.max(k + 8).min(dim);
    let keep = (m / 2).max(k + 1).min(m - 1).max(k);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut matvecs = 0;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    basis.push(random_unit(dim, &mut rng, &[]).expect("nonzero start vector"));
    let mut t = DMatrix::<f64>::zeros(m, m);
    let mut hv = vec![0.0; dim];
    let mut last_residual = f64::INFINITY;

    for restart in 0..=opts.max_restarts {
        // expand the basis to m vectors
        let mut beta;
        let mut residual_vec: Option<Vec<f64>> = None;
        let mut j = basis.len() - 1;
        loop {
            h.matvec(&basis[j], &mut hv);
            matvecs += 1;
            let mut w = hv.clone();
            let coeff = orthogonalize(&basis, &mut w);
            for (i, c) in coeff.iter().enumerate() {
                t[(i, j)] = *c;
                t[(j, i)] = *c;
            }
            beta = dot(&w, &w).sqrt();
            if j + 1 == m {
                residual_vec = Some(w);
                break;
            }
            if beta > 1e-13 * norm {
                scale(1.0 / beta, &mut w);
                basis.push(w);
            } else {
                // invariant subspace: continue with a fresh direction
                match random_unit(dim, &mut rng, &basis) {
                    Some(v) => basis.push(v),
                    None => {
                        beta = 0.0;
                        break;
                    }
                }
            }
            j += 1;
            for i in 0..j {
                t[(j, i)] = 0.0;
                t[(i, j)] = 0.0;
            }
        }
        let size = basis.len();
        let (theta, y) = symmetric_eigen(t.view((0, 0), (size, size)).into_owned());
        let estimates: Vec<f64> = (0..k.min(size)).map(|i| (beta * y[(size - 1, i)]).abs()).collect();
        let ready = size >= k && estimates.iter().all(|&r| r < threshold);
        let final_attempt = size < m || restart == opts.max_restarts;

        if ready || final_attempt {
            let count = k.min(size);
            let mut values = Vec::with_capacity(count);
            let mut vectors = Vec::with_capacity(count);
            let mut residuals = Vec::with_capacity(count);
            for i in 0..count {
                let mut u = vec![0.0; dim];
                for (b, coef) in basis.iter().zip(y.column(i).iter()) {
                    axpy(*coef, b, &mut u);
                }
                let nu = dot(&u, &u).sqrt();
                scale(1.0 / nu, &mut u);
                h.matvec(&u, &mut hv);
                matvecs += 1;
                let rq = dot(&u, &hv);
                axpy(-rq, &u, &mut hv);
                residuals.push(dot(&hv, &hv).sqrt());
                values.push(rq);
                vectors.push(u);
            }
            let worst = residuals.iter().cloned().fold(0.0, f64::max);
            if count == k && worst < threshold {
                return Ok(Eigenpairs {
                    values,
                    vectors,
                    residuals,
                    matvecs,
                    norm_bound: norm,
                });
            }
            last_residual = worst;
            if final_attempt {
                break;
            }
        }

        // thick restart: keep the lowest Ritz vectors plus the residual direction
        let mut new_basis = Vec::with_capacity(m + 1);
        for i in 0..keep {
            let mut u = vec![0.0; dim];
            for (b, coef) in basis.iter().zip(y.column(i).iter()) {
                axpy(*coef, b, &mut u);
            }
            new_basis.push(u);
        }
        // re-normalize to absorb rounding in the combination
        for i in 0..keep {
            let (head, tail) = new_basis.split_at_mut(i);
            orthogonalize(head, &mut tail[0]);
            let n = dot(&tail[0], &tail[0]).sqrt();
            scale(1.0 / n, &mut tail[0]);
        }
        t.fill(0.0);
        for i in 0..keep {
            t[(i, i)] = theta[i];
        }
        let mut r = residual_vec.expect("full basis has a residual");
        orthogonalize(&new_basis, &mut r);
        let rn = dot(&r, &r).sqrt();
        if rn > 1e-13 * norm {
            scale(1.0 / rn, &mut r);
            new_basis.push(r);
        } else {
            match random_unit(dim, &mut rng, &new_basis) {
                Some(v) => new_basis.push(v),
                None => unreachable!("basis smaller than dimension"),
            }
        }
        basis = new_basis;
    }
    Err(Error::NoConvergence {
        iterations: matvecs,
        residual: last_residual,
    })
}

/// Dense reference solver.
pub fn dense_lowest(h: &SparseHamiltonian, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (vals, vecs) = symmetric_eigen(h.to_dense());
    let k = k.min(vals.len());
    let vectors = (0..k).map(|i| vecs.column(i).iter().copied().collect()).collect();
    (vals[..k].to_vec(), vectors)
}
