use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::ed::basis::SymmetricBasis;
use crate::error::{Error, Result};
use crate::model::{AtomModel, ModelParams, Parity};

/// Real symmetric matrix in compressed-row form. Both triangles are stored
/// so that rows can be multiplied independently.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHamiltonian {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseHamiltonian {
    /// Rows given as `(column, value)` lists sorted by column.
    pub fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in rows {
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseHamiltonian {
            dim,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .zip(&self.values[r])
            .map(|(&c, &v)| (c as usize, v))
    }

    /// Nonzero `(row, col, value)` with `col <= row`.
    pub fn lower_triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).filter(move |&(j, _)| j <= i).map(move |(j, v)| (i, j, v)))
    }

    /// `y = H x`, parallel over rows.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_chunks_mut(1024).enumerate().for_each(|(chunk, ys)| {
            let base = chunk * 1024;
            for (k, yi) in ys.iter_mut().enumerate() {
                let i = base + k;
                let mut s = 0.0;
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    s += self.values[p] * x[self.col_idx[p] as usize];
                }
                *yi = s;
            }
        });
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest `|H_ij - H_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                let vt = self.row(j).find(|&(c, _)| c == i).map_or(0.0, |(_, w)| w);
                worst = worst.max((v - vt).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Approximate storage in megabytes.
    pub fn memory_mb(&self) -> f64 {
        (self.values.len() * 12 + self.row_ptr.len() * 8) as f64 / 1048576.0
    }
}

/// Real dipole matrix of a model, after removing removable phases.
pub fn real_dipole(model: &AtomModel) -> Result<DMatrix<f64>> {
    Ok(model.gauge_real()?.d_real())
}

/// Global parity `(-1)^n prod_i p_i^{chi_i}` of a product basis state.
pub fn state_parity(basis: &SymmetricBasis, parity: &[Parity], index: usize) -> Parity {
    let (n, a) = basis.split(index);
    let mut odd = n % 2 == 1;
    for (c, p) in basis.occupations()[a].iter().zip(parity) {
        if *p == Parity::Odd && c % 2 == 1 {
            odd = !odd;
        }
    }
    if odd {
        Parity::Odd
    } else {
        Parity::Even
    }
}

/// Nonzero elements of the collective operator `sum_k d^(k)` on the atomic
/// states: `<chi^{i,j}| sum_k d^(k) |chi> = sqrt(chi_j (chi_i + 1)) d_ij`.
fn collective_dipole(basis: &SymmetricBasis, d: &DMatrix<f64>) -> Vec<Vec<(u32, f64)>> {
    let l = basis.levels();
    basis
        .occupations()
        .par_iter()
        .map(|chi| {
            let mut out = Vec::new();
            let mut target = chi.clone();
            for i in 0..l {
                for j in 0..l {
                    if i == j || d[(i, j)] == 0.0 || chi[j] == 0 {
                        continue;
                    }
                    target[j] -= 1;
                    target[i] += 1;
                    let b = basis.index_of(&target).expect("target state in basis");
                    let amp = (chi[j] as f64 * (chi[i] as f64 + 1.0)).sqrt() * d[(i, j)];
                    out.push((b as u32, amp));
                    target[j] += 1;
                    target[i] -= 1;
                }
            }
            out
        })
        .collect()
}

/// `H = w a^dag a + (g (a + a^dag) / 2 sqrt N) sum_k d^(k) + sum_k h^(k)`
/// on the whole product basis.
pub fn assemble_hamiltonian(
    model: &AtomModel,
    params: &ModelParams,
    basis: &SymmetricBasis,
) -> Result<SparseHamiltonian> {
    let states: Vec<usize> = (0..basis.dim_total()).collect();
    assemble_on(model, params, basis, &states)
}

/// The block of `H` acting on one global-parity sector, together with the
/// product-basis index of every sector state.
pub fn assemble_sector(
    model: &AtomModel,
    params: &ModelParams,
    basis: &SymmetricBasis,
    sector: Parity,
) -> Result<(SparseHamiltonian, Vec<usize>)> {
    let states: Vec<usize> = (0..basis.dim_total())
        .filter(|&i| state_parity(basis, model.parity(), i) == sector)
        .collect();
    let h = assemble_on(model, params, basis, &states)?;
    Ok((h, states))
}

fn assemble_on(
    model: &AtomModel,
    params: &ModelParams,
    basis: &SymmetricBasis,
    states: &[usize],
) -> Result<SparseHamiltonian> {
    if model.levels() != basis.levels() {
        return Err(Error::InvalidArgument(format!(
            "model has {} levels, basis {}",
            model.levels(),
            basis.levels()
        )));
    }
    let d = real_dipole(model)?;
    let moves = collective_dipole(basis, &d);
    let mut local = vec![u32::MAX; basis.dim_total()];
    for (k, &s) in states.iter().enumerate() {
        local[s] = k as u32;
    }
    let omega = params.omega();
    let coupling = params.g() / (2.0 * (basis.atoms() as f64).sqrt());
    let h = model.h_diag();
    let n_max = basis.n_max();
    let rows: Vec<Vec<(u32, f64)>> = states
        .par_iter()
        .map(|&s| {
            let (n, a) = basis.split(s);
            let chi = &basis.occupations()[a];
            let diag = omega * n as f64
                + chi.iter().zip(h).map(|(&c, &hi)| c as f64 * hi).sum::<f64>();
            let mut row = vec![(local[s], diag)];
            for &(b, amp) in &moves[a] {
                if n < n_max {
                    let t = local[basis.index(n + 1, b as usize)];
                    debug_assert!(t != u32::MAX, "coupling leaves the parity sector");
                    row.push((t, coupling * ((n + 1) as f64).sqrt() * amp));
                }
                if n > 0 {
                    let t = local[basis.index(n - 1, b as usize)];
                    debug_assert!(t != u32::MAX, "coupling leaves the parity sector");
                    row.push((t, coupling * (n as f64).sqrt() * amp));
                }
            }
            row.sort_by_key(|e| e.0);
            row
        })
        .collect();
    Ok(SparseHamiltonian::from_rows(rows))
}
