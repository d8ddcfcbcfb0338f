use crate::error::{Error, Result};

/// Symmetric atomic Fock states `|chi>` (occupation vectors summing to `N`)
/// in ascending lexicographic order, tensored with photon states `0..=n_max`.
///
/// The product index is photon-major: `n * dim_atoms + a`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricBasis {
    atoms: usize,
    levels: usize,
    n_max: usize,
    occupations: Vec<Vec<u32>>,
    /// `binom[m][k] = C(m, k)` for `m <= atoms + levels`.
    binom: Vec<Vec<u64>>,
}

/// Number of symmetric states, `C(N + l - 1, l - 1)`, or `None` on overflow.
pub fn symmetric_dimension(atoms: usize, levels: usize) -> Option<u64> {
    let k = levels.checked_sub(1)? as u64;
    let n = atoms as u64 + k;
    let mut c: u64 = 1;
    for i in 0..k {
        c = c.checked_mul(n - i)? / (i + 1);
    }
    Some(c)
}

impl SymmetricBasis {
    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn occupations(&self) -> &[Vec<u32>] {
        &self.occupations
    }

    pub fn dim_atoms(&self) -> usize {
        self.occupations.len()
    }

    pub fn dim_total(&self) -> usize {
        self.dim_atoms() * (self.n_max + 1)
    }

    /// `n * dim_atoms + a`.
    pub fn index(&self, photons: usize, atom_state: usize) -> usize {
        photons * self.dim_atoms() + atom_state
    }

    /// Inverse of [`SymmetricBasis::index`].
    pub fn split(&self, index: usize) -> (usize, usize) {
        (index / self.dim_atoms(), index % self.dim_atoms())
    }

    /// Rank of an occupation vector in the lexicographic enumeration.
    pub fn index_of(&self, chi: &[u32]) -> Option<usize> {
        if chi.len() != self.levels || chi.iter().map(|&c| c as usize).sum::<usize>() != self.atoms {
            return None;
        }
        let mut rank: u64 = 0;
        let mut remaining = self.atoms;
        for (i, &c) in chi[..self.levels - 1].iter().enumerate() {
            let parts = self.levels - i - 1;
            for v in 0..c as usize {
                rank += self.compositions(remaining - v, parts);
            }
            remaining -= c as usize;
        }
        Some(rank as usize)
    }

    /// Ways of distributing `m` atoms over `parts` levels.
    fn compositions(&self, m: usize, parts: usize) -> u64 {
        self.binom[m + parts - 1][parts - 1]
    }
}

pub fn build_basis(atoms: usize, levels: usize, n_max: usize) -> Result<SymmetricBasis> {
    if atoms < 1 || levels < 2 {
        return Err(Error::InvalidArgument(format!(
            "basis needs N >= 1 and l >= 2 (got N = {atoms}, l = {levels})"
        )));
    }
    let dim = symmetric_dimension(atoms, levels)
        .filter(|&d| d <= u32::MAX as u64)
        .ok_or_else(|| Error::InvalidArgument("symmetric subspace too large".into()))?;
    let top = atoms + levels;
    let mut binom = vec![vec![0u64; levels + 1]; top + 1];
    for m in 0..=top {
        binom[m][0] = 1;
        for k in 1..=levels.min(m) {
            binom[m][k] = binom[m - 1][k - 1] + if k <= m - 1 { binom[m - 1][k] } else { 0 };
        }
    }
    let mut occupations = Vec::with_capacity(dim as usize);
    let mut chi = vec![0u32; levels];
    enumerate(&mut chi, 0, atoms as u32, &mut occupations);
    Ok(SymmetricBasis {
        atoms,
        levels,
        n_max,
        occupations,
        binom,
    })
}

fn enumerate(chi: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
    if pos == chi.len() - 1 {
        chi[pos] = remaining;
        out.push(chi.to_vec());
        return;
    }
    for v in 0..=remaining {
        chi[pos] = v;
        enumerate(chi, pos + 1, remaining - v, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        let b = build_basis(2, 2, 3).unwrap();
        assert_eq!(b.dim_atoms(), 3);
        assert_eq!(b.dim_total(), 12);
        assert_eq!(build_basis(10, 5, 20).unwrap().dim_atoms(), 1001);
        assert_eq!(build_basis(1, 3, 0).unwrap().dim_total(), 3);
        assert_eq!(symmetric_dimension(16, 5), Some(4845));
    }

    #[test]
    fn lexicographic_and_ranked() {
        let b = build_basis(5, 4, 1).unwrap();
        for w in b.occupations().windows(2) {
            assert!(w[0] < w[1]);
        }
        for (k, chi) in b.occupations().iter().enumerate() {
            assert_eq!(b.index_of(chi), Some(k));
            assert_eq!(chi.iter().sum::<u32>(), 5);
        }
        assert_eq!(b.occupations()[0], vec![0, 0, 0, 5]);
        assert_eq!(b.index_of(&[1, 1, 1, 1]), None);
        assert_eq!(b.index_of(&[1, 1, 1]), None);
    }

    #[test]
    fn product_index_round_trip() {
        let b = build_basis(3, 3, 4).unwrap();
        for i in 0..b.dim_total() {
            let (n, a) = b.split(i);
            assert!(n <= 4);
            assert_eq!(b.index(n, a), i);
        }
    }

    #[test]
    fn rejects_degenerate_sizes() {
        assert!(build_basis(0, 2, 3).is_err());
        assert!(build_basis(3, 1, 3).is_err());
    }
}
