//! Sparse Dirichlet Hamiltonian `-eps^{-2} Δ + xi` on a lattice domain.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::LatticeDomain;
use crate::potential::PotentialSample;

/// Largest dimension for which a dense copy may be formed.
pub const DENSE_LIMIT: usize = 4096;

/// Symmetric CSR matrix. Columns within a row are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHamiltonian {
    dim: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    eps: f64,
    kinetic_diagonal: f64,
    potential: Vec<f64>,
    diag_positions: Vec<usize>,
}

/// Row `x`: `2d·eps^{-2} + xi(x)` on the diagonal and `-eps^{-2}` for each
/// lattice neighbour inside the domain. Neighbours outside are dropped, which
/// is the zero extension.
pub fn assemble(lattice: &LatticeDomain, potential: &PotentialSample) -> Result<SparseHamiltonian> {
    if potential.values.len() != lattice.len() {
        return Err(Error::LatticeMismatch {
            expected: lattice.len(),
            found: potential.values.len(),
        });
    }
    let d = lattice.dim();
    let inv_eps2 = lattice.eps().powi(-2);
    let kinetic = 2.0 * d as f64 * inv_eps2;
    let n = lattice.len();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(n * (2 * d + 1));
    let mut values = Vec::with_capacity(n * (2 * d + 1));
    let mut diag_positions = Vec::with_capacity(n);
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * d + 1);
    let mut neighbour = vec![0i64; d];
    row_offsets.push(0);
    for i in 0..n {
        row.clear();
        row.push((i, kinetic + potential.values[i]));
        let x = lattice.site(i);
        for axis in 0..d {
            for step in [-1i64, 1] {
                neighbour.copy_from_slice(x);
                neighbour[axis] += step;
                if let Some(j) = lattice.index_of(&neighbour) {
                    row.push((j, -inv_eps2));
                }
            }
        }
        row.sort_unstable_by_key(|e| e.0);
        for &(j, v) in &row {
            if j == i {
                diag_positions.push(col_indices.len());
            }
            col_indices.push(j);
            values.push(v);
        }
        row_offsets.push(col_indices.len());
    }
    Ok(SparseHamiltonian {
        dim: n,
        row_offsets,
        col_indices,
        values,
        eps: lattice.eps(),
        kinetic_diagonal: kinetic,
        potential: potential.values.clone(),
        diag_positions,
    })
}

impl SparseHamiltonian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// `2d·eps^{-2}`.
    pub fn kinetic_diagonal(&self) -> f64 {
        self.kinetic_diagonal
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.diag_positions
            .iter()
            .map(|&p| self.values[p])
            .collect()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Copy with `xi(site)` replaced by `value`.
    pub fn with_potential_at(&self, site: usize, value: f64) -> SparseHamiltonian {
        let mut h = self.clone();
        h.potential[site] = value;
        h.values[h.diag_positions[site]] = h.kinetic_diagonal + value;
        h
    }

    /// Copy with the whole potential replaced.
    pub fn with_potential(&self, potential: &[f64]) -> Result<SparseHamiltonian> {
        if potential.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: potential.len(),
            });
        }
        let mut h = self.clone();
        for (i, &v) in potential.iter().enumerate() {
            h.values[h.diag_positions[i]] = h.kinetic_diagonal + v;
        }
        h.potential = potential.to_vec();
        Ok(h)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        let mut out = vec![0.0; self.dim];
        self.matvec_into(v, &mut out);
        Ok(out)
    }

    /// `out = H v`. Each row accumulates in column order.
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for (i, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let mut acc = 0.0;
            for p in a..b {
                acc += self.values[p] * v[self.col_indices[p]];
            }
            *o = acc;
        }
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn row_norm_estimate(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Whether every off-diagonal couples consecutive indices only.
    pub fn is_tridiagonal(&self) -> bool {
        (0..self.dim).all(|i| self.row(i).all(|(j, _)| j.abs_diff(i) <= 1))
    }

    /// `(diagonal, off-diagonal)` of a tridiagonal matrix.
    pub fn tridiagonal_parts(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if !self.is_tridiagonal() {
            return None;
        }
        let diag = self.diagonal();
        let off = (0..self.dim.saturating_sub(1))
            .map(|i| {
                self.row(i)
                    .find(|&(j, _)| j == i + 1)
                    .map_or(0.0, |(_, v)| v)
            })
            .collect();
        Some((diag, off))
    }

    /// Plain-text coordinate dump: a `# dim nnz` header, then one
    /// `row col value` line per stored entry (0-based, 17 significant digits).
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {} {}", self.dim, self.nnz())?;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                writeln!(out, "{i} {j} {v:.16e}")?;
            }
        }
        Ok(())
    }
}

/// `(row, col, value)` entry of a coordinate dump.
pub type Triplet = (usize, usize, f64);

/// Parse a coordinate dump back into `(dim, entries)`.
pub fn read_coordinate<R: BufRead>(input: R) -> Result<(usize, Vec<Triplet>)> {
    let mut dim = None;
    let mut entries = Vec::new();
    let bad = |line: &str| Error::InvalidParameter(format!("malformed coordinate line: {line}"));
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let n = header.split_whitespace().next().ok_or_else(|| bad(line))?;
            dim = Some(n.parse().map_err(|_| bad(line))?);
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut next = || parts.next().ok_or_else(|| bad(line));
        let i = next()?.parse().map_err(|_| bad(line))?;
        let j = next()?.parse().map_err(|_| bad(line))?;
        let v = next()?.parse().map_err(|_| bad(line))?;
        entries.push((i, j, v));
    }
    let dim = dim.ok_or_else(|| Error::InvalidParameter("missing coordinate header".into()))?;
    Ok((dim, entries))
}

/// `(Δ f)(x) = Σ_{|x−y|=1} [f(y) − f(x)]` with `f = 0` off the lattice.
pub fn laplacian_apply(lattice: &LatticeDomain, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != lattice.len() {
        return Err(Error::LatticeMismatch {
            expected: lattice.len(),
            found: f.len(),
        });
    }
    let d = lattice.dim();
    let mut neighbour = vec![0i64; d];
    Ok((0..lattice.len())
        .map(|i| {
            let x = lattice.site(i);
            let mut acc = 0.0;
            for axis in 0..d {
                for step in [-1i64, 1] {
                    neighbour.copy_from_slice(x);
                    neighbour[axis] += step;
                    let fy = lattice.index_of(&neighbour).map_or(0.0, |j| f[j]);
                    acc += fy - f[i];
                }
            }
            acc
        })
        .collect())
}

/// `||∇f||_2^2`: squared forward differences over every bond of `Z^d` with
/// at least one endpoint in the lattice.
pub fn gradient_energy(lattice: &LatticeDomain, f: &[f64]) -> Result<f64> {
    if f.len() != lattice.len() {
        return Err(Error::LatticeMismatch {
            expected: lattice.len(),
            found: f.len(),
        });
    }
    let d = lattice.dim();
    let mut y = vec![0i64; d];
    let mut total = 0.0;
    for i in 0..lattice.len() {
        let x = lattice.site(i);
        for axis in 0..d {
            // bond (x, x + e): counted from x
            y.copy_from_slice(x);
            y[axis] += 1;
            let fy = lattice.index_of(&y).map_or(0.0, |j| f[j]);
            total += (fy - f[i]).powi(2);
            // bond (x − e, x) where x − e lies outside: counted here
            y[axis] -= 2;
            if lattice.index_of(&y).is_none() {
                total += f[i] * f[i];
            }
        }
    }
    Ok(total)
}

/// Dense copy of `h`.
pub fn dense_oracle(h: &SparseHamiltonian) -> Result<DMatrix<f64>> {
    if h.dim > DENSE_LIMIT {
        return Err(Error::TooLarge {
            dim: h.dim,
            limit: DENSE_LIMIT,
        });
    }
    let mut m = DMatrix::zeros(h.dim, h.dim);
    for i in 0..h.dim {
        for (j, v) in h.row(i) {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}
