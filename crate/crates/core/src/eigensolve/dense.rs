use nalgebra::DMatrix;

use super::fix_sign;
use crate::error::Result;
use crate::operator::{dense_oracle, SparseHamiltonian};

/// Full spectrum of a (small) Hamiltonian, ascending, sign-fixed.
#[derive(Debug, Clone)]
pub struct DenseEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
}

pub fn dense_eigen(h: &SparseHamiltonian) -> Result<DenseEigen> {
    Ok(symmetric_eigen(dense_oracle(h)?))
}

pub(crate) fn symmetric_eigen(m: DMatrix<f64>) -> DenseEigen {
    let n = m.nrows();
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = order
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            fix_sign(&mut v);
            v
        })
        .collect();
    DenseEigen {
        eigenvalues,
        eigenvectors,
    }
}
