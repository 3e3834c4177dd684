//! Block Krylov–Schur style solver: the basis and its image are stored
//! explicitly, every new direction is fully reorthogonalised, and the basis is
//! compressed to the best Ritz vectors when it reaches its maximum size.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::symmetric_eigen;
use super::SolverOptions;
use crate::error::{Error, Result};
use crate::operator::SparseHamiltonian;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

struct Krylov<'a> {
    h: &'a SparseHamiltonian,
    basis: Vec<Vec<f64>>,
    images: Vec<Vec<f64>>,
    /// Projected matrix `VᵀHV`, row-major with stride `cap`.
    proj: Vec<f64>,
    cap: usize,
    matvecs: usize,
}

impl<'a> Krylov<'a> {
    fn new(h: &'a SparseHamiltonian, cap: usize) -> Self {
        Krylov {
            h,
            basis: Vec::new(),
            images: Vec::new(),
            proj: vec![0.0; cap * cap],
            cap,
            matvecs: 0,
        }
    }

    fn len(&self) -> usize {
        self.basis.len()
    }

    /// Orthogonalises `v` against the basis (twice) and appends it unless it
    /// is numerically dependent.
    fn push(&mut self, mut v: Vec<f64>) -> bool {
        let before = dot(&v, &v).sqrt();
        if before == 0.0 || self.len() >= self.cap {
            return false;
        }
        for _ in 0..2 {
            for u in &self.basis {
                let c = dot(u, &v);
                axpy(-c, u, &mut v);
            }
        }
        let after = dot(&v, &v).sqrt();
        if after <= 1e-10 * before {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= after);
        let mut hv = vec![0.0; v.len()];
        self.h.matvec_into(&v, &mut hv);
        self.matvecs += 1;
        let m = self.len();
        for (i, u) in self.basis.iter().enumerate() {
            let c = dot(u, &hv);
            self.proj[i * self.cap + m] = c;
            self.proj[m * self.cap + i] = c;
        }
        self.proj[m * self.cap + m] = dot(&v, &hv);
        self.basis.push(v);
        self.images.push(hv);
        true
    }

    fn projected(&self) -> DMatrix<f64> {
        let m = self.len();
        DMatrix::from_fn(m, m, |i, j| {
            0.5 * (self.proj[i * self.cap + j] + self.proj[j * self.cap + i])
        })
    }

    fn combine(vectors: &[Vec<f64>], coeffs: impl Iterator<Item = f64>) -> Vec<f64> {
        let mut out = vec![0.0; vectors[0].len()];
        for (c, v) in coeffs.zip(vectors) {
            if c != 0.0 {
                axpy(c, v, &mut out);
            }
        }
        out
    }
}

struct Ritz {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    images: Vec<Vec<f64>>,
    residuals: Vec<f64>,
}

fn ritz(k: &Krylov, count: usize) -> Ritz {
    let eig = symmetric_eigen(k.projected());
    let count = count.min(k.len());
    let mut out = Ritz {
        values: Vec::new(),
        vectors: Vec::new(),
        images: Vec::new(),
        residuals: Vec::new(),
    };
    for i in 0..count {
        let s = &eig.eigenvectors[i];
        let y = Krylov::combine(&k.basis, s.iter().copied());
        let ay = Krylov::combine(&k.images, s.iter().copied());
        let theta = eig.eigenvalues[i];
        let res = ay
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - theta * b).powi(2))
            .sum::<f64>()
            .sqrt();
        out.values.push(theta);
        out.vectors.push(y);
        out.images.push(ay);
        out.residuals.push(res);
    }
    out
}

pub(crate) fn lowest_k(
    h: &SparseHamiltonian,
    k: usize,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = h.dim();
    let block = k.clamp(1, 4);
    let cap = opts.krylov_dim.max(3 * k + 2 * block + 10).min(n);
    let keep = (k + k.max(8))
        .min(cap.saturating_sub(block + 1))
        .max(k.min(cap));
    let check_every = 12usize.max(2 * block);
    let scale = h.row_norm_estimate();
    let target = |theta: f64| opts.tol * 0.5 * (theta.abs() + scale);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_vec = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    };

    let mut kr = Krylov::new(h, cap);
    let mut frontier = VecDeque::new();
    while frontier.len() < block && kr.len() < n {
        if kr.push(random_vec(&mut rng)) {
            frontier.push_back(kr.len() - 1);
        }
    }
    loop {
        let mut added = 0;
        while kr.len() < cap && added < check_every {
            let next = match frontier.pop_front() {
                Some(j) => kr.images[j].clone(),
                None => random_vec(&mut rng),
            };
            if kr.push(next) {
                frontier.push_back(kr.len() - 1);
                added += 1;
            } else if kr.len() == n {
                break;
            }
        }
        let full = kr.len() == n;
        let r = ritz(&kr, if kr.len() >= cap { keep } else { k });
        let converged =
            r.values.len() >= k && (0..k).all(|i| r.residuals[i] <= target(r.values[i]));
        if converged || full {
            return Ok((r.values[..k].to_vec(), r.vectors[..k].to_vec()));
        }
        if kr.matvecs >= opts.max_matvecs {
            let residuals = r.residuals[..k.min(r.residuals.len())].to_vec();
            return Err(Error::NoConvergence {
                iterations: kr.matvecs,
                residuals,
            });
        }
        if kr.len() >= cap {
            // restart from the kept Ritz vectors; expand the lowest unconverged
            let mut fresh = Krylov::new(h, cap);
            fresh.matvecs = kr.matvecs;
            let m = r.values.len();
            for i in 0..m {
                for j in 0..m {
                    let c = if i == j {
                        r.values[i]
                    } else {
                        dot(&r.vectors[i], &r.images[j])
                    };
                    fresh.proj[i * cap + j] = c;
                }
            }
            fresh.basis = r.vectors;
            fresh.images = r.images;
            frontier = (0..m)
                .filter(|&i| r.residuals[i] > target(r.values[i]))
                .take(block)
                .collect();
            kr = fresh;
        }
    }
}
