//! Deterministic limit spectra of `−Δ + U` on the continuum domain.

use std::f64::consts::PI;

use super::{lowest_k, SolverOptions};
use crate::error::{Error, Result};
use crate::lattice::{discretize, sample_profile, ContinuumDomain, LatticeDomain, Profile};
use crate::operator::assemble;
use crate::potential::PotentialSample;

/// An `L²(D)`-normalised continuum eigenfunction.
#[derive(Debug, Clone)]
pub enum Eigenfunction {
    /// `Π_i sqrt(2/L_i) sin(n_i π (y_i − a_i)/L_i)` on a box.
    Sine {
        intervals: Vec<(f64, f64)>,
        modes: Vec<u32>,
    },
    /// Lattice eigenvector `g / eps^{d/2}`, multilinearly interpolated and zero
    /// off the lattice.
    Grid {
        lattice: LatticeDomain,
        values: Vec<f64>,
    },
}

impl Eigenfunction {
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            Eigenfunction::Sine { intervals, modes } => intervals
                .iter()
                .zip(modes)
                .zip(y)
                .map(|((&(a, b), &n), &t)| {
                    if t <= a || t >= b {
                        0.0
                    } else {
                        let len = b - a;
                        (2.0 / len).sqrt() * (n as f64 * PI * (t - a) / len).sin()
                    }
                })
                .product(),
            Eigenfunction::Grid { lattice, values } => {
                let eps = lattice.eps();
                let d = lattice.dim();
                let base: Vec<i64> = y.iter().map(|t| (t / eps).floor() as i64).collect();
                let frac: Vec<f64> = y
                    .iter()
                    .zip(&base)
                    .map(|(t, b)| t / eps - *b as f64)
                    .collect();
                let mut total = 0.0;
                let mut corner = vec![0i64; d];
                for mask in 0..(1usize << d) {
                    let mut weight = 1.0;
                    for i in 0..d {
                        let up = (mask >> i) & 1 == 1;
                        corner[i] = base[i] + up as i64;
                        weight *= if up { frac[i] } else { 1.0 - frac[i] };
                    }
                    if weight != 0.0 {
                        if let Some(idx) = lattice.index_of(&corner) {
                            total += weight * values[idx];
                        }
                    }
                }
                total
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuumReference {
    pub domain: ContinuumDomain,
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Eigenfunction>,
    pub fine_eps: f64,
    /// `|λ(fine_eps) − λ(fine_eps/2)|`; zero for closed-form spectra.
    pub error_estimate: Vec<f64>,
    pub analytic: bool,
}

impl ContinuumReference {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// The quadrature grid `D_{fine_eps}`.
    pub fn fine_lattice(&self) -> Result<LatticeDomain> {
        discretize(&self.domain, self.fine_eps)
    }

    /// `φ^{(k)}` (1-based) at every node of `lattice`.
    pub fn node_values(&self, k: usize, lattice: &LatticeDomain) -> Result<Vec<f64>> {
        let f = self.eigenfunction(k)?;
        Ok(sample_profile(|y| f.eval(y), lattice))
    }

    pub fn eigenfunction(&self, k: usize) -> Result<&Eigenfunction> {
        if k == 0 || k > self.len() {
            return Err(Error::IndexOutOfRange {
                k,
                available: self.len(),
            });
        }
        Ok(&self.eigenfunctions[k - 1])
    }
}

fn box_modes(intervals: &[(f64, f64)], k: usize) -> Vec<(f64, Vec<u32>)> {
    let d = intervals.len();
    let top = k as u32;
    let mut modes = Vec::new();
    let mut current = vec![1u32; d];
    loop {
        let value: f64 = current
            .iter()
            .zip(intervals)
            .map(|(&n, (a, b))| (n as f64 * PI / (b - a)).powi(2))
            .sum();
        modes.push((value, current.clone()));
        let mut axis = 0;
        loop {
            if axis == d {
                modes.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
                modes.truncate(k);
                return modes;
            }
            if current[axis] < top {
                current[axis] += 1;
                break;
            }
            current[axis] = 1;
            axis += 1;
        }
    }
}

fn grid_solve(
    domain: &ContinuumDomain,
    u: &Profile,
    k: usize,
    eps: f64,
) -> Result<(LatticeDomain, Vec<f64>, Vec<Vec<f64>>)> {
    let lattice = discretize(domain, eps)?;
    let values = sample_profile(|y| u.eval(y), &lattice);
    let h = assemble(&lattice, &PotentialSample::deterministic(values, eps))?;
    let spectrum = lowest_k(&h, k, SolverOptions::default().tol)?;
    Ok((lattice, spectrum.eigenvalues, spectrum.eigenvectors))
}

/// The `k` lowest eigenpairs of `−Δ + U` with Dirichlet conditions on `D`.
///
/// Boxes with constant `U` use the closed-form sine basis; anything else is
/// approximated by the lattice problem with `xi = U(fine_eps·)`, and the
/// difference to the problem at `fine_eps/2` is reported as an error estimate.
pub fn continuum_reference(
    domain: &ContinuumDomain,
    u: &Profile,
    k: usize,
    fine_eps: f64,
) -> Result<ContinuumReference> {
    domain.validate()?;
    if k == 0 {
        return Err(Error::IndexOutOfRange { k, available: 0 });
    }
    if !(fine_eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fine_eps = {fine_eps} must be positive"
        )));
    }
    if let (ContinuumDomain::Box { intervals }, Some(c)) = (domain, u.as_constant()) {
        let modes = box_modes(intervals, k);
        return Ok(ContinuumReference {
            domain: domain.clone(),
            eigenvalues: modes.iter().map(|(v, _)| v + c).collect(),
            eigenfunctions: modes
                .into_iter()
                .map(|(_, modes)| Eigenfunction::Sine {
                    intervals: intervals.clone(),
                    modes,
                })
                .collect(),
            fine_eps,
            error_estimate: vec![0.0; k],
            analytic: true,
        });
    }
    let (lattice, values, vectors) = grid_solve(domain, u, k, fine_eps)?;
    let (_, finer, _) = grid_solve(domain, u, k, fine_eps / 2.0)?;
    let scale = fine_eps.powf(-(lattice.dim() as f64) / 2.0);
    Ok(ContinuumReference {
        domain: domain.clone(),
        error_estimate: values
            .iter()
            .zip(&finer)
            .map(|(a, b)| (a - b).abs())
            .collect(),
        eigenvalues: values,
        eigenfunctions: vectors
            .into_iter()
            .map(|g| Eigenfunction::Grid {
                lattice: lattice.clone(),
                values: g.iter().map(|v| v * scale).collect(),
            })
            .collect(),
        fine_eps,
        analytic: false,
    })
}
