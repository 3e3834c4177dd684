//! First and second variation of a lattice eigenpair under a change of the
//! potential at one site, checked against finite differences and direct
//! solves on dense instances.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eigensolve::{dense_eigen, gap_report_values, DenseEigen};
use crate::error::{Error, Result};
use crate::operator::SparseHamiltonian;
use crate::quadrature::trapezoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HadamardCheck {
    pub k: usize,
    pub site: usize,
    pub step: f64,
    /// Central difference `(λ(ξ + hδ) − λ(ξ − hδ)) / 2h`.
    pub fd: f64,
    /// `g(site)^2`.
    pub analytic: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenDiag {
    pub k: usize,
    pub site: usize,
    /// `Σ_{i≠k} g_i(x)^2 / (λ_i − λ_k)` over the full spectrum.
    pub value: f64,
    /// The same quantity from the bordered linear solve.
    pub solve_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondVariationCheck {
    pub k: usize,
    pub site: usize,
    pub xi_from: f64,
    pub xi_to: f64,
    pub n_quad: usize,
    /// `|g(site)|` recomputed with `ξ(site) = xi_to`.
    pub lhs: f64,
    /// `|g(site)|` at `xi_from` times `exp(−∫ G)`.
    pub rhs: f64,
    /// `−∫_{xi_from}^{xi_to} G(site, site; ·)`.
    pub log_multiplier: f64,
    pub rel_err: f64,
}

fn check_index(h: &SparseHamiltonian, k: usize, site: usize) -> Result<()> {
    if k == 0 || k > h.dim() {
        return Err(Error::IndexOutOfRange {
            k,
            available: h.dim(),
        });
    }
    if site >= h.dim() {
        return Err(Error::IndexOutOfRange {
            k: site,
            available: h.dim(),
        });
    }
    Ok(())
}

/// `δ` for index `k` of a full spectrum, and whether it clears the default
/// gap tolerance. The top of the spectrum only has a lower neighbour.
fn gap_of(values: &[f64], k: usize) -> (f64, f64) {
    let tol = crate::eigensolve::default_gap_tol(&values[..(k + 1).min(values.len())]);
    let delta = if k < values.len() {
        gap_report_values(values, k, tol)
            .map(|(d, _)| d)
            .unwrap_or(0.0)
    } else if k >= 2 {
        (values[k - 1] - values[k - 2]) / 3.0
    } else {
        f64::INFINITY
    };
    (delta, tol)
}

fn simple_spectrum(h: &SparseHamiltonian, k: usize) -> Result<(DenseEigen, f64)> {
    let eig = dense_eigen(h)?;
    let (delta, tol) = gap_of(&eig.eigenvalues, k);
    if !(delta > tol) {
        return Err(Error::DegenerateEigenvalue { k, delta });
    }
    Ok((eig, delta))
}

/// Compares the finite-difference derivative of `λ_k` in `ξ(site)` with
/// `g_k(site)^2` (`k` is 1-based).
///
/// The two perturbed eigenvalues are Rayleigh quotients evaluated in
/// double-double arithmetic, so the difference quotient is not swamped by
/// rounding even when `g(site)^2` is small.
pub fn hadamard_derivative_check(
    h: &SparseHamiltonian,
    k: usize,
    site: usize,
    step: f64,
) -> Result<HadamardCheck> {
    check_index(h, k, site)?;
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step {step} must be positive"
        )));
    }
    let (eig, delta) = simple_spectrum(h, k)?;
    if step >= delta {
        return Err(Error::InvalidParameter(format!(
            "step {step} is not small against the gap {delta}"
        )));
    }
    let xi = h.potential()[site];
    let (up, down) = (xi + step, xi - step);
    // the matrix sees kinetic + potential rounded once, so the effective
    // step is the difference of the stored diagonal entries
    let lambda_at = |value: f64| -> Result<(Dd, f64)> {
        let hp = h.with_potential_at(site, value);
        let e = dense_eigen(&hp)?;
        Ok((
            rayleigh_dd(&hp, &e.eigenvectors[k - 1]),
            hp.diagonal()[site],
        ))
    };
    let (hi, diag_hi) = lambda_at(up)?;
    let (lo, diag_lo) = lambda_at(down)?;
    let fd = hi.sub(lo).to_f64() / (diag_hi - diag_lo);
    let g = eig.eigenvectors[k - 1][site];
    let analytic = g * g;
    Ok(HadamardCheck {
        k,
        site,
        step,
        fd,
        analytic,
        rel_err: (fd - analytic).abs() / analytic.abs().max(1e-14),
    })
}

fn green_from_spectrum(eig: &DenseEigen, k: usize, site: usize) -> f64 {
    let lambda = eig.eigenvalues[k - 1];
    eig.eigenvalues
        .iter()
        .zip(&eig.eigenvectors)
        .enumerate()
        .filter(|(i, _)| *i != k - 1)
        .map(|(_, (l, g))| g[site] * g[site] / (l - lambda))
        .sum()
}

/// Solves `[[H − λ, g], [gᵀ, 0]] [w; μ] = [(1 − P)δ_x; 0]` and returns `w(x)`.
fn green_by_solve(h: &SparseHamiltonian, lambda: f64, g: &[f64], site: usize) -> Result<f64> {
    let n = h.dim();
    let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
    for i in 0..n {
        for (j, v) in h.row(i) {
            m[(i, j)] = v;
        }
        m[(i, i)] -= lambda;
        m[(i, n)] = g[i];
        m[(n, i)] = g[i];
    }
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for i in 0..n {
        rhs[i] = -g[site] * g[i];
    }
    rhs[site] += 1.0;
    let w = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Degenerate("bordered Green system is singular".into()))?;
    Ok(w[site])
}

/// `G_k(x, x; ξ)` from the complete dense spectrum, cross-checked by a
/// bordered linear solve.
pub fn spectral_green_diag(h: &SparseHamiltonian, k: usize, site: usize) -> Result<GreenDiag> {
    check_index(h, k, site)?;
    let (eig, _) = simple_spectrum(h, k)?;
    let value = green_from_spectrum(&eig, k, site);
    let solve_value = if h.dim() == 1 {
        0.0
    } else {
        green_by_solve(h, eig.eigenvalues[k - 1], &eig.eigenvectors[k - 1], site)?
    };
    Ok(GreenDiag {
        k,
        site,
        value,
        solve_value,
    })
}

/// Moves `ξ(site)` from `xi_from` to `xi_to` and compares `|g_k(site)|` at the
/// end with the exponential of the integrated Green kernel.
///
/// The kernel enters with a minus sign: raising the potential at a site
/// pushes the `k`-th eigenvector away from it, since `G_1(x,x) > 0`.
pub fn second_variation_check(
    h: &SparseHamiltonian,
    k: usize,
    site: usize,
    xi_from: f64,
    xi_to: f64,
    n_quad: usize,
) -> Result<SecondVariationCheck> {
    check_index(h, k, site)?;
    if n_quad < 2 {
        return Err(Error::InvalidParameter(format!(
            "n_quad = {n_quad} must be at least 2"
        )));
    }
    let mut kernel = Vec::with_capacity(n_quad);
    let mut start = None;
    for i in 0..n_quad {
        let t = xi_from + (xi_to - xi_from) * i as f64 / (n_quad - 1) as f64;
        let eig = dense_eigen(&h.with_potential_at(site, t))?;
        let (delta, tol) = gap_of(&eig.eigenvalues, k);
        if !(delta > tol) {
            return Err(Error::DegeneracyOnPath { k, at: t });
        }
        kernel.push(green_from_spectrum(&eig, k, site));
        if i == 0 {
            start = Some(eig.eigenvectors[k - 1][site].abs());
        }
    }
    let integral = trapezoid(&kernel, (xi_to - xi_from) / (n_quad - 1) as f64);
    let log_multiplier = -integral;
    let rhs = start.expect("n_quad >= 2") * log_multiplier.exp();
    let end = dense_eigen(&h.with_potential_at(site, xi_to))?;
    let lhs = end.eigenvectors[k - 1][site].abs();
    Ok(SecondVariationCheck {
        k,
        site,
        xi_from,
        xi_to,
        n_quad,
        lhs,
        rhs,
        log_multiplier,
        rel_err: (lhs - rhs).abs() / lhs.max(1e-300),
    })
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd {
        hi: s,
        lo: b - (s - a),
    }
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn product(a: f64, b: f64) -> Dd {
        let p = a * b;
        Dd {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let (t, f) = two_sum(self.lo, other.lo);
        let r = quick_two_sum(s, e + t);
        quick_two_sum(r.hi, r.lo + f)
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn sub(self, other: Dd) -> Dd {
        self.add(other.neg())
    }

    fn mul_f64(self, b: f64) -> Dd {
        let p = Dd::product(self.hi, b);
        quick_two_sum(p.hi, p.lo + self.lo * b)
    }

    fn div(self, other: Dd) -> Dd {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.mul_f64(q1));
        let q2 = r.hi / other.hi;
        let r = r.sub(other.mul_f64(q2));
        let q3 = r.hi / other.hi;
        let q = quick_two_sum(q1, q2);
        q.add(Dd { hi: q3, lo: 0.0 })
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// `<v, Hv> / <v, v>` in double-double arithmetic.
fn rayleigh_dd(h: &SparseHamiltonian, v: &[f64]) -> Dd {
    let mut num = Dd::ZERO;
    let mut den = Dd::ZERO;
    for (i, &vi) in v.iter().enumerate() {
        let mut row = Dd::ZERO;
        for (j, a) in h.row(i) {
            row = row.add(Dd::product(a, v[j]));
        }
        num = num.add(row.mul_f64(vi));
        den = den.add(Dd::product(vi, vi));
    }
    num.div(den)
}
