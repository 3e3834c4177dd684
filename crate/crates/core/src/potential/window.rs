//! Admissible parameter windows for truncation and the moment/block scales.
//!
//! Each window is an open interval; the `choose_*` helpers return its
//! midpoint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Open interval `(lo, hi)` of admissible values for a named parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(name: &'static str, lo: f64, hi: f64) -> Result<Self> {
        if lo < hi {
            Ok(Window { name, lo, hi })
        } else {
            Err(Error::EmptyWindow { name, lo, hi })
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lo < value && value < self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `Ok(value)` if inside, otherwise an error naming the legal interval.
    pub fn check(&self, value: f64) -> Result<f64> {
        if self.contains(value) {
            Ok(value)
        } else {
            Err(Error::OutsideWindow {
                name: self.name,
                value,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }
}

/// Which limit theorem the truncation level serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaMode {
    /// `kappa ∈ (d/K, d ∧ 2)`
    Homogenization,
    /// `kappa ∈ (d/K, 2 ∧ d/2)`
    Clt,
}

pub fn kappa_window(k: f64, d: usize, mode: KappaMode) -> Result<Window> {
    let d = d as f64;
    let hi = match mode {
        KappaMode::Homogenization => d.min(2.0),
        KappaMode::Clt => (d / 2.0).min(2.0),
    };
    Window::new("kappa", d / k, hi)
}

pub fn choose_kappa(k: f64, d: usize, mode: KappaMode) -> Result<f64> {
    kappa_window(k, d, mode).map(|w| w.midpoint())
}

/// `r ∈ (1 ∨ d/2, d/kappa)`.
pub fn r_window(d: usize, kappa: f64) -> Result<Window> {
    let d = d as f64;
    Window::new("r", 1f64.max(d / 2.0), d / kappa)
}

pub fn choose_r(d: usize, kappa: f64) -> Result<f64> {
    r_window(d, kappa).map(|w| w.midpoint())
}

/// `rho ∈ (0, 1 − kappa r / d)`; the block side is `L = eps^{-rho}`.
pub fn rho_window(d: usize, kappa: f64, r: f64) -> Result<Window> {
    Window::new("rho", 0.0, 1.0 - kappa * r / d as f64)
}

pub fn choose_rho(d: usize, kappa: f64, r: f64) -> Result<f64> {
    rho_window(d, kappa, r).map(|w| w.midpoint())
}

/// Auxiliary index `K' ∈ (K, d/2)` for the heavy-tail divergence experiment.
pub fn tail_kprime_window(k: f64, d: usize) -> Result<Window> {
    Window::new("k_prime", k, d as f64 / 2.0)
}

/// `kappa ∈ (2, d/K')` for the heavy-tail divergence experiment.
pub fn tail_kappa_window(d: usize, k_prime: f64) -> Result<Window> {
    Window::new("kappa", 2.0, d as f64 / k_prime)
}

/// `K ∈ (1 ∨ d/2, d/2 + 1)`, where truncation shifts the mean eigenvalue.
pub fn truncation_gap_k_window(d: usize) -> Result<Window> {
    let d = d as f64;
    Window::new("K", 1f64.max(d / 2.0), d / 2.0 + 1.0)
}
