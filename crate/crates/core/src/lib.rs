//! Numerical laboratory for lattice Anderson Hamiltonians
//! `H = -eps^{-2} Δ + xi` with unbounded i.i.d. random potentials on lattice
//! approximations of convex Euclidean domains.
//!
//! The crate assembles the sparse Dirichlet operator, computes its low-lying
//! eigenpairs, and runs the Monte Carlo experiments that compare random
//! spectra with their deterministic continuum limits and Gaussian
//! fluctuation predictions.
//!
//! ```
//! use anderson_core::prelude::*;
//!
//! let domain = ContinuumDomain::unit_box(1)?;
//! let lattice = discretize(&domain, 1.0 / 64.0)?;
//! let model = PotentialModel::raw(Family::Uniform { half_width: 1.0 })?;
//! let xi = sample_potential(&model, &lattice, 7)?;
//! let h = assemble(&lattice, &xi)?;
//! let spectrum = lowest_k(&h, 2, 1e-10)?;
//! assert!((spectrum.eigenvalues[0] - std::f64::consts::PI.powi(2)).abs() < 1.5);
//! # Ok::<(), anderson_core::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod eigensolve;
pub mod error;
pub mod fluctuations;
pub mod io;
pub mod lattice;
pub mod operator;
pub mod perturbation;
pub mod potential;
pub mod quadrature;
pub mod report;
pub mod run;
pub mod seed;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::eigensolve::{
        continuum_reference, gap_report, kyfan_sum, lowest_k, lowest_k_with, rayleigh_sum,
        ContinuumReference, SolverOptions, SolverPath, SpectrumResult,
    };
    pub use crate::error::{Error, Result};
    pub use crate::fluctuations::{
        clt_report, convergence_experiment, empirical_covariance, heavy_tail_divergence,
        normality_tests, predicted_covariance, rescaled_fluctuations, run_ensemble,
        truncation_mean_gap, EnsembleConfig, EnsembleResult,
    };
    pub use crate::lattice::{
        block_average, discretize, sample_profile, scaled_inner, scaled_norm, ContinuumDomain,
        LatticeDomain, Profile, SiteFunction,
    };
    pub use crate::operator::{assemble, dense_oracle, laplacian_apply, SparseHamiltonian};
    pub use crate::perturbation::{
        hadamard_derivative_check, second_variation_check, spectral_green_diag,
    };
    pub use crate::potential::{
        choose_kappa, choose_r, event_diagnostics, sample_potential, Family, KappaMode,
        PotentialModel, PotentialSample, TailTilt,
    };
}
