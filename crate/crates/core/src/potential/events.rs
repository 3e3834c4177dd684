//! Good-event diagnostics for a potential sample.
//!
//! `in_e` holds when the centered potential projects weakly onto every squared
//! continuum eigenfunction and its scaled `r`-norm is moderate; `in_f` holds
//! when the block-averaged centered potential is small in the scaled
//! `r`-norm.

use serde::{Deserialize, Serialize};

use super::{rho_window, PotentialModel, PotentialSample};
use crate::error::{Error, Result};
use crate::lattice::{block_average, scaled_norm, LatticeDomain};

/// A continuum eigenfunction evaluated at points of the domain.
pub type Eigenfunction<'a> = &'a dyn Fn(&[f64]) -> f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventParams {
    pub gamma: f64,
    pub kappa: f64,
    pub r: f64,
    pub rho: f64,
    /// Multiplier in front of `|D| max_x E|xi(x)|^r`; 4 by default.
    pub moment_factor: f64,
}

impl EventParams {
    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {} must be positive",
                self.gamma
            )));
        }
        if !(self.r >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "r = {} must be >= 1",
                self.r
            )));
        }
        if !(self.moment_factor > 0.0) {
            return Err(Error::InvalidParameter(
                "moment factor must be positive".into(),
            ));
        }
        rho_window(d, self.kappa, self.r)?.check(self.rho)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    /// `max_j |<xi − U(eps·), phi_j(eps·)^2>_{eps,2}|`
    pub projection_stats: f64,
    /// `||xi||_{eps,r}`
    pub xi_r_norm: f64,
    /// `||(U(eps·) − xi)_L||_{eps,r}`
    pub blocked_norm: f64,
    pub block_len: usize,
    pub moment_bound: f64,
    pub in_e: bool,
    pub in_f: bool,
}

/// Everything about the events that does not depend on the sample.
#[derive(Debug, Clone)]
pub struct EventContext {
    weights: Vec<Vec<f64>>,
    mean: Vec<f64>,
    moment_bound: f64,
    block_len: usize,
    params: EventParams,
}

impl EventContext {
    pub fn new(
        lattice: &LatticeDomain,
        model: &PotentialModel,
        eigenfunctions: &[Eigenfunction<'_>],
        params: EventParams,
    ) -> Result<Self> {
        params.validate(lattice.dim())?;
        let points: Vec<Vec<f64>> = (0..lattice.len()).map(|i| lattice.point(i)).collect();
        let weights = eigenfunctions
            .iter()
            .map(|phi| points.iter().map(|y| phi(y).powi(2)).collect())
            .collect();
        let mean = points
            .iter()
            .map(|y| model.mean_at(y).unwrap_or(0.0))
            .collect();
        let mut max_moment = 0.0f64;
        for y in &points {
            max_moment = max_moment.max(model.abs_moment_at(y, params.r)?);
        }
        let moment_bound = params.moment_factor * lattice.domain().volume() * max_moment;
        let block_len = (lattice.eps().powf(-params.rho).round() as usize).max(1);
        Ok(EventContext {
            weights,
            mean,
            moment_bound,
            block_len,
            params,
        })
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn evaluate(&self, lattice: &LatticeDomain, xi: &[f64]) -> Result<EventReport> {
        if xi.len() != self.mean.len() {
            return Err(Error::LatticeMismatch {
                expected: self.mean.len(),
                found: xi.len(),
            });
        }
        let (eps, d) = (lattice.eps(), lattice.dim());
        let cell = lattice.cell_volume();
        let projection_stats = self
            .weights
            .iter()
            .map(|w| {
                let s: f64 = xi
                    .iter()
                    .zip(&self.mean)
                    .zip(w)
                    .map(|((x, u), w)| (x - u) * w)
                    .sum();
                (cell * s).abs()
            })
            .fold(0.0, f64::max);
        let xi_r_norm = scaled_norm(xi, eps, d, self.params.r)?;
        let centered: Vec<f64> = self.mean.iter().zip(xi).map(|(u, x)| u - x).collect();
        let blocked = block_average(&lattice.site_function(&centered)?, self.block_len)?;
        let blocked_norm = blocked.scaled_norm(eps, self.params.r)?;
        Ok(EventReport {
            projection_stats,
            xi_r_norm,
            blocked_norm,
            block_len: self.block_len,
            moment_bound: self.moment_bound,
            in_e: projection_stats < self.params.gamma && xi_r_norm < self.moment_bound,
            in_f: blocked_norm < self.params.gamma,
        })
    }
}

/// One-shot diagnostics; build an [`EventContext`] instead when evaluating many
/// samples on the same lattice.
pub fn event_diagnostics(
    sample: &PotentialSample,
    lattice: &LatticeDomain,
    eigenfunctions: &[Eigenfunction<'_>],
    model: &PotentialModel,
    params: EventParams,
) -> Result<EventReport> {
    EventContext::new(lattice, model, eigenfunctions, params)?.evaluate(lattice, &sample.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{discretize, sample_profile, ContinuumDomain, Profile};
    use crate::potential::{choose_kappa, choose_r, choose_rho, Family, KappaMode, Sampler};

    fn sine(n: f64) -> impl Fn(&[f64]) -> f64 {
        move |y: &[f64]| 2f64.sqrt() * (n * std::f64::consts::PI * y[0]).sin()
    }

    fn params(d: usize, k: f64, gamma: f64) -> EventParams {
        let kappa = choose_kappa(k, d, KappaMode::Homogenization).unwrap();
        let r = choose_r(d, kappa).unwrap();
        EventParams {
            gamma,
            kappa,
            r,
            rho: choose_rho(d, kappa, r).unwrap(),
            moment_factor: 4.0,
        }
    }

    #[test]
    fn zero_potential_is_in_both_events() {
        let lat = discretize(&ContinuumDomain::unit_box(1).unwrap(), 1.0 / 64.0).unwrap();
        let model = PotentialModel::new(
            Family::Uniform { half_width: 1.0 },
            Some(Profile::Constant(0.0)),
            None,
        )
        .unwrap();
        let (p1, p2) = (sine(1.0), sine(2.0));
        let fns: [Eigenfunction; 2] = [&p1, &p2];
        for gamma in [1e-6, 0.5, 10.0] {
            let zero = PotentialSample::deterministic(vec![0.0; lat.len()], lat.eps());
            let report =
                event_diagnostics(&zero, &lat, &fns, &model, params(1, f64::INFINITY, gamma))
                    .unwrap();
            assert_eq!(report.projection_stats, 0.0);
            assert_eq!(report.xi_r_norm, 0.0);
            assert_eq!(report.blocked_norm, 0.0);
            assert!(report.in_e && report.in_f);
        }
    }

    #[test]
    fn potential_equal_to_mean_has_zero_statistics() {
        let lat = discretize(&ContinuumDomain::unit_box(1).unwrap(), 1.0 / 64.0).unwrap();
        let u = Profile::Affine {
            offset: 1.0,
            gradient: vec![-0.5],
        };
        let model = PotentialModel::new(Family::Gaussian, Some(u.clone()), None).unwrap();
        let xi = PotentialSample::deterministic(sample_profile(|y| u.eval(y), &lat), lat.eps());
        let p1 = sine(1.0);
        let fns: [Eigenfunction; 1] = [&p1];
        let report =
            event_diagnostics(&xi, &lat, &fns, &model, params(1, f64::INFINITY, 0.1)).unwrap();
        assert_eq!(report.projection_stats, 0.0);
        assert_eq!(report.blocked_norm, 0.0);
        assert!(report.xi_r_norm > 0.0);
    }

    #[test]
    fn block_length_follows_rho() {
        let lat = discretize(&ContinuumDomain::unit_box(1).unwrap(), 1.0 / 128.0).unwrap();
        let model = PotentialModel::raw(Family::Uniform { half_width: 1.0 }).unwrap();
        let p = params(1, f64::INFINITY, 0.5);
        assert_eq!(p.kappa, 0.5);
        assert_eq!(p.r, 1.5);
        assert_eq!(p.rho, 0.125);
        let ctx = EventContext::new(&lat, &model, &[], p).unwrap();
        assert_eq!(ctx.block_len(), 2); // round(128^0.125) = round(1.834)
    }

    #[test]
    fn invalid_rho_rejected() {
        let lat = discretize(&ContinuumDomain::unit_box(1).unwrap(), 1.0 / 16.0).unwrap();
        let model = PotentialModel::raw(Family::Gaussian).unwrap();
        let mut p = params(1, f64::INFINITY, 0.5);
        p.rho = 0.3;
        assert!(matches!(
            EventContext::new(&lat, &model, &[], p),
            Err(Error::OutsideWindow { name: "rho", .. })
        ));
    }

    #[test]
    fn uniform_samples_mostly_in_e() {
        let lat = discretize(&ContinuumDomain::unit_box(1).unwrap(), 1.0 / 128.0).unwrap();
        let model = PotentialModel::new(
            Family::Uniform { half_width: 1.0 },
            Some(Profile::Constant(0.0)),
            Some(Profile::Constant(1.0 / 3.0)),
        )
        .unwrap();
        let (p1, p2) = (sine(1.0), sine(2.0));
        let fns: [Eigenfunction; 2] = [&p1, &p2];
        let ctx = EventContext::new(&lat, &model, &fns, params(1, f64::INFINITY, 0.5)).unwrap();
        let sampler = Sampler::new(&model, &lat).unwrap();
        let hits = (0..200)
            .filter(|&s| ctx.evaluate(&lat, &sampler.sample(s).values).unwrap().in_e)
            .count();
        assert!(hits as f64 / 200.0 >= 0.95, "in_E frequency {hits}/200");
    }
}
