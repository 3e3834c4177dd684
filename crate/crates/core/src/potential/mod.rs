//! Random potentials: families, mean/variance profiles, sampling and
//! truncation.
//!
//! Site `x` of a sample carries
//!
//! ```text
//! xi(x) = shift(x) + scale(x) * (Y - center)
//! ```
//!
//! where `Y` is a draw from the raw family. With a mean profile `U`,
//! `shift = U(eps x)` and `center = E Y`; with a variance profile `V`,
//! `scale = sqrt(V(eps x) / Var Y)`. Without profiles the raw law is used
//! as is, which is how the heavy-tailed experiments reproduce
//! `P(xi <= -r) = r^{-K} ∧ 1` exactly.

mod events;
mod tilt;
mod window;

pub use events::{event_diagnostics, Eigenfunction, EventContext, EventParams, EventReport};
pub use tilt::{TailTilt, TiltedSampler};
pub use window::{
    choose_kappa, choose_r, choose_rho, kappa_window, r_window, rho_window, tail_kappa_window,
    tail_kprime_window, truncation_gap_k_window, KappaMode, Window,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::lattice::{LatticeDomain, Profile};
use crate::quadrature::integrate_unit_interval;
use crate::seed::site_seed;

/// Raw single-site law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// Uniform on `[-a, a]`.
    Uniform { half_width: f64 },
    /// Standard normal.
    Gaussian,
    /// `P(|Y| > r) = r^{-K} ∧ 1`, sign from an independent fair bit.
    SymmetricPareto { index: f64 },
    /// `P(Y <= -r) = r^{-K} ∧ 1`.
    NegativePareto { index: f64 },
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::Uniform { half_width } if !(half_width.is_finite() && half_width > 0.0) => {
                Err(Error::InvalidParameter(format!(
                    "uniform half width {half_width} must be positive"
                )))
            }
            Family::SymmetricPareto { index } | Family::NegativePareto { index }
                if !(index.is_finite() && index > 0.0) =>
            {
                Err(Error::InvalidParameter(format!(
                    "Pareto index {index} must be positive"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Tail index: every absolute moment of order below it is finite.
    pub fn moment_index(&self) -> f64 {
        match *self {
            Family::Uniform { .. } | Family::Gaussian => f64::INFINITY,
            Family::SymmetricPareto { index } | Family::NegativePareto { index } => index,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            Family::Uniform { .. } | Family::Gaussian => Some(0.0),
            Family::SymmetricPareto { index } => (index > 1.0).then_some(0.0),
            Family::NegativePareto { index } => (index > 1.0).then(|| -index / (index - 1.0)),
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match *self {
            Family::Uniform { half_width } => Some(half_width * half_width / 3.0),
            Family::Gaussian => Some(1.0),
            Family::SymmetricPareto { index } => (index > 2.0).then(|| index / (index - 2.0)),
            Family::NegativePareto { index } => (index > 2.0).then(|| {
                let m = index / (index - 1.0);
                index / (index - 2.0) - m * m
            }),
        }
    }

    /// `E|Y|^r` in closed form (`+∞` when the moment diverges).
    pub fn abs_moment(&self, r: f64) -> f64 {
        match *self {
            Family::Uniform { half_width } => half_width.powf(r) / (r + 1.0),
            Family::Gaussian => {
                2f64.powf(r / 2.0) * statrs::function::gamma::gamma((r + 1.0) / 2.0)
                    / std::f64::consts::PI.sqrt()
            }
            Family::SymmetricPareto { index } | Family::NegativePareto { index } => {
                if r < index {
                    index / (index - r)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Inverse CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Family::Uniform { half_width } => half_width * (2.0 * u - 1.0),
            Family::Gaussian => standard_normal().inverse_cdf(u),
            Family::SymmetricPareto { index } => {
                if u < 0.5 {
                    -(2.0 * u).powf(-1.0 / index)
                } else {
                    (2.0 * (1.0 - u)).powf(-1.0 / index)
                }
            }
            Family::NegativePareto { index } => -u.powf(-1.0 / index),
        }
    }

    /// `Q(1 − t)`, evaluated without forming `1 − t`.
    pub fn upper_quantile(&self, t: f64) -> f64 {
        match *self {
            Family::Uniform { half_width } => half_width * (1.0 - 2.0 * t),
            Family::Gaussian => -standard_normal().inverse_cdf(t),
            Family::SymmetricPareto { index } => {
                if t <= 0.5 {
                    (2.0 * t).powf(-1.0 / index)
                } else {
                    -(2.0 * (1.0 - t)).powf(-1.0 / index)
                }
            }
            Family::NegativePareto { index } => -(1.0 - t).powf(-1.0 / index),
        }
    }

    /// `E g(Y)` as a quantile integral.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        integrate_unit_interval(|u| g(self.quantile(u)), |t| g(self.upper_quantile(t)))
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Family::Uniform { half_width } => half_width * (2.0 * rng.random::<f64>() - 1.0),
            Family::Gaussian => rng.sample(StandardNormal),
            Family::SymmetricPareto { index } => {
                let magnitude = unit_open_below(rng).powf(-1.0 / index);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
            Family::NegativePareto { index } => -unit_open_below(rng).powf(-1.0 / index),
        }
    }
}

/// Uniform on `(0, 1]`.
fn unit_open_below<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

pub(crate) fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Per-site affine image of the raw law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteLaw {
    pub shift: f64,
    pub scale: f64,
    pub center: f64,
}

impl SiteLaw {
    fn apply(&self, y: f64) -> f64 {
        self.shift + self.scale * (y - self.center)
    }
}

/// Law of the random field: raw family plus optional mean and variance
/// profiles on the continuum domain.
#[derive(Debug, Clone)]
pub struct PotentialModel {
    family: Family,
    mean: Option<Profile>,
    variance: Option<Profile>,
}

impl PotentialModel {
    pub fn new(family: Family, mean: Option<Profile>, variance: Option<Profile>) -> Result<Self> {
        family.validate()?;
        if mean.is_some() && family.mean().is_none() {
            return Err(Error::InvalidParameter(format!(
                "{family:?} has no mean; a mean profile cannot be imposed"
            )));
        }
        if variance.is_some() && family.variance().is_none() {
            return Err(Error::InvalidParameter(format!(
                "{family:?} has infinite variance; a variance profile cannot be imposed"
            )));
        }
        Ok(PotentialModel {
            family,
            mean,
            variance,
        })
    }

    /// The raw family at every site.
    pub fn raw(family: Family) -> Result<Self> {
        Self::new(family, None, None)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn mean_profile(&self) -> Option<&Profile> {
        self.mean.as_ref()
    }

    pub fn variance_profile(&self) -> Option<&Profile> {
        self.variance.as_ref()
    }

    pub fn moment_index(&self) -> f64 {
        self.family.moment_index()
    }

    pub fn site_law(&self, y: &[f64]) -> Result<SiteLaw> {
        let (shift, center) = match &self.mean {
            Some(u) => (u.eval(y), self.family.mean().unwrap_or(0.0)),
            None => (0.0, 0.0),
        };
        let scale = match (&self.variance, self.family.variance()) {
            (Some(v), Some(raw)) => {
                let target = v.eval(y);
                if !(target >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "variance profile is {target} at {y:?}"
                    )));
                }
                (target / raw).sqrt()
            }
            _ => 1.0,
        };
        Ok(SiteLaw {
            shift,
            scale,
            center,
        })
    }

    /// `E xi` at the physical point `y`, when it exists.
    pub fn mean_at(&self, y: &[f64]) -> Option<f64> {
        let law = self.site_law(y).ok()?;
        self.family.mean().map(|m| law.apply(m))
    }

    pub fn variance_at(&self, y: &[f64]) -> Option<f64> {
        let law = self.site_law(y).ok()?;
        self.family.variance().map(|v| law.scale * law.scale * v)
    }

    /// `E|xi|^r` at `y`. Closed form for the unshifted laws and for the
    /// uniform family; otherwise the quantile integral `∫_0^1 |Q(u)|^r du`.
    pub fn abs_moment_at(&self, y: &[f64], r: f64) -> Result<f64> {
        let law = self.site_law(y)?;
        Ok(self.abs_moment_of(law, r))
    }

    fn abs_moment_of(&self, law: SiteLaw, r: f64) -> f64 {
        if r >= self.family.moment_index() {
            return f64::INFINITY;
        }
        let offset = law.shift - law.scale * law.center;
        if offset == 0.0 {
            return law.scale.powf(r) * self.family.abs_moment(r);
        }
        if let Family::Uniform { half_width } = self.family {
            let b = law.scale * half_width;
            if b == 0.0 {
                return offset.abs().powf(r);
            }
            let antiderivative = |t: f64| t.signum() * t.abs().powf(r + 1.0) / (r + 1.0);
            return (antiderivative(offset + b) - antiderivative(offset - b)) / (2.0 * b);
        }
        let family = self.family;
        family.expect(|y| law.apply(y).abs().powf(r))
    }

    pub fn draw_at<R: Rng + ?Sized>(&self, y: &[f64], rng: &mut R) -> Result<f64> {
        Ok(self.site_law(y)?.apply(self.family.draw(rng)))
    }
}

/// One realization of the field on a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub eps: f64,
    pub truncated: bool,
    pub kappa: Option<f64>,
}

impl PotentialSample {
    /// A fixed, non-random potential.
    pub fn deterministic(values: Vec<f64>, eps: f64) -> Self {
        PotentialSample {
            values,
            seed: 0,
            eps,
            truncated: false,
            kappa: None,
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `xi(x)·1{|xi(x)| <= eps^{-kappa}}`, plus whether any entry changed.
    pub fn truncate(&self, kappa: f64) -> Result<(PotentialSample, bool)> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa = {kappa} must be positive"
            )));
        }
        let threshold = self.eps.powf(-kappa);
        let mut changed = false;
        let values = self
            .values
            .iter()
            .map(|&v| {
                if v.abs() <= threshold {
                    v
                } else {
                    changed = true;
                    0.0
                }
            })
            .collect();
        let kappa = Some(self.kappa.map_or(kappa, |k| k.min(kappa)));
        Ok((
            PotentialSample {
                values,
                seed: self.seed,
                eps: self.eps,
                truncated: true,
                kappa,
            },
            changed,
        ))
    }
}

/// Precomputed per-site laws for repeated sampling on one lattice.
#[derive(Debug, Clone)]
pub struct Sampler {
    family: Family,
    laws: Vec<SiteLaw>,
    eps: f64,
}

impl Sampler {
    pub fn new(model: &PotentialModel, lattice: &LatticeDomain) -> Result<Self> {
        let laws = (0..lattice.len())
            .map(|i| model.site_law(&lattice.point(i)))
            .collect::<Result<_>>()?;
        Ok(Sampler {
            family: model.family,
            laws,
            eps: lattice.eps(),
        })
    }

    pub fn sample(&self, seed: u64) -> PotentialSample {
        let values = self
            .laws
            .iter()
            .enumerate()
            .map(|(i, law)| {
                let mut rng = ChaCha8Rng::seed_from_u64(site_seed(seed, i));
                law.apply(self.family.draw(&mut rng))
            })
            .collect();
        PotentialSample {
            values,
            seed,
            eps: self.eps,
            truncated: false,
            kappa: None,
        }
    }
}

/// Independent draws at every site; entry `i` depends only on
/// `(model, point(i), seed, i)`.
pub fn sample_potential(
    model: &PotentialModel,
    lattice: &LatticeDomain,
    seed: u64,
) -> Result<PotentialSample> {
    Ok(Sampler::new(model, lattice)?.sample(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{discretize, ContinuumDomain};
    use approx::assert_relative_eq;

    fn draws(family: Family, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| family.draw(&mut rng)).collect()
    }

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, var)
    }

    #[test]
    fn same_seed_same_sample() {
        let lat = discretize(&ContinuumDomain::unit_box(2).unwrap(), 0.05).unwrap();
        let model = PotentialModel::raw(Family::Gaussian).unwrap();
        let a = sample_potential(&model, &lat, 99).unwrap();
        let b = sample_potential(&model, &lat, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_potential(&model, &lat, 100).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn site_values_depend_only_on_seed_and_index() {
        let model = PotentialModel::raw(Family::Uniform { half_width: 1.0 }).unwrap();
        let small = discretize(&ContinuumDomain::unit_box(1).unwrap(), 0.1).unwrap();
        let s = sample_potential(&model, &small, 5).unwrap();
        for (i, v) in s.values.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(site_seed(5, i));
            assert_eq!(*v, model.draw_at(&small.point(i), &mut rng).unwrap());
        }
    }

    #[test]
    fn uniform_law_of_large_numbers() {
        let v = draws(Family::Uniform { half_width: 1.0 }, 1_000_000, 1);
        let (m, var) = mean_var(&v);
        assert!(m.abs() <= 4.0 * (1.0 / 3f64.sqrt()) / 1e3, "mean {m}");
        assert!((var - 1.0 / 3.0).abs() <= 0.02 / 3.0, "var {var}");
    }

    #[test]
    fn symmetric_pareto_tail_count() {
        let n = 1_000_000;
        let v = draws(Family::SymmetricPareto { index: 2.0 }, n, 2);
        let p = 1e-2;
        let frac = v.iter().filter(|x| x.abs() > 10.0).count() as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((frac - p).abs() <= 3.0 * se, "fraction {frac}");
        let positive = v.iter().filter(|x| **x > 0.0).count() as f64 / n as f64;
        assert!((positive - 0.5).abs() <= 3.0 * (0.25 / n as f64).sqrt());
        assert!(v.iter().all(|x| x.abs() >= 1.0));
    }

    #[test]
    fn negative_pareto_tail_calibration() {
        let n = 100_000;
        let k = 1.5;
        let v = draws(Family::NegativePareto { index: k }, n, 3);
        for r in [2.0f64, 5.0, 10.0] {
            let p = r.powf(-k);
            let frac = v.iter().filter(|x| **x <= -r).count() as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((frac - p).abs() <= 3.0 * se, "r = {r}: {frac} vs {p}");
        }
        assert!(v.iter().all(|x| *x <= -1.0));
    }

    #[test]
    fn profiles_set_site_mean_and_variance() {
        let lat = discretize(&ContinuumDomain::unit_box(1).unwrap(), 0.2).unwrap();
        assert_eq!(lat.len(), 2);
        let families = [
            Family::Uniform { half_width: 2.0 },
            Family::Gaussian,
            Family::SymmetricPareto { index: 6.0 },
            Family::NegativePareto { index: 6.0 },
        ];
        let n = 10_000;
        for family in families {
            let model = PotentialModel::new(
                family,
                Some(Profile::Affine {
                    offset: 1.0,
                    gradient: vec![2.0],
                }),
                Some(Profile::Affine {
                    offset: 0.5,
                    gradient: vec![1.0],
                }),
            )
            .unwrap();
            let sampler = Sampler::new(&model, &lat).unwrap();
            let samples: Vec<PotentialSample> = (0..n).map(|s| sampler.sample(s as u64)).collect();
            for site in 0..lat.len() {
                let y = lat.point(site);
                let column: Vec<f64> = samples.iter().map(|s| s.values[site]).collect();
                let (m, var) = mean_var(&column);
                let u = 1.0 + 2.0 * y[0];
                let v = 0.5 + y[0];
                assert_relative_eq!(model.mean_at(&y).unwrap(), u, epsilon = 1e-12);
                assert_relative_eq!(model.variance_at(&y).unwrap(), v, epsilon = 1e-12);
                assert!(
                    (m - u).abs() <= 5.0 * (v / n as f64).sqrt(),
                    "{family:?} mean {m} vs {u}"
                );
                // standard error of the sample variance from the sample fourth moment
                let m4 = column.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
                let se = ((m4 - var * var) / n as f64).sqrt();
                assert!((var - v).abs() <= 5.0 * se, "{family:?} var {var} vs {v}");
            }
        }
    }

    #[test]
    fn profiles_require_finite_moments() {
        assert!(PotentialModel::new(
            Family::NegativePareto { index: 1.0 },
            Some(Profile::Constant(0.0)),
            None
        )
        .is_err());
        assert!(PotentialModel::new(
            Family::SymmetricPareto { index: 2.0 },
            None,
            Some(Profile::Constant(1.0))
        )
        .is_err());
        assert!(PotentialModel::raw(Family::Uniform { half_width: 0.0 }).is_err());
        assert!(PotentialModel::raw(Family::NegativePareto { index: -1.0 }).is_err());
    }

    #[test]
    fn closed_form_moments_match_quantile_integral() {
        let cases = [
            (Family::Uniform { half_width: 1.5 }, 1.7),
            (Family::Gaussian, 1.5),
            (Family::Gaussian, 3.0),
            (Family::SymmetricPareto { index: 4.0 }, 1.5),
            (Family::NegativePareto { index: 3.0 }, 1.95),
        ];
        for (family, r) in cases {
            let closed = family.abs_moment(r);
            let quad = family.expect(|y| y.abs().powf(r));
            assert_relative_eq!(closed, quad, max_relative = 1e-8);
        }
        assert_relative_eq!(Family::Gaussian.abs_moment(2.0), 1.0, epsilon = 1e-12);
        assert_eq!(
            Family::NegativePareto { index: 2.0 }.abs_moment(2.0),
            f64::INFINITY
        );
    }

    #[test]
    fn shifted_moments() {
        // uniform closed form against the quantile integral; the integrand has
        // a kink where the shifted law crosses zero, which limits the rule
        let model = PotentialModel::new(
            Family::Uniform { half_width: 1.0 },
            Some(Profile::Constant(0.4)),
            Some(Profile::Constant(0.5)),
        )
        .unwrap();
        let law = model.site_law(&[0.5]).unwrap();
        let closed = model.abs_moment_at(&[0.5], 1.5).unwrap();
        let quad = model.family.expect(|y| law.apply(y).abs().powf(1.5));
        assert_relative_eq!(closed, quad, max_relative = 2e-5);
        // Gaussian second absolute moment = mean^2 + variance
        let model = PotentialModel::new(
            Family::Gaussian,
            Some(Profile::Constant(2.0)),
            Some(Profile::Constant(3.0)),
        )
        .unwrap();
        assert_relative_eq!(
            model.abs_moment_at(&[0.5], 2.0).unwrap(),
            7.0,
            max_relative = 1e-9
        );
    }

    #[test]
    fn truncation_examples() {
        let s = PotentialSample::deterministic(vec![5.0, -12.0, 3.0], 0.1);
        let (t, changed) = s.truncate(1.0).unwrap();
        assert_eq!(t.values, vec![5.0, 0.0, 3.0]);
        assert!(changed && t.truncated);
        assert_eq!(t.kappa, Some(1.0));

        let (u, changed) = PotentialSample::deterministic(vec![1.0, -2.0], 0.1)
            .truncate(1.0)
            .unwrap();
        assert_eq!(u.values, vec![1.0, -2.0]);
        assert!(!changed);

        // threshold above max |xi| leaves the sample fixed
        let (w, changed) = s.truncate(50.0).unwrap();
        assert_eq!(w.values, s.values);
        assert!(!changed);

        assert!(s.truncate(0.0).is_err());
        assert!(s.truncate(-1.0).is_err());
    }

    #[test]
    fn truncation_is_idempotent() {
        let lat = discretize(&ContinuumDomain::unit_box(2).unwrap(), 1.0 / 16.0).unwrap();
        let model = PotentialModel::raw(Family::SymmetricPareto { index: 1.5 }).unwrap();
        for seed in 0..20 {
            let s = sample_potential(&model, &lat, seed).unwrap();
            let (once, _) = s.truncate(1.2).unwrap();
            let (twice, changed) = once.truncate(1.2).unwrap();
            assert_eq!(once, twice);
            assert!(!changed);
            let threshold = lat.eps().powf(-1.2);
            assert!(once.values.iter().all(|v| v.abs() <= threshold));
        }
    }
}
