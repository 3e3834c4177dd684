//! Importance sampling of the one-sided Pareto tail beyond a truncation
//! level `T`.
//!
//! Under the proposal each site exceeds `T` with probability `p' = m/N`
//! (`m` expected exceedances on `N` sites) and the exceedance `|ξ|/T`
//! follows a Pareto law of index `K' < K`. Below `T` the conditional law is
//! unchanged. The likelihood ratio of a sample with exceedances at
//! magnitudes `a_1, …, a_h` is
//!
//! ```text
//! W = ((1 − p)/(1 − p'))^{N−h} · Π (p/p')(K/K')(a_i/T)^{−(K−K')},  p = T^{−K}.
//! ```
//!
//! For `K' < 2K − 2` the weighted paired differences have finite variance
//! even when the unweighted ones do not.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Family, PotentialModel, PotentialSample};
use crate::error::{Error, Result};
use crate::seed::site_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailTilt {
    /// Expected number of sites beyond the level under the proposal.
    pub expected_hits: f64,
    /// Tail index of the proposal exceedances.
    pub proposal_index: f64,
}

impl TailTilt {
    /// Proposal index `K/2`.
    pub fn with_default_index(expected_hits: f64, tail_index: f64) -> Self {
        TailTilt {
            expected_hits,
            proposal_index: tail_index / 2.0,
        }
    }

    pub fn validate(&self, tail_index: f64) -> Result<()> {
        if !(self.expected_hits > 0.0 && self.expected_hits.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "expected hits {} must be positive",
                self.expected_hits
            )));
        }
        if !(self.proposal_index > 0.0 && self.proposal_index < tail_index) {
            return Err(Error::InvalidParameter(format!(
                "proposal index {} must lie in (0, {tail_index})",
                self.proposal_index
            )));
        }
        Ok(())
    }
}

/// Tilted sampler for the raw one-sided Pareto law on `sites` sites.
#[derive(Debug, Clone, Copy)]
pub struct TiltedSampler {
    index: f64,
    proposal_index: f64,
    level: f64,
    p: f64,
    q: f64,
    sites: usize,
    eps: f64,
}

impl TiltedSampler {
    pub fn new(
        model: &PotentialModel,
        sites: usize,
        eps: f64,
        level: f64,
        tilt: TailTilt,
    ) -> Result<Self> {
        let index = match model.family() {
            Family::NegativePareto { index }
                if model.mean_profile().is_none() && model.variance_profile().is_none() =>
            {
                index
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "tail tilting needs the raw one-sided Pareto law, got {other:?}"
                )))
            }
        };
        tilt.validate(index)?;
        if !(level >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation level {level} must be at least 1"
            )));
        }
        let q = tilt.expected_hits / sites as f64;
        if !(q < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "{} expected hits on {sites} sites",
                tilt.expected_hits
            )));
        }
        Ok(TiltedSampler {
            index,
            proposal_index: tilt.proposal_index,
            level,
            p: level.powf(-index),
            q,
            sites,
            eps,
        })
    }

    /// Site value for a uniform `u ∈ (0, 1]` and its log likelihood ratio.
    pub fn site(&self, u: f64) -> (f64, f64) {
        let (p, q, k, kp) = (self.p, self.q, self.index, self.proposal_index);
        if u < q {
            let a = self.level * (u / q).powf(-1.0 / kp);
            let log_w = (p / q).ln() + (k / kp).ln() - (k - kp) * (a / self.level).ln();
            (-a, log_w)
        } else {
            let v = p + (u - q) * (1.0 - p) / (1.0 - q);
            (-v.powf(-1.0 / k), (-p).ln_1p() - (-q).ln_1p())
        }
    }

    /// Sample and its log weight. Site `i` uses the same stream as the
    /// untilted sampler.
    pub fn sample(&self, seed: u64) -> (PotentialSample, f64) {
        let mut log_weight = 0.0;
        let values = (0..self.sites)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(site_seed(seed, i));
                let (v, lw) = self.site(1.0 - rng.random::<f64>());
                log_weight += lw;
                v
            })
            .collect();
        (
            PotentialSample {
                values,
                seed,
                eps: self.eps,
                truncated: false,
                kappa: None,
            },
            log_weight,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{discretize, ContinuumDomain};
    use crate::potential::sample_potential;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn model(index: f64) -> PotentialModel {
        PotentialModel::raw(Family::NegativePareto { index }).unwrap()
    }

    proptest! {
        #[test]
        fn identity_tilt_reproduces_the_law(seed in any::<u64>(), level in 1.5f64..50.0) {
            let lat = discretize(&ContinuumDomain::unit_box(2).unwrap(), 0.125).unwrap();
            let n = lat.len();
            let index = 2.0;
            let tilt = TailTilt { expected_hits: n as f64 * level.powf(-index), proposal_index: index };
            // proposal index must be below K, so approach it from below
            let tilt = TailTilt { proposal_index: index * (1.0 - 1e-12), ..tilt };
            let s = TiltedSampler::new(&model(index), n, 0.125, level, tilt).unwrap();
            let (xi, lw) = s.sample(seed);
            let plain = sample_potential(&model(index), &lat, seed).unwrap();
            prop_assert!(lw.abs() < 1e-9, "log weight {}", lw);
            for (a, b) in xi.values.iter().zip(&plain.values) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs(), "{} vs {}", a, b);
            }
        }

        #[test]
        fn hits_are_exactly_the_proposal_draws(u in 1e-12f64..=1.0) {
            let s = TiltedSampler::new(&model(2.0), 100, 0.1, 8.0, TailTilt { expected_hits: 1.0, proposal_index: 1.0 }).unwrap();
            let (v, _) = s.site(u);
            prop_assert!(v <= -1.0);
            prop_assert_eq!(v.abs() > 8.0, u < 0.01);
        }
    }

    #[test]
    fn weights_average_to_one_and_reweight_the_tail() {
        let (index, level, sites) = (2.0, 10.0, 50);
        let tilt = TailTilt::with_default_index(2.0, index);
        let s = TiltedSampler::new(&model(index), sites, 0.1, level, tilt).unwrap();
        let n = 200_000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut w_sum, mut tail_sum, mut w2) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let (v, lw) = s.site(1.0 - rng.random::<f64>());
            let w = lw.exp();
            w_sum += w;
            w2 += w * w;
            if v < -2.0 * level {
                tail_sum += w;
            }
        }
        let nf = n as f64;
        let se = ((w2 / nf - (w_sum / nf).powi(2)) / nf).sqrt();
        assert!((w_sum / nf - 1.0).abs() < 4.0 * se, "{} ± {se}", w_sum / nf);
        // P(ξ < −2T) = (2T)^{−K}
        let exact = (2.0 * level).powf(-index);
        assert_relative_eq!(tail_sum / nf, exact, max_relative = 0.05);
    }

    #[test]
    fn rejects_bad_inputs() {
        let tilt = TailTilt {
            expected_hits: 1.0,
            proposal_index: 1.0,
        };
        let gauss = PotentialModel::raw(Family::Gaussian).unwrap();
        assert!(TiltedSampler::new(&gauss, 10, 0.1, 5.0, tilt).is_err());
        assert!(TiltedSampler::new(
            &model(2.0),
            10,
            0.1,
            5.0,
            TailTilt {
                proposal_index: 2.5,
                ..tilt
            }
        )
        .is_err());
        assert!(TiltedSampler::new(&model(2.0), 1, 0.1, 5.0, tilt).is_err());
        assert!(TiltedSampler::new(&model(2.0), 10, 0.1, 0.5, tilt).is_err());
    }
}
