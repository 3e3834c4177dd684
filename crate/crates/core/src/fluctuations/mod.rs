//! Monte Carlo ensembles over potential realisations and the statistics
//! built on them.
//!
//! Every sample is a pure function of `(config, eps index, sample index)`, so
//! results do not depend on the number of worker threads or on scheduling.

mod experiments;
mod stats;

pub use experiments::{
    clt_report, convergence_experiment, convergence_table, discrete_covariance,
    heavy_tail_divergence, non_simple_indices, predicted_covariance, rescaled_fluctuations,
    truncation_gap_exponent, truncation_mean_gap, CltReport, ConvergenceReport, ConvergenceRow,
    TailReport, TailRow, TruncationGapReport, TruncationGapRow,
};
pub use stats::{
    empirical_covariance, kolmogorov_survival, linear_fit, mean, median, normality_tests,
    quantile_sorted, sorted, standard_error, variance, NormalityReport,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{continuum_reference, lowest_k_with, ContinuumReference, SolverOptions};
use crate::error::{Error, Result};
use crate::lattice::{discretize, ContinuumDomain, LatticeDomain, Profile};
use crate::operator::assemble;
use crate::potential::{
    choose_kappa, choose_r, choose_rho, Eigenfunction, EventContext, EventParams, EventReport,
    KappaMode, PotentialModel, PotentialSample, Sampler, TailTilt, TiltedSampler,
};
use crate::seed::sample_seed;

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub domain: ContinuumDomain,
    pub model: PotentialModel,
    /// Descending lattice spacings.
    pub eps_list: Vec<f64>,
    /// 1-based eigenvalue indices.
    pub k_indices: Vec<usize>,
    pub n_samples: usize,
    pub base_seed: u64,
    pub kappa_mode: KappaMode,
    /// Truncation exponent; the midpoint of the `kappa_mode` window if unset.
    pub kappa: Option<f64>,
    pub r: Option<f64>,
    pub rho: Option<f64>,
    pub gamma: f64,
    pub moment_factor: f64,
    /// Evaluate the good events `E` and `F` for every sample.
    pub events: bool,
    /// Spacing of the continuum reference used by the events.
    pub fine_eps: Option<f64>,
    pub solver: SolverOptions,
    /// Draw from a tilted tail law and weight each sample; only the
    /// truncation-gap statistics use the weights.
    pub tilt: Option<TailTilt>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl EnsembleConfig {
    pub fn new(
        domain: ContinuumDomain,
        model: PotentialModel,
        eps_list: Vec<f64>,
        k_indices: Vec<usize>,
        n_samples: usize,
    ) -> Self {
        EnsembleConfig {
            domain,
            model,
            eps_list,
            k_indices,
            n_samples,
            base_seed: 1,
            kappa_mode: KappaMode::Clt,
            kappa: None,
            r: None,
            rho: None,
            gamma: 0.5,
            moment_factor: 4.0,
            events: false,
            fine_eps: None,
            solver: SolverOptions::default(),
            tilt: None,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if let Err(e) = self.domain.validate() {
            problems.push(e.to_string());
        }
        if self.eps_list.is_empty() {
            problems.push("eps_list is empty".into());
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0)) {
            problems.push("eps_list entries must be positive".into());
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            problems.push("eps_list must be strictly descending".into());
        }
        if self.k_indices.is_empty() || self.k_indices.contains(&0) {
            problems.push("k_indices must be nonempty and 1-based".into());
        }
        let mut ks = self.k_indices.clone();
        ks.sort_unstable();
        ks.dedup();
        if ks.len() != self.k_indices.len() {
            problems.push("k_indices must be distinct".into());
        }
        if self.n_samples < 2 {
            problems.push(format!("n_samples = {} must be at least 2", self.n_samples));
        }
        if !(self.gamma > 0.0) {
            problems.push(format!("gamma = {} must be positive", self.gamma));
        }
        if self.tilt.is_some() && self.events {
            problems.push("events are not defined for tilted sampling".into());
        }
        if self.workers == Some(0) {
            problems.push("workers must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn k_max(&self) -> usize {
        self.k_indices.iter().copied().max().unwrap_or(1)
    }

    /// Explicit `kappa`, or the midpoint of the window for `kappa_mode`.
    pub fn resolved_kappa(&self) -> Result<f64> {
        match self.kappa {
            Some(k) => Ok(k),
            None => choose_kappa(self.model.moment_index(), self.dim(), self.kappa_mode),
        }
    }

    /// `E ξ(y)`, or zero when the family has no mean.
    pub fn mean_profile(&self) -> Profile {
        match (self.model.mean_profile(), self.model.family().mean()) {
            (Some(u), _) => u.clone(),
            (None, Some(m)) => Profile::Constant(m),
            (None, None) => Profile::Constant(0.0),
        }
    }

    /// `Var ξ(y)`, or zero when the family has no variance.
    pub fn variance_profile(&self) -> Profile {
        match (
            self.model.variance_profile(),
            self.model.family().variance(),
        ) {
            (Some(v), Some(_)) => v.clone(),
            (None, Some(raw)) => Profile::Constant(raw),
            _ => Profile::Constant(0.0),
        }
    }

    /// `fine_eps`, defaulting to a quarter of the smallest experiment spacing.
    pub fn resolved_fine_eps(&self) -> f64 {
        self.fine_eps
            .unwrap_or_else(|| self.eps_list.iter().copied().fold(f64::INFINITY, f64::min) / 4.0)
    }

    /// Continuum reference for `−Δ + U` with one eigenvalue beyond the
    /// largest requested index, so every requested gap can be checked.
    pub fn reference(&self) -> Result<ContinuumReference> {
        continuum_reference(
            &self.domain,
            &self.mean_profile(),
            self.k_max() + 1,
            self.resolved_fine_eps(),
        )
    }

    fn event_params(&self, kappa: f64) -> Result<EventParams> {
        let d = self.dim();
        let r = match self.r {
            Some(r) => r,
            None => choose_r(d, kappa)?,
        };
        let rho = match self.rho {
            Some(rho) => rho,
            None => choose_rho(d, kappa, r)?,
        };
        Ok(EventParams {
            gamma: self.gamma,
            kappa,
            r,
            rho,
            moment_factor: self.moment_factor,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub eps_index: usize,
    pub eps: f64,
    pub sample_id: usize,
    pub seed: u64,
    /// Eigenvalues for each entry of `k_indices`, from the raw potential.
    pub lambda_raw: Vec<f64>,
    /// Same, from the truncated potential.
    pub lambda_trunc: Vec<f64>,
    pub truncation_hit: bool,
    pub min_xi: f64,
    pub events: Option<EventReport>,
    /// Solver failure, if any; eigenvalues are NaN in that case.
    pub error: Option<String>,
    /// Log likelihood ratio of the sample; zero without tilting.
    pub log_weight: f64,
}

impl SampleRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub dim: usize,
    pub eps_list: Vec<f64>,
    pub lattice_sizes: Vec<usize>,
    pub k_indices: Vec<usize>,
    pub n_samples: usize,
    pub base_seed: u64,
    pub kappa: f64,
    pub event_params: Option<EventParams>,
    /// Requested indices whose continuum eigenvalue is not simple.
    pub flagged_indices: Vec<usize>,
    /// Ordered by `(eps_index, sample_id)`.
    pub records: Vec<SampleRecord>,
}

impl EnsembleResult {
    pub fn eps_index(&self, eps: f64) -> Result<usize> {
        self.eps_list
            .iter()
            .position(|&e| e == eps || (e - eps).abs() <= 1e-12 * eps)
            .ok_or_else(|| Error::MissingRecords(format!("no records at eps = {eps}")))
    }

    pub fn records_at(&self, eps: f64) -> Result<&[SampleRecord]> {
        let i = self.eps_index(eps)?;
        let start = i * self.n_samples;
        Ok(&self.records[start..start + self.n_samples])
    }

    pub fn k_position(&self, k: usize) -> Result<usize> {
        self.k_indices
            .iter()
            .position(|&x| x == k)
            .ok_or(Error::IndexOutOfRange {
                k,
                available: self.k_indices.len(),
            })
    }

    /// `(raw, truncated)` eigenvalue series of index `k` at `eps`, skipping
    /// failed samples.
    pub fn series(&self, eps: f64, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let pos = self.k_position(k)?;
        let recs = self.records_at(eps)?;
        Ok(recs
            .iter()
            .filter(|r| r.ok())
            .map(|r| (r.lambda_raw[pos], r.lambda_trunc[pos]))
            .unzip())
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.ok()).count()
    }
}

struct Level {
    lattice: LatticeDomain,
    sampler: Sampler,
    tilted: Option<TiltedSampler>,
    events: Option<EventContext>,
}

fn solve(
    lattice: &LatticeDomain,
    xi: &PotentialSample,
    k_max: usize,
    ks: &[usize],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let h = assemble(lattice, xi)?;
    let spectrum = lowest_k_with(&h, k_max.min(h.dim()), opts)?;
    ks.iter()
        .map(|&k| {
            spectrum
                .eigenvalues
                .get(k - 1)
                .copied()
                .ok_or(Error::IndexOutOfRange {
                    k,
                    available: spectrum.len(),
                })
        })
        .collect()
}

fn run_sample(
    config: &EnsembleConfig,
    level: &Level,
    eps_index: usize,
    sample_id: usize,
    kappa: f64,
) -> SampleRecord {
    let eps = config.eps_list[eps_index];
    let seed = sample_seed(config.base_seed, eps_index, sample_id);
    let (xi, log_weight) = match &level.tilted {
        Some(t) => t.sample(seed),
        None => (level.sampler.sample(seed), 0.0),
    };
    let mut record = SampleRecord {
        eps_index,
        eps,
        sample_id,
        seed,
        lambda_raw: vec![f64::NAN; config.k_indices.len()],
        lambda_trunc: vec![f64::NAN; config.k_indices.len()],
        truncation_hit: false,
        min_xi: xi.min(),
        events: None,
        error: None,
        log_weight,
    };
    let outcome = (|| -> Result<()> {
        let (truncated, changed) = xi.truncate(kappa)?;
        record.truncation_hit = changed;
        let k_max = config.k_max();
        record.lambda_raw = solve(
            &level.lattice,
            &xi,
            k_max,
            &config.k_indices,
            &config.solver,
        )?;
        record.lambda_trunc = if changed {
            solve(
                &level.lattice,
                &truncated,
                k_max,
                &config.k_indices,
                &config.solver,
            )?
        } else {
            record.lambda_raw.clone()
        };
        if let Some(ctx) = &level.events {
            record.events = Some(ctx.evaluate(&level.lattice, &xi.values)?);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        record.error = Some(e.to_string());
    }
    record
}

/// Samples every `(eps, sample)` pair and records raw and truncated
/// eigenvalues. Solver failures are recorded per sample, not propagated.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleResult> {
    config.validate()?;
    let kappa = config.resolved_kappa()?;
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa = {kappa} must be positive"
        )));
    }
    let closed_form = matches!(config.domain, ContinuumDomain::Box { .. })
        && config.mean_profile().as_constant().is_some();
    let reference = if config.events || closed_form {
        Some(config.reference()?)
    } else {
        None
    };
    let flagged_indices = match &reference {
        Some(r) => non_simple_indices(r, &config.k_indices)?,
        None => Vec::new(),
    };
    for k in &flagged_indices {
        log::warn!(
            "continuum eigenvalue {k} is not simple; its fluctuations have no Gaussian limit"
        );
    }
    let event_params = if config.events {
        Some(config.event_params(kappa)?)
    } else {
        None
    };
    let levels = config
        .eps_list
        .iter()
        .map(|&eps| build_level(config, eps, kappa, event_params, reference.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let work: Vec<(usize, usize)> = (0..levels.len())
        .flat_map(|i| (0..config.n_samples).map(move |j| (i, j)))
        .collect();
    let job = || -> Vec<SampleRecord> {
        work.par_iter()
            .map(|&(i, j)| run_sample(config, &levels[i], i, j, kappa))
            .collect()
    };
    let records = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .install(job),
        None => job(),
    };
    Ok(EnsembleResult {
        dim: config.dim(),
        eps_list: config.eps_list.clone(),
        lattice_sizes: levels.iter().map(|l| l.lattice.len()).collect(),
        k_indices: config.k_indices.clone(),
        n_samples: config.n_samples,
        base_seed: config.base_seed,
        kappa,
        event_params,
        flagged_indices,
        records,
    })
}

fn build_level(
    config: &EnsembleConfig,
    eps: f64,
    kappa: f64,
    params: Option<EventParams>,
    reference: Option<&ContinuumReference>,
) -> Result<Level> {
    let lattice = discretize(&config.domain, eps)?;
    if config.k_max() > lattice.len() {
        return Err(Error::IndexOutOfRange {
            k: config.k_max(),
            available: lattice.len(),
        });
    }
    let sampler = Sampler::new(&config.model, &lattice)?;
    let tilted = config
        .tilt
        .map(|t| TiltedSampler::new(&config.model, lattice.len(), eps, eps.powf(-kappa), t))
        .transpose()?;
    let events = match (params, reference) {
        (Some(p), Some(r)) => {
            let fns: Vec<_> = r.eigenfunctions[..config.k_max()]
                .iter()
                .map(|f| move |y: &[f64]| f.eval(y))
                .collect();
            let refs: Vec<Eigenfunction> = fns.iter().map(|f| f as Eigenfunction).collect();
            Some(EventContext::new(&lattice, &config.model, &refs, p)?)
        }
        _ => None,
    };
    Ok(Level {
        lattice,
        sampler,
        tilted,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Family;

    fn uniform_config(n: usize) -> EnsembleConfig {
        let model = PotentialModel::new(
            Family::Uniform { half_width: 1.0 },
            Some(Profile::Constant(0.0)),
            Some(Profile::Constant(1.0 / 3.0)),
        )
        .unwrap();
        EnsembleConfig::new(
            ContinuumDomain::unit_box(1).unwrap(),
            model,
            vec![1.0 / 32.0, 1.0 / 64.0],
            vec![1, 2],
            n,
        )
    }

    #[test]
    fn same_seed_same_result() {
        let config = uniform_config(4);
        let a = run_ensemble(&config).unwrap();
        let b = run_ensemble(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 8);
        let mut other = config.clone();
        other.base_seed = 2;
        assert_ne!(
            run_ensemble(&other).unwrap().records[0].lambda_raw,
            a.records[0].lambda_raw
        );
    }

    #[test]
    fn serial_equals_parallel() {
        let mut config = uniform_config(6);
        config.events = true;
        config.workers = Some(1);
        let serial = run_ensemble(&config).unwrap();
        config.workers = Some(8);
        let parallel = run_ensemble(&config).unwrap();
        assert_eq!(serial, parallel);
        assert!(serial.records.iter().all(|r| r.events.is_some()));
    }

    #[test]
    fn bounded_model_truncation_is_a_no_op() {
        let result = run_ensemble(&uniform_config(5)).unwrap();
        for r in &result.records {
            assert!(!r.truncation_hit);
            assert_eq!(r.lambda_raw, r.lambda_trunc);
        }
    }

    #[test]
    fn records_are_ordered_and_reproducible_in_isolation() {
        let config = uniform_config(3);
        let result = run_ensemble(&config).unwrap();
        for (n, r) in result.records.iter().enumerate() {
            assert_eq!((r.eps_index, r.sample_id), (n / 3, n % 3));
            let lat = discretize(&config.domain, r.eps).unwrap();
            let xi = Sampler::new(&config.model, &lat).unwrap().sample(r.seed);
            let again = solve(&lat, &xi, 2, &[1, 2], &config.solver).unwrap();
            assert_eq!(again, r.lambda_raw);
        }
    }

    #[test]
    fn invalid_configs_list_every_problem() {
        let mut config = uniform_config(1);
        config.eps_list = vec![0.1, 0.2];
        config.k_indices = vec![1, 1];
        match run_ensemble(&config) {
            Err(Error::Config(problems)) => assert_eq!(problems.len(), 3, "{problems:?}"),
            other => panic!("{other:?}"),
        }
    }
}
