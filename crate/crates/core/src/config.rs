//! Run configuration, read from a single TOML file.
//!
//! ```toml
//! experiment = "clt"          # converge | clt | derivative-check | green-check
//!                             # | tail-divergence | truncation-gap | diagnostics
//! eps_list = [0.001953125]    # strictly descending
//! k_indices = [1, 2]          # 1-based
//! n_samples = 2000            # ensemble size, or number of draws for probes
//! base_seed = 20240611
//! workers = 4                 # optional; never changes the output
//!
//! [domain]
//! kind = "box"                # or kind = "ball", center = [..], radius = ..
//! intervals = [[0.0, 1.0]]
//!
//! [model]
//! family = "uniform"          # gaussian | symmetric-pareto | negative-pareto
//! half_width = 1.0            # uniform only; Pareto laws take `index`
//! mean = 0.0                  # optional: a number or { offset, gradient }
//! variance = 0.3333333333333333
//!
//! [parameters]                # every entry optional
//! kappa_mode = "clt"          # or "homogenization"
//! kappa = 0.25
//! r = 2.5
//! rho = 0.1
//! gamma = 0.5
//! moment_factor = 4.0
//! k_prime = 1.25              # tail-divergence only
//! importance_hits = 1.0       # truncation-gap only: tilt the Pareto tail
//! importance_index = 1.0      # proposal tail index, default K/2
//! fine_eps = 0.0009765625
//! events = false              # always on for diagnostics
//!
//! [solver]                    # see `SolverOptions`
//! tol = 1e-10
//!
//! [probe]                     # derivative-check and green-check
//! sites = [0, 3]              # default: every site
//! step = 1e-4
//! segment = 0.5
//! n_quad = 64
//! fd_tol = 1e-6
//! green_tol = 1e-8
//! second_variation_tol = 1e-4
//!
//! [output]
//! dir = "runs"                # relative to the config file
//! dump_samples = 0            # binary dumps of the first n samples per eps
//! ```
//!
//! Unknown keys are rejected, and validation reports every problem at once.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eigensolve::SolverOptions;
use crate::error::{Error, Result};
use crate::fluctuations::EnsembleConfig;
use crate::lattice::{discretize, ContinuumDomain, Profile};
use crate::operator::DENSE_LIMIT;
use crate::potential::{
    kappa_window, r_window, rho_window, tail_kappa_window, tail_kprime_window,
    truncation_gap_k_window, Family, KappaMode, PotentialModel, TailTilt,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Converge,
    Clt,
    DerivativeCheck,
    GreenCheck,
    TailDivergence,
    TruncationGap,
    Diagnostics,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Converge => "converge",
            Experiment::Clt => "clt",
            Experiment::DerivativeCheck => "derivative-check",
            Experiment::GreenCheck => "green-check",
            Experiment::TailDivergence => "tail-divergence",
            Experiment::TruncationGap => "truncation-gap",
            Experiment::Diagnostics => "diagnostics",
        }
    }

    pub fn is_probe(self) -> bool {
        matches!(self, Experiment::DerivativeCheck | Experiment::GreenCheck)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: String,
    pub intervals: Option<Vec<[f64; 2]>>,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
}

impl DomainSpec {
    pub fn build(&self) -> std::result::Result<ContinuumDomain, Vec<String>> {
        let mut problems = Vec::new();
        let domain = match self.kind.as_str() {
            "box" => {
                if self.center.is_some() || self.radius.is_some() {
                    problems.push("domain: a box takes `intervals` only".into());
                }
                if self.intervals.is_none() {
                    problems.push("domain: a box needs `intervals`".into());
                }
                self.intervals.as_ref().map(|iv| ContinuumDomain::Box {
                    intervals: iv.iter().map(|&[a, b]| (a, b)).collect(),
                })
            }
            "ball" => {
                if self.intervals.is_some() {
                    problems.push("domain: a ball takes `center` and `radius` only".into());
                }
                match (&self.center, self.radius) {
                    (Some(center), Some(radius)) => Some(ContinuumDomain::Ball {
                        center: center.clone(),
                        radius,
                    }),
                    _ => {
                        problems.push("domain: a ball needs `center` and `radius`".into());
                        None
                    }
                }
            }
            other => {
                problems.push(format!(
                    "domain: unknown kind {other:?} (expected \"box\" or \"ball\")"
                ));
                None
            }
        };
        if let Some(Err(e)) = domain.as_ref().map(ContinuumDomain::validate) {
            problems.push(format!("domain: {e}"));
        }
        match domain {
            Some(d) if problems.is_empty() => Ok(d),
            _ => Err(problems),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    pub offset: f64,
    pub gradient: Vec<f64>,
}

/// A constant, or `offset + gradient · y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Constant(f64),
    Affine(AffineSpec),
}

impl ProfileSpec {
    pub fn build(&self) -> Profile {
        match self {
            ProfileSpec::Constant(c) => Profile::Constant(*c),
            ProfileSpec::Affine(a) => Profile::Affine {
                offset: a.offset,
                gradient: a.gradient.clone(),
            },
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            ProfileSpec::Constant(_) => None,
            ProfileSpec::Affine(a) => Some(a.gradient.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: String,
    pub half_width: Option<f64>,
    pub index: Option<f64>,
    pub mean: Option<ProfileSpec>,
    pub variance: Option<ProfileSpec>,
}

impl ModelSpec {
    pub fn build(&self, d: Option<usize>) -> std::result::Result<PotentialModel, Vec<String>> {
        let mut problems = Vec::new();
        let family = match self.family.as_str() {
            "uniform" => {
                if self.index.is_some() {
                    problems.push("model: `index` is not used by the uniform family".into());
                }
                match self.half_width {
                    Some(a) => Some(Family::Uniform { half_width: a }),
                    None => {
                        problems.push("model: the uniform family needs `half_width`".into());
                        None
                    }
                }
            }
            "gaussian" => {
                if self.index.is_some() || self.half_width.is_some() {
                    problems.push("model: the gaussian family takes no shape parameter".into());
                }
                Some(Family::Gaussian)
            }
            name @ ("symmetric-pareto" | "negative-pareto") => {
                if self.half_width.is_some() {
                    problems.push(format!("model: `half_width` is not used by {name}"));
                }
                match self.index {
                    Some(index) if name == "symmetric-pareto" => {
                        Some(Family::SymmetricPareto { index })
                    }
                    Some(index) => Some(Family::NegativePareto { index }),
                    None => {
                        problems.push(format!("model: {name} needs `index`"));
                        None
                    }
                }
            }
            other => {
                problems.push(format!(
                    "model: unknown family {other:?} (expected uniform, gaussian, symmetric-pareto or negative-pareto)"
                ));
                None
            }
        };
        for (name, spec) in [("mean", &self.mean), ("variance", &self.variance)] {
            if let (Some(d), Some(got)) = (d, spec.as_ref().and_then(ProfileSpec::dim)) {
                if got != d {
                    problems.push(format!(
                        "model: {name} gradient has {got} entries, domain has dimension {d}"
                    ));
                }
            }
        }
        if let Some(ProfileSpec::Constant(v)) = self.variance {
            if !(v >= 0.0) {
                problems.push(format!("model: variance {v} must be non-negative"));
            }
        }
        let Some(family) = family else {
            return Err(problems);
        };
        match PotentialModel::new(
            family,
            self.mean.as_ref().map(ProfileSpec::build),
            self.variance.as_ref().map(ProfileSpec::build),
        ) {
            Ok(m) if problems.is_empty() => Ok(m),
            Ok(_) => Err(problems),
            Err(e) => {
                problems.push(format!("model: {e}"));
                Err(problems)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Parameters {
    pub kappa_mode: KappaMode,
    pub kappa: Option<f64>,
    pub r: Option<f64>,
    pub rho: Option<f64>,
    pub gamma: f64,
    pub moment_factor: f64,
    pub k_prime: Option<f64>,
    pub importance_hits: Option<f64>,
    pub importance_index: Option<f64>,
    pub fine_eps: Option<f64>,
    pub events: bool,
}

impl Default for Parameters {
    fn default() -> Self {
        Parameters {
            kappa_mode: KappaMode::Clt,
            kappa: None,
            r: None,
            rho: None,
            gamma: 0.5,
            moment_factor: 4.0,
            k_prime: None,
            importance_hits: None,
            importance_index: None,
            fine_eps: None,
            events: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSpec {
    /// 0-based site indices; every site when absent.
    pub sites: Option<Vec<usize>>,
    pub step: f64,
    pub segment: f64,
    pub n_quad: usize,
    pub fd_tol: f64,
    pub green_tol: f64,
    pub second_variation_tol: f64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec {
            sites: None,
            step: 1e-4,
            segment: 0.5,
            n_quad: 64,
            fd_tol: 1e-6,
            green_tol: 1e-8,
            second_variation_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: String,
    pub dump_samples: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: "runs".into(),
            dump_samples: 0,
        }
    }
}

fn default_k_indices() -> Vec<usize> {
    vec![1]
}

fn default_n_samples() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub domain: DomainSpec,
    pub model: ModelSpec,
    pub eps_list: Vec<f64>,
    #[serde(default = "default_k_indices")]
    pub k_indices: Vec<usize>,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub probe: ProbeSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    /// Parses and validates.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble_config().map(|_| ())
    }

    /// The ensemble this run samples; also the full validation pass.
    pub fn ensemble_config(&self) -> Result<EnsembleConfig> {
        let mut problems = Vec::new();
        let domain = self.domain.build().map_err(|p| problems.extend(p)).ok();
        let d = domain.as_ref().map(ContinuumDomain::dim);
        let model = self.model.build(d).map_err(|p| problems.extend(p)).ok();

        if self.eps_list.is_empty() {
            problems.push("eps_list is empty".into());
        }
        if self.eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
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
        let min_samples = if self.experiment.is_probe() { 1 } else { 2 };
        if self.n_samples < min_samples {
            problems.push(format!(
                "n_samples = {} must be at least {min_samples}",
                self.n_samples
            ));
        }
        if self.workers == Some(0) {
            problems.push("workers must be positive".into());
        }
        let p = &self.parameters;
        if !(p.gamma > 0.0) {
            problems.push(format!("parameters.gamma = {} must be positive", p.gamma));
        }
        if !(p.moment_factor > 0.0) {
            problems.push(format!(
                "parameters.moment_factor = {} must be positive",
                p.moment_factor
            ));
        }
        if let Some(f) = p.fine_eps {
            if !(f > 0.0) {
                problems.push(format!("parameters.fine_eps = {f} must be positive"));
            }
        }
        if !(self.solver.tol > 0.0) {
            problems.push(format!("solver.tol = {} must be positive", self.solver.tol));
        }
        if self.solver.max_matvecs == 0 || self.solver.krylov_dim < 3 {
            problems.push("solver: max_matvecs must be positive and krylov_dim at least 3".into());
        }
        if let (Some(d), Some(model)) = (d, &model) {
            self.check_windows(d, model, &mut problems);
        }
        if let Some(domain) = &domain {
            self.check_lattices(domain, &mut problems);
        }
        if self.experiment.is_probe() {
            self.check_probe(&mut problems);
        }
        let (Some(domain), Some(model), true) = (domain, model, problems.is_empty()) else {
            return Err(Error::Config(problems));
        };
        let mut config = EnsembleConfig::new(
            domain,
            model,
            self.eps_list.clone(),
            self.k_indices.clone(),
            self.n_samples.max(2),
        );
        config.base_seed = self.base_seed;
        config.kappa_mode = p.kappa_mode;
        config.kappa = p.kappa;
        config.r = p.r;
        config.rho = p.rho;
        config.gamma = p.gamma;
        config.moment_factor = p.moment_factor;
        config.events = p.events || self.experiment == Experiment::Diagnostics;
        config.fine_eps = p.fine_eps;
        config.solver = self.solver.clone();
        config.workers = self.workers;
        config.tilt = self.tilt(config.model.moment_index());
        Ok(config)
    }

    fn tilt(&self, tail_index: f64) -> Option<TailTilt> {
        let p = &self.parameters;
        p.importance_hits.map(|hits| TailTilt {
            expected_hits: hits,
            proposal_index: p.importance_index.unwrap_or(tail_index / 2.0),
        })
    }

    fn check_windows(&self, d: usize, model: &PotentialModel, problems: &mut Vec<String>) {
        let p = &self.parameters;
        if p.importance_index.is_some() && p.importance_hits.is_none() {
            problems.push("parameters: importance_index needs importance_hits".into());
        }
        if let Some(tilt) = self.tilt(model.moment_index()) {
            if self.experiment != Experiment::TruncationGap {
                problems.push("parameters: importance sampling is truncation-gap only".into());
            } else if !matches!(model.family(), Family::NegativePareto { .. })
                || model.mean_profile().is_some()
                || model.variance_profile().is_some()
            {
                problems.push(
                    "parameters: importance sampling needs the raw negative-pareto law".into(),
                );
            } else if let Err(e) = tilt.validate(model.moment_index()) {
                problems.push(format!("parameters: {e}"));
            }
        }
        let k = model.moment_index();
        let mut push = |r: Result<f64>| {
            if let Err(e) = r {
                problems.push(format!("parameters: {e}"));
            }
        };
        match self.experiment {
            Experiment::TailDivergence => {
                if d < 3 {
                    push(Err(Error::InvalidParameter(format!(
                        "tail-divergence needs d >= 3, got {d}"
                    ))));
                }
                if !matches!(model.family(), Family::NegativePareto { .. })
                    || model.mean_profile().is_some()
                    || model.variance_profile().is_some()
                {
                    push(Err(Error::InvalidParameter(
                        "tail-divergence needs the raw negative-pareto family".into(),
                    )));
                    return;
                }
                let kp = tail_kprime_window(k, d).and_then(|w| match p.k_prime {
                    Some(v) => w.check(v),
                    None => Ok(w.midpoint()),
                });
                match (kp, p.kappa) {
                    (Ok(kp), Some(kappa)) => {
                        push(tail_kappa_window(d, kp).and_then(|w| w.check(kappa)))
                    }
                    (Ok(_), None) => {}
                    (Err(e), _) => push(Err(e)),
                }
            }
            Experiment::TruncationGap => {
                if matches!(
                    model.family(),
                    Family::NegativePareto { .. } | Family::SymmetricPareto { .. }
                ) {
                    if d < 3 {
                        push(Err(Error::InvalidParameter(format!(
                            "truncation-gap needs d >= 3, got {d}"
                        ))));
                    }
                    push(truncation_gap_k_window(d).and_then(|w| w.check(k)));
                }
                if let Some(kappa) = p.kappa {
                    push(
                        kappa_window(k, d, KappaMode::Homogenization).and_then(|w| w.check(kappa)),
                    );
                }
            }
            _ => {
                let kappa = match p.kappa {
                    Some(kappa) => kappa_window(k, d, p.kappa_mode).and_then(|w| w.check(kappa)),
                    None => kappa_window(k, d, p.kappa_mode).map(|w| w.midpoint()),
                };
                let wants_events = p.events || self.experiment == Experiment::Diagnostics;
                match kappa {
                    Ok(kappa) if wants_events || p.r.is_some() || p.rho.is_some() => {
                        let r = match p.r {
                            Some(r) => r_window(d, kappa).and_then(|w| w.check(r)),
                            None => r_window(d, kappa).map(|w| w.midpoint()),
                        };
                        match r {
                            Ok(r) => {
                                if let Some(rho) = p.rho {
                                    push(rho_window(d, kappa, r).and_then(|w| w.check(rho)));
                                } else {
                                    push(rho_window(d, kappa, r).map(|w| w.midpoint()));
                                }
                            }
                            Err(e) => push(Err(e)),
                        }
                    }
                    Ok(_) => {}
                    Err(e) => push(Err(e)),
                }
            }
        }
    }

    fn check_lattices(&self, domain: &ContinuumDomain, problems: &mut Vec<String>) {
        let k_max = self.k_indices.iter().copied().max().unwrap_or(1);
        for &eps in self.eps_list.iter().filter(|e| e.is_finite() && **e > 0.0) {
            match discretize(domain, eps) {
                Ok(lat) => {
                    if k_max > lat.len() {
                        problems.push(format!(
                            "eps = {eps}: {} sites cannot carry eigenvalue {k_max}",
                            lat.len()
                        ));
                    }
                    if let Some(hits) = self.parameters.importance_hits {
                        if hits >= lat.len() as f64 {
                            problems.push(format!(
                                "eps = {eps}: importance_hits = {hits} needs more than {} sites",
                                lat.len()
                            ));
                        }
                    }
                    if self.experiment.is_probe() && lat.len() > DENSE_LIMIT {
                        problems.push(format!(
                            "eps = {eps}: probes run dense, {} sites exceed {DENSE_LIMIT}",
                            lat.len()
                        ));
                    }
                    if let Some(sites) = &self.probe.sites {
                        if self.experiment.is_probe() {
                            if let Some(bad) = sites.iter().find(|&&s| s >= lat.len()) {
                                problems.push(format!(
                                    "probe.sites: site {bad} outside a lattice of {} sites",
                                    lat.len()
                                ));
                            }
                        }
                    }
                }
                Err(e) => problems.push(format!("eps = {eps}: {e}")),
            }
        }
    }

    fn check_probe(&self, problems: &mut Vec<String>) {
        let p = &self.probe;
        if !(p.step > 0.0) {
            problems.push(format!("probe.step = {} must be positive", p.step));
        }
        if !p.segment.is_finite() {
            problems.push("probe.segment must be finite".into());
        }
        if p.n_quad < 2 {
            problems.push(format!("probe.n_quad = {} must be at least 2", p.n_quad));
        }
        if matches!(&p.sites, Some(s) if s.is_empty()) {
            problems.push("probe.sites is empty".into());
        }
        for (name, v) in [
            ("fd_tol", p.fd_tol),
            ("green_tol", p.green_tol),
            ("second_variation_tol", p.second_variation_tol),
        ] {
            if !(v > 0.0) {
                problems.push(format!("probe.{name} = {v} must be positive"));
            }
        }
    }
}
