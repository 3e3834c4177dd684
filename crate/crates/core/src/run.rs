//! Executes a [`RunConfig`] and writes its artifacts.
//!
//! A run directory holds `manifest.json` (config echo, code version, wall
//! time), `records.csv` (one row per sample and eigenvalue index) and
//! `summary.json` (the experiment's report). Tilted runs add `weights.csv`
//! with the log likelihood ratio of every sample. A failed run leaves
//! `error.json` instead of the summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Experiment, RunConfig};
use crate::eigensolve::{lowest_k_with, SpectrumRecord};
use crate::error::{Error, Result};
use crate::fluctuations::{
    clt_report, convergence_experiment, heavy_tail_divergence, median, non_simple_indices,
    run_ensemble, truncation_mean_gap, CltReport, ConvergenceReport, EnsembleConfig,
    EnsembleResult, TailReport, TruncationGapReport,
};
use crate::io::{
    record_rows, weight_rows, write_json, write_records_csv, write_sample, write_weights_csv,
    RecordRow, WeightRow,
};
use crate::lattice::discretize;
use crate::operator::assemble;
use crate::perturbation::{
    hadamard_derivative_check, second_variation_check, spectral_green_diag, GreenDiag,
    HadamardCheck, SecondVariationCheck,
};
use crate::potential::{choose_kappa, EventParams, KappaMode, Sampler, TiltedSampler};
use crate::seed::sample_seed;

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltSummary {
    pub failures: usize,
    pub kappa: f64,
    pub reports: Vec<CltReport>,
}

/// Probe results for one draw of the potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDraw<T> {
    pub eps: f64,
    pub draw: usize,
    pub seed: u64,
    pub checks: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeSummary {
    pub step: f64,
    pub fd_tol: f64,
    pub max_rel_err: f64,
    pub passed: bool,
    pub draws: Vec<ProbeDraw<HadamardCheck>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenSummary {
    pub segment: f64,
    pub n_quad: usize,
    pub green_tol: f64,
    pub second_variation_tol: f64,
    /// Largest `|spectral − solve| / max(|spectral|, 1e-14)`.
    pub max_green_rel_diff: f64,
    pub max_second_variation_rel_err: f64,
    pub passed: bool,
    pub green: Vec<ProbeDraw<GreenDiag>>,
    pub second_variation: Vec<ProbeDraw<SecondVariationCheck>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsLevel {
    pub eps: f64,
    pub sites: usize,
    pub n: usize,
    pub frac_in_e: f64,
    pub frac_in_f: f64,
    pub frac_truncated: f64,
    pub median_projection_stats: f64,
    pub median_xi_r_norm: f64,
    pub median_blocked_norm: f64,
    pub block_len: usize,
    pub moment_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub kappa: f64,
    pub event_params: EventParams,
    pub reference_eigenvalues: Vec<f64>,
    pub reference_error: Vec<f64>,
    pub flagged_indices: Vec<usize>,
    pub levels: Vec<DiagnosticsLevel>,
    /// Full spectrum record of sample 0 at every `eps`.
    pub spectra: Vec<SpectrumRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Summary {
    Converge(ConvergenceReport),
    Clt(CltSummary),
    DerivativeCheck(DerivativeSummary),
    GreenCheck(GreenSummary),
    TailDivergence(TailReport),
    TruncationGap(TruncationGapReport),
    Diagnostics(DiagnosticsSummary),
}

/// Records and summary of a run, before anything is written.
#[derive(Debug, Clone)]
pub struct Execution {
    pub rows: Vec<RecordRow>,
    pub weights: Vec<WeightRow>,
    pub lattice_sizes: Vec<usize>,
    pub summary: Summary,
}

pub fn execute(config: &RunConfig) -> Result<Execution> {
    let ens = config.ensemble_config()?;
    let from_result = |result: &EnsembleResult, summary: Summary| Execution {
        rows: record_rows(result),
        weights: weight_rows(result),
        lattice_sizes: result.lattice_sizes.clone(),
        summary,
    };
    Ok(match config.experiment {
        Experiment::Converge => {
            let (result, report) = convergence_experiment(&ens)?;
            from_result(&result, Summary::Converge(report))
        }
        Experiment::Clt => {
            let result = run_ensemble(&ens)?;
            let reference = ens.reference()?;
            let v = ens.variance_profile();
            let reports = result
                .eps_list
                .iter()
                .map(|&eps| clt_report(&result, eps, &reference, &v))
                .collect::<Result<Vec<_>>>()?;
            let summary = CltSummary {
                failures: result.failures(),
                kappa: result.kappa,
                reports,
            };
            from_result(&result, Summary::Clt(summary))
        }
        Experiment::TailDivergence => {
            let (result, report) = heavy_tail_divergence(&ens, config.parameters.k_prime)?;
            from_result(&result, Summary::TailDivergence(report))
        }
        Experiment::TruncationGap => {
            let (result, report) = truncation_mean_gap(&ens)?;
            from_result(&result, Summary::TruncationGap(report))
        }
        Experiment::Diagnostics => {
            let result = run_ensemble(&ens)?;
            let summary = diagnostics(&ens, &result)?;
            from_result(&result, Summary::Diagnostics(summary))
        }
        Experiment::DerivativeCheck | Experiment::GreenCheck => probe(config, &ens)?,
    })
}

fn diagnostics(ens: &EnsembleConfig, result: &EnsembleResult) -> Result<DiagnosticsSummary> {
    let reference = ens.reference()?;
    let event_params = result
        .event_params
        .ok_or_else(|| Error::InvalidParameter("diagnostics need event parameters".into()))?;
    let mut levels = Vec::new();
    let mut spectra = Vec::new();
    for (i, &eps) in result.eps_list.iter().enumerate() {
        let recs = result.records_at(eps)?;
        let events: Vec<_> = recs.iter().filter_map(|r| r.events).collect();
        if events.is_empty() {
            return Err(Error::MissingRecords(format!(
                "no event diagnostics at eps = {eps}"
            )));
        }
        let n = events.len() as f64;
        let frac = |f: &dyn Fn(&crate::potential::EventReport) -> bool| {
            events.iter().filter(|e| f(e)).count() as f64 / n
        };
        let med = |f: &dyn Fn(&crate::potential::EventReport) -> f64| {
            median(&events.iter().map(f).collect::<Vec<_>>())
        };
        levels.push(DiagnosticsLevel {
            eps,
            sites: result.lattice_sizes[i],
            n: events.len(),
            frac_in_e: frac(&|e| e.in_e),
            frac_in_f: frac(&|e| e.in_f),
            frac_truncated: recs.iter().filter(|r| r.truncation_hit).count() as f64
                / recs.len() as f64,
            median_projection_stats: med(&|e| e.projection_stats),
            median_xi_r_norm: med(&|e| e.xi_r_norm),
            median_blocked_norm: med(&|e| e.blocked_norm),
            block_len: events[0].block_len,
            moment_bound: events[0].moment_bound,
        });
        let lattice = discretize(&ens.domain, eps)?;
        let xi = Sampler::new(&ens.model, &lattice)?.sample(recs[0].seed);
        let spectrum = lowest_k_with(
            &assemble(&lattice, &xi)?,
            (ens.k_max() + 1).min(lattice.len()),
            &ens.solver,
        )?;
        spectra.push(spectrum.record(eps));
    }
    Ok(DiagnosticsSummary {
        kappa: result.kappa,
        event_params,
        flagged_indices: non_simple_indices(&reference, &ens.k_indices)?,
        reference_eigenvalues: reference.eigenvalues.clone(),
        reference_error: reference.error_estimate.clone(),
        levels,
        spectra,
    })
}

fn probe(config: &RunConfig, ens: &EnsembleConfig) -> Result<Execution> {
    let p = &config.probe;
    let mut rows = Vec::new();
    let mut lattice_sizes = Vec::new();
    let mut hadamard = Vec::new();
    let mut green = Vec::new();
    let mut second = Vec::new();
    for (i, &eps) in ens.eps_list.iter().enumerate() {
        let lattice = discretize(&ens.domain, eps)?;
        lattice_sizes.push(lattice.len());
        let sampler = Sampler::new(&ens.model, &lattice)?;
        let sites: Vec<usize> = p
            .sites
            .clone()
            .unwrap_or_else(|| (0..lattice.len()).collect());
        for draw in 0..config.n_samples {
            let seed = sample_seed(ens.base_seed, i, draw);
            let xi = sampler.sample(seed);
            let h = assemble(&lattice, &xi)?;
            let spectrum = lowest_k_with(&h, ens.k_max(), &ens.solver)?;
            for &k in &ens.k_indices {
                let lambda = spectrum.eigenvalues[k - 1];
                rows.push(RecordRow {
                    eps,
                    sample_id: draw,
                    seed,
                    k,
                    lambda_raw: lambda,
                    lambda_trunc: lambda,
                    truncation_hit: false,
                    in_e: None,
                    in_f: None,
                });
            }
            let pairs = || {
                ens.k_indices
                    .iter()
                    .flat_map(|&k| sites.iter().map(move |&s| (k, s)))
            };
            let wrap = |checks| ProbeDraw {
                eps,
                draw,
                seed,
                checks,
            };
            if config.experiment == Experiment::DerivativeCheck {
                let checks = pairs()
                    .map(|(k, s)| hadamard_derivative_check(&h, k, s, p.step))
                    .collect::<Result<Vec<_>>>()?;
                hadamard.push(wrap(checks));
            } else {
                let g = pairs()
                    .map(|(k, s)| spectral_green_diag(&h, k, s))
                    .collect::<Result<Vec<_>>>()?;
                let sv = pairs()
                    .map(|(k, s)| {
                        let from = xi.values[s];
                        second_variation_check(&h, k, s, from, from + p.segment, p.n_quad)
                    })
                    .collect::<Result<Vec<_>>>()?;
                green.push(ProbeDraw {
                    eps,
                    draw,
                    seed,
                    checks: g,
                });
                second.push(ProbeDraw {
                    eps,
                    draw,
                    seed,
                    checks: sv,
                });
            }
        }
    }
    let worst = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
    let summary = if config.experiment == Experiment::DerivativeCheck {
        let max_rel_err = worst(
            &mut hadamard
                .iter()
                .flat_map(|d| d.checks.iter().map(|c| c.rel_err)),
        );
        Summary::DerivativeCheck(DerivativeSummary {
            step: p.step,
            fd_tol: p.fd_tol,
            max_rel_err,
            passed: max_rel_err <= p.fd_tol,
            draws: hadamard,
        })
    } else {
        let max_green_rel_diff = worst(&mut green.iter().flat_map(|d| {
            d.checks
                .iter()
                .map(|c| (c.value - c.solve_value).abs() / c.value.abs().max(1e-14))
        }));
        let max_sv = worst(
            &mut second
                .iter()
                .flat_map(|d| d.checks.iter().map(|c| c.rel_err)),
        );
        Summary::GreenCheck(GreenSummary {
            segment: p.segment,
            n_quad: p.n_quad,
            green_tol: p.green_tol,
            second_variation_tol: p.second_variation_tol,
            max_green_rel_diff,
            max_second_variation_rel_err: max_sv,
            passed: max_green_rel_diff <= p.green_tol && max_sv <= p.second_variation_tol,
            green,
            second_variation: second,
        })
    };
    Ok(Execution {
        rows,
        weights: Vec::new(),
        lattice_sizes,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: Experiment,
    pub status: String,
    pub code_version: String,
    pub config_sha256: String,
    /// The config file exactly as read.
    pub config_text: String,
    pub config: RunConfig,
    pub started_at: String,
    pub wall_time_seconds: f64,
    pub lattice_sizes: Vec<usize>,
    pub files: Vec<String>,
}

/// Machine-readable failure record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub status: String,
    pub kind: String,
    pub message: String,
    pub problems: Vec<String>,
}

impl ErrorRecord {
    pub fn new(err: &Error) -> Self {
        ErrorRecord {
            status: "error".into(),
            kind: err.kind().into(),
            message: err.to_string(),
            problems: match err {
                Error::Config(p) => p.clone(),
                _ => Vec::new(),
            },
        }
    }
}

fn fresh_dir(root: &Path, experiment: Experiment) -> Result<PathBuf> {
    fs::create_dir_all(root)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    let base = format!("{}-{stamp}", experiment.name());
    for n in 0.. {
        let name = if n == 0 {
            base.clone()
        } else {
            format!("{base}-{n}")
        };
        let dir = root.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

/// Runs `config_text` into a fresh timestamped directory under `out_root`
/// and returns that directory. On failure after the directory exists, an
/// `error.json` is left in it.
pub fn run_config_text(
    config_text: &str,
    out_root: &Path,
    workers: Option<usize>,
) -> Result<PathBuf> {
    let mut config = RunConfig::from_toml_str(config_text)?;
    if workers.is_some() {
        config.workers = workers;
    }
    let dir = fresh_dir(out_root, config.experiment)?;
    match write_run(&config, config_text, &dir) {
        Ok(()) => Ok(dir),
        Err(e) => {
            write_json(&dir.join("error.json"), &ErrorRecord::new(&e))?;
            Err(e)
        }
    }
}

/// Reads the config file and runs it. Output goes under `out_root`, or the
/// config's `output.dir` resolved against the config file's directory.
pub fn run(config_path: &Path, out_root: Option<&Path>, workers: Option<usize>) -> Result<PathBuf> {
    let text = fs::read_to_string(config_path)?;
    let root = match out_root {
        Some(r) => r.to_path_buf(),
        None => {
            let config = RunConfig::from_toml_str(&text)?;
            config_path
                .parent()
                .unwrap_or(Path::new("."))
                .join(config.output.dir)
        }
    };
    run_config_text(&text, &root, workers)
}

fn write_run(config: &RunConfig, config_text: &str, dir: &Path) -> Result<()> {
    let started_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    let clock = Instant::now();
    let execution = execute(config)?;
    let mut files = vec!["records.csv".to_string(), "summary.json".to_string()];
    write_records_csv(&execution.rows, fs::File::create(dir.join("records.csv"))?)?;
    write_json(&dir.join("summary.json"), &execution.summary)?;
    if !execution.weights.is_empty() {
        write_weights_csv(
            &execution.weights,
            fs::File::create(dir.join("weights.csv"))?,
        )?;
        files.push("weights.csv".into());
    }
    if config.output.dump_samples > 0 {
        files.extend(dump_samples(config, dir)?);
    }
    let manifest = Manifest {
        experiment: config.experiment,
        status: "ok".into(),
        code_version: CODE_VERSION.into(),
        config_sha256: hex::encode(Sha256::digest(config_text.as_bytes())),
        config_text: config_text.into(),
        config: config.clone(),
        started_at,
        wall_time_seconds: clock.elapsed().as_secs_f64(),
        lattice_sizes: execution.lattice_sizes,
        files,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

fn dump_samples(config: &RunConfig, dir: &Path) -> Result<Vec<String>> {
    let ens = config.ensemble_config()?;
    let sub = dir.join("samples");
    fs::create_dir_all(&sub)?;
    let mut names = Vec::new();
    for (i, &eps) in ens.eps_list.iter().enumerate() {
        let lattice = discretize(&ens.domain, eps)?;
        let sampler = Sampler::new(&ens.model, &lattice)?;
        let tilted = match ens.tilt {
            Some(t) => {
                // tilting is truncation-gap only, whose default kappa is the
                // homogenization midpoint
                let kappa = match ens.kappa {
                    Some(k) => k,
                    None => choose_kappa(
                        ens.model.moment_index(),
                        ens.dim(),
                        KappaMode::Homogenization,
                    )?,
                };
                let level = eps.powf(-kappa);
                Some(TiltedSampler::new(
                    &ens.model,
                    lattice.len(),
                    eps,
                    level,
                    t,
                )?)
            }
            None => None,
        };
        for j in 0..config.output.dump_samples.min(config.n_samples) {
            let name = format!("e{i}_s{j}");
            let seed = sample_seed(ens.base_seed, i, j);
            let xi = match &tilted {
                Some(t) => t.sample(seed).0,
                None => sampler.sample(seed),
            };
            write_sample(&sub.join(&name), &xi, &lattice)?;
            names.push(format!("samples/{name}.bin"));
        }
    }
    Ok(names)
}
