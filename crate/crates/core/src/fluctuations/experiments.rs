//! Statistics over ensemble results: rescaled fluctuations, covariance
//! predictions, convergence tables and the heavy-tail experiments.

use serde::{Deserialize, Serialize};

use super::stats::{
    empirical_covariance, linear_fit, mean, normality_tests, quantile_sorted, sorted,
    standard_error,
};
use super::{run_ensemble, EnsembleConfig, EnsembleResult, NormalityReport, SampleRecord};
use crate::eigensolve::{default_gap_tol, ContinuumReference, SpectrumResult};
use crate::error::{Error, Result};
use crate::lattice::{sample_profile, LatticeDomain, Profile};
use crate::potential::{
    choose_kappa, kappa_window, tail_kappa_window, tail_kprime_window, truncation_gap_k_window,
    Family, KappaMode, TailTilt,
};

fn untilted(config: &EnsembleConfig) -> Result<()> {
    if config.tilt.is_some() {
        return Err(Error::InvalidParameter(
            "tilted sampling is only supported by the truncation gap".into(),
        ));
    }
    Ok(())
}

fn scale(eps: f64, d: usize) -> f64 {
    eps.powf(d as f64 / 2.0)
}

/// `X_j = (λ^{(k)}(ξ_j) − m̄) / eps^{d/2}`, with `m̄` the sample mean of the
/// truncated-run eigenvalues at the same `eps`.
pub fn rescaled_fluctuations(result: &EnsembleResult, eps: f64, k: usize) -> Result<Vec<f64>> {
    let (raw, trunc) = result.series(eps, k)?;
    if raw.len() < 2 {
        return Err(Error::MissingRecords(format!(
            "{} usable samples at eps = {eps}, need 2",
            raw.len()
        )));
    }
    let centre = mean(&trunc);
    let s = scale(eps, result.dim);
    Ok(raw.iter().map(|l| (l - centre) / s).collect())
}

/// Requested indices whose continuum eigenvalue is not separated from its
/// neighbours by more than the gap tolerance (`delta = gap/3`).
pub fn non_simple_indices(
    reference: &ContinuumReference,
    k_indices: &[usize],
) -> Result<Vec<usize>> {
    let ev = &reference.eigenvalues;
    let tol = reference
        .error_estimate
        .iter()
        .fold(default_gap_tol(ev), |t, e| t.max(2.0 * e));
    let mut flagged = Vec::new();
    for &k in k_indices {
        if delta(ev, k)? <= tol {
            flagged.push(k);
        }
    }
    Ok(flagged)
}

fn delta(ev: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > ev.len() {
        return Err(Error::IndexOutOfRange {
            k,
            available: ev.len(),
        });
    }
    let lower = if k > 1 {
        ev[k - 1] - ev[k - 2]
    } else {
        f64::INFINITY
    };
    let upper = if k < ev.len() {
        ev[k] - ev[k - 1]
    } else {
        f64::INFINITY
    };
    Ok(lower.min(upper) / 3.0)
}

/// `σ²_ij = ∫_D φ_i² φ_j² V`, by the midpoint rule on the reference's fine
/// lattice with cell weight `fine_eps^d`.
pub fn predicted_covariance(
    reference: &ContinuumReference,
    v: &Profile,
    k_indices: &[usize],
) -> Result<Vec<Vec<f64>>> {
    if let Some(&k) = non_simple_indices(reference, k_indices)?.first() {
        return Err(Error::DegenerateEigenvalue {
            k,
            delta: delta(&reference.eigenvalues, k)?,
        });
    }
    let lattice = reference.fine_lattice()?;
    let weight = lattice.cell_volume();
    let vv = sample_profile(|y| v.eval(y), &lattice);
    let squares = k_indices
        .iter()
        .map(|&k| {
            Ok(reference
                .node_values(k, &lattice)?
                .into_iter()
                .map(|p| p * p)
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(gram(&squares, &vv, weight))
}

fn gram(squares: &[Vec<f64>], v: &[f64], weight: f64) -> Vec<Vec<f64>> {
    let m = squares.len();
    let mut out = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let s: f64 = squares[i]
                .iter()
                .zip(&squares[j])
                .zip(v)
                .map(|((a, b), w)| a * b * w)
                .sum();
            out[i][j] = weight * s;
            out[j][i] = weight * s;
        }
    }
    out
}

/// `eps^{-d} Σ_x g_i(x)² g_j(x)² V(eps x)` from unit lattice eigenvectors.
pub fn discrete_covariance(
    lattice: &LatticeDomain,
    spectrum: &SpectrumResult,
    v: &Profile,
    k_indices: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let vv = sample_profile(|y| v.eval(y), lattice);
    let squares = k_indices
        .iter()
        .map(|&k| {
            let g = spectrum
                .eigenvectors
                .get(k.wrapping_sub(1))
                .ok_or(Error::IndexOutOfRange {
                    k,
                    available: spectrum.len(),
                })?;
            if g.len() != lattice.len() {
                return Err(Error::LatticeMismatch {
                    expected: lattice.len(),
                    found: g.len(),
                });
            }
            Ok(g.iter().map(|x| x * x).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(gram(&squares, &vv, 1.0 / lattice.cell_volume()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub eps: f64,
    pub dim: usize,
    /// Indices actually analysed.
    pub k_indices: Vec<usize>,
    /// Requested indices dropped because the continuum eigenvalue is not simple.
    pub excluded: Vec<usize>,
    pub n: usize,
    /// `X` per analysed index, in sample order.
    pub fluctuations: Vec<Vec<f64>>,
    pub empirical: Vec<Vec<f64>>,
    pub predicted: Vec<Vec<f64>>,
    /// `None` when fewer than 100 samples or a non-positive prediction.
    pub normality: Vec<Option<NormalityReport>>,
    /// Standard error of the centring mean, on the `X` scale.
    pub centering_se: Vec<f64>,
}

/// Rescaled fluctuations at `eps` compared against the Gaussian limit with
/// covariance [`predicted_covariance`].
pub fn clt_report(
    result: &EnsembleResult,
    eps: f64,
    reference: &ContinuumReference,
    v: &Profile,
) -> Result<CltReport> {
    if result.records.iter().any(|r| r.log_weight != 0.0) {
        return Err(Error::InvalidParameter(
            "fluctuation statistics need unweighted samples".into(),
        ));
    }
    let excluded = non_simple_indices(reference, &result.k_indices)?;
    for k in &excluded {
        log::warn!("excluding index {k}: continuum eigenvalue is not simple");
    }
    let k_indices: Vec<usize> = result
        .k_indices
        .iter()
        .copied()
        .filter(|k| !excluded.contains(k))
        .collect();
    if k_indices.is_empty() {
        return Err(Error::Degenerate(
            "every requested eigenvalue is degenerate".into(),
        ));
    }
    let s = scale(eps, result.dim);
    let mut fluctuations = Vec::new();
    let mut centering_se = Vec::new();
    for &k in &k_indices {
        fluctuations.push(rescaled_fluctuations(result, eps, k)?);
        centering_se.push(standard_error(&result.series(eps, k)?.1) / s);
    }
    let empirical = empirical_covariance(&fluctuations)?;
    let predicted = predicted_covariance(reference, v, &k_indices)?;
    let normality = fluctuations
        .iter()
        .enumerate()
        .map(|(i, x)| normality_tests(x, predicted[i][i]).ok())
        .collect();
    Ok(CltReport {
        eps,
        dim: result.dim,
        n: fluctuations[0].len(),
        k_indices,
        excluded,
        fluctuations,
        empirical,
        predicted,
        normality,
        centering_se,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub k: usize,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub continuum: f64,
    pub abs_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub reference_analytic: bool,
    pub reference_error: Vec<f64>,
    /// Per requested index: `|median − λ_D|` shrinks at every step of the ladder.
    pub shrinking: Vec<(usize, bool)>,
}

/// One row per `(eps, k)`: raw-eigenvalue median and quartiles next to the
/// continuum eigenvalue.
pub fn convergence_table(
    result: &EnsembleResult,
    reference: &ContinuumReference,
) -> Result<Vec<ConvergenceRow>> {
    let mut rows = Vec::new();
    for &eps in &result.eps_list {
        for &k in &result.k_indices {
            let (raw, _) = result.series(eps, k)?;
            if raw.is_empty() {
                return Err(Error::MissingRecords(format!(
                    "no usable samples at eps = {eps}"
                )));
            }
            let continuum = *reference
                .eigenvalues
                .get(k - 1)
                .ok_or(Error::IndexOutOfRange {
                    k,
                    available: reference.len(),
                })?;
            let s = sorted(&raw);
            let (q1, median, q3) = (
                quantile_sorted(&s, 0.25),
                quantile_sorted(&s, 0.5),
                quantile_sorted(&s, 0.75),
            );
            rows.push(ConvergenceRow {
                eps,
                k,
                n: s.len(),
                median,
                q1,
                q3,
                iqr: q3 - q1,
                continuum,
                abs_dev: (median - continuum).abs(),
            });
        }
    }
    Ok(rows)
}

pub fn convergence_experiment(
    config: &EnsembleConfig,
) -> Result<(EnsembleResult, ConvergenceReport)> {
    untilted(config)?;
    let result = run_ensemble(config)?;
    let reference = config.reference()?;
    let rows = convergence_table(&result, &reference)?;
    let shrinking = config
        .k_indices
        .iter()
        .map(|&k| {
            let devs: Vec<f64> = rows
                .iter()
                .filter(|r| r.k == k)
                .map(|r| r.abs_dev)
                .collect();
            (k, devs.windows(2).all(|w| w[1] < w[0]))
        })
        .collect();
    let report = ConvergenceReport {
        rows,
        reference_analytic: reference.analytic,
        reference_error: reference.error_estimate[..config.k_max()].to_vec(),
        shrinking,
    };
    Ok((result, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub eps: f64,
    pub sites: usize,
    pub n: usize,
    pub median_lambda1: f64,
    /// Fraction with `λ^{(1)} <= −eps^{-κ}/2`.
    pub frac_below_half: f64,
    /// Samples violating `λ^{(1)} <= 2d eps^{-2} + min ξ`.
    pub certificate_violations: usize,
    /// Fraction with `min ξ <= −eps^{-κ}`.
    pub frac_min_below: f64,
    /// `1 − (1 − eps^{κK})^{|D_eps|}`.
    pub exact_prob: f64,
    /// `1 − (1 − eps^{κK'})^{|D_eps|}`.
    pub kprime_bound: f64,
    pub binomial_se: f64,
    /// Observed fraction within 3 standard errors of the exact probability
    /// and not below the `K'` bound by more than that.
    pub fraction_consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub dim: usize,
    pub tail_index: f64,
    pub k_prime: f64,
    pub kappa: f64,
    pub rows: Vec<TailRow>,
    pub median_decreasing: bool,
    pub certificate_all: bool,
}

fn negative_pareto_index(config: &EnsembleConfig) -> Result<f64> {
    match config.model.family() {
        Family::NegativePareto { index } => {
            if config.model.mean_profile().is_some() || config.model.variance_profile().is_some() {
                return Err(Error::InvalidParameter(
                    "tail experiments use the raw one-sided Pareto law".into(),
                ));
            }
            Ok(index)
        }
        other => Err(Error::InvalidParameter(format!(
            "tail experiments need a one-sided Pareto law, got {other:?}"
        ))),
    }
}

fn first_index_position(result: &EnsembleResult) -> Result<usize> {
    result.k_position(1)
}

/// Divergence of the lowest eigenvalue for a one-sided Pareto potential with
/// tail index `K < d/2`. `k_prime` defaults to the midpoint of `(K, d/2)` and
/// `κ` to the midpoint of `(2, d/K')`.
pub fn heavy_tail_divergence(
    config: &EnsembleConfig,
    k_prime: Option<f64>,
) -> Result<(EnsembleResult, TailReport)> {
    let d = config.dim();
    if d < 3 {
        return Err(Error::InvalidParameter(format!(
            "heavy-tail divergence needs d >= 3, got {d}"
        )));
    }
    untilted(config)?;
    let tail_index = negative_pareto_index(config)?;
    let kp_window = tail_kprime_window(tail_index, d)?;
    let k_prime = match k_prime {
        Some(kp) => kp_window.check(kp)?,
        None => kp_window.midpoint(),
    };
    let kappa_win = tail_kappa_window(d, k_prime)?;
    let kappa = match config.kappa {
        Some(k) => kappa_win.check(k)?,
        None => kappa_win.midpoint(),
    };
    let mut run = config.clone();
    run.kappa = Some(kappa);
    let result = run_ensemble(&run)?;
    let pos = first_index_position(&result)?;
    let mut rows = Vec::new();
    for (i, &eps) in result.eps_list.iter().enumerate() {
        let sites = result.lattice_sizes[i];
        let recs: Vec<_> = result.records_at(eps)?.iter().filter(|r| r.ok()).collect();
        let n = recs.len();
        if n == 0 {
            return Err(Error::MissingRecords(format!(
                "no usable samples at eps = {eps}"
            )));
        }
        let nf = n as f64;
        let lambdas: Vec<f64> = recs.iter().map(|r| r.lambda_raw[pos]).collect();
        let level = eps.powf(-kappa);
        let kinetic = 2.0 * d as f64 / (eps * eps);
        let certificate_violations = recs
            .iter()
            .filter(|r| {
                let cert = kinetic + r.min_xi;
                r.lambda_raw[pos] > cert + 1e-12 * (kinetic + cert.abs())
            })
            .count();
        let frac_min_below = recs.iter().filter(|r| r.min_xi <= -level).count() as f64 / nf;
        let exact_prob = 1.0 - (1.0 - eps.powf(kappa * tail_index)).powi(sites as i32);
        let kprime_bound = 1.0 - (1.0 - eps.powf(kappa * k_prime)).powi(sites as i32);
        let binomial_se = (exact_prob * (1.0 - exact_prob) / nf).sqrt();
        let slack = 3.0 * binomial_se.max(0.5 / nf);
        rows.push(TailRow {
            eps,
            sites,
            n,
            median_lambda1: quantile_sorted(&sorted(&lambdas), 0.5),
            frac_below_half: lambdas.iter().filter(|&&l| l <= -level / 2.0).count() as f64 / nf,
            certificate_violations,
            frac_min_below,
            exact_prob,
            kprime_bound,
            binomial_se,
            fraction_consistent: (frac_min_below - exact_prob).abs() <= slack
                && frac_min_below >= kprime_bound - slack,
        });
    }
    let report = TailReport {
        dim: d,
        tail_index,
        k_prime,
        kappa,
        median_decreasing: rows
            .windows(2)
            .all(|w| w[1].median_lambda1 < w[0].median_lambda1),
        certificate_all: rows.iter().all(|r| r.certificate_violations == 0),
        rows,
    };
    Ok((result, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationGapRow {
    pub eps: f64,
    pub sites: usize,
    pub n: usize,
    pub mean_raw: f64,
    pub mean_trunc: f64,
    /// `mean_raw − mean_trunc`
    pub gap: f64,
    /// Standard error of the paired differences.
    pub gap_se: f64,
    /// Fraction of samples changed by truncation (weighted when tilted).
    pub frac_truncated: f64,
    /// `1 − (1 − ε^{κK})^N` for the one-sided Pareto law.
    pub exact_truncation_prob: Option<f64>,
    /// `(Σw)² / Σw²`; equals `n` without tilting.
    pub effective_samples: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationGapReport {
    pub dim: usize,
    pub tail_index: f64,
    pub kappa: f64,
    pub tilt: Option<TailTilt>,
    /// `−d + 2(K − 1)`, or `None` for light-tailed laws.
    pub predicted_exponent: Option<f64>,
    /// Slope of `log|gap|` against `log eps`; `None` if any gap is zero.
    pub fitted_slope: Option<f64>,
    /// `(|gap_last| − |gap_first|) / sqrt(se_first² + se_last²)`.
    pub growth_z: f64,
    /// Both end gaps negative and `growth_z` above the one-sided 95% point.
    pub growth_significant: bool,
    pub rows: Vec<TruncationGapRow>,
}

/// `−d + 2(K − 1)`
pub fn truncation_gap_exponent(d: usize, tail_index: f64) -> f64 {
    -(d as f64) + 2.0 * (tail_index - 1.0)
}

const Z_95_ONE_SIDED: f64 = 1.6448536269514722;

/// Mean shift of `λ^{(1)}` caused by truncating the potential. Pareto laws
/// must have `K ∈ (1 ∨ d/2, d/2 + 1)` and `d >= 3`; `κ` defaults to the
/// midpoint of the homogenization window.
pub fn truncation_mean_gap(
    config: &EnsembleConfig,
) -> Result<(EnsembleResult, TruncationGapReport)> {
    let d = config.dim();
    let tail_index = config.model.moment_index();
    let heavy = matches!(
        config.model.family(),
        Family::NegativePareto { .. } | Family::SymmetricPareto { .. }
    );
    if heavy {
        if d < 3 {
            return Err(Error::InvalidParameter(format!(
                "truncation gap needs d >= 3, got {d}"
            )));
        }
        truncation_gap_k_window(d)?.check(tail_index)?;
    }
    let kappa = match config.kappa {
        Some(k) => kappa_window(tail_index, d, KappaMode::Homogenization)?.check(k)?,
        None => choose_kappa(tail_index, d, KappaMode::Homogenization)?,
    };
    let mut run = config.clone();
    run.kappa = Some(kappa);
    let result = run_ensemble(&run)?;
    let pos = first_index_position(&result)?;
    let mut rows = Vec::new();
    for (i, &eps) in result.eps_list.iter().enumerate() {
        let recs: Vec<_> = result.records_at(eps)?.iter().filter(|r| r.ok()).collect();
        if recs.len() < 2 {
            return Err(Error::MissingRecords(format!(
                "{} usable samples at eps = {eps}, need 2",
                recs.len()
            )));
        }
        let w: Vec<f64> = recs.iter().map(|r| r.log_weight.exp()).collect();
        let weighted = |f: &dyn Fn(&SampleRecord) -> f64| -> Vec<f64> {
            recs.iter().zip(&w).map(|(r, w)| w * f(r)).collect()
        };
        let raw = weighted(&|r| r.lambda_raw[pos]);
        let trunc = weighted(&|r| r.lambda_trunc[pos]);
        let diff = weighted(&|r| r.lambda_raw[pos] - r.lambda_trunc[pos]);
        let hits = weighted(&|r| if r.truncation_hit { 1.0 } else { 0.0 });
        let sites = result.lattice_sizes[i];
        let exact_truncation_prob = match config.model.family() {
            Family::NegativePareto { index } if config.model.mean_profile().is_none() => {
                Some(1.0 - (1.0 - eps.powf(kappa * index)).powi(sites as i32))
            }
            _ => None,
        };
        rows.push(TruncationGapRow {
            eps,
            sites,
            n: recs.len(),
            mean_raw: mean(&raw),
            mean_trunc: mean(&trunc),
            gap: mean(&diff),
            gap_se: standard_error(&diff),
            frac_truncated: mean(&hits),
            exact_truncation_prob,
            effective_samples: w.iter().sum::<f64>().powi(2) / w.iter().map(|x| x * x).sum::<f64>(),
        });
    }
    let fitted_slope = if rows.len() >= 2 && rows.iter().all(|r| r.gap != 0.0) {
        let x: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.gap.abs().ln()).collect();
        Some(linear_fit(&x, &y).0)
    } else {
        None
    };
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let spread = (first.gap_se.powi(2) + last.gap_se.powi(2)).sqrt();
    let growth_z = if spread > 0.0 {
        (last.gap.abs() - first.gap.abs()) / spread
    } else {
        0.0
    };
    let report = TruncationGapReport {
        dim: d,
        tail_index,
        kappa,
        tilt: config.tilt,
        predicted_exponent: heavy.then(|| truncation_gap_exponent(d, tail_index)),
        fitted_slope,
        growth_z,
        growth_significant: rows.len() >= 2
            && first.gap < 0.0
            && last.gap < 0.0
            && growth_z > Z_95_ONE_SIDED,
        rows,
    };
    Ok((result, report))
}
