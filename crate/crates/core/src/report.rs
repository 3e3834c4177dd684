//! Human-readable tables and plot-ready TSV files for a finished run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::fluctuations::sorted;
use crate::io::{fmt_f64, read_json};
use crate::run::{Manifest, Summary};

/// A rectangular table rendered both as aligned text and as TSV.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_tsv(&self) -> String {
        let mut out = self.header.join("\t");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].len())
                    .chain([self.header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.header);
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

/// Short form for the text table.
fn short(x: f64) -> String {
    if x == 0.0 || (1e-3..1e6).contains(&x.abs()) {
        format!("{x:.6}")
    } else {
        format!("{x:.6e}")
    }
}

fn cells(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| fmt_f64(v)).collect()
}

/// What `report` produced.
#[derive(Debug, Clone)]
pub struct ReportOutput {
    pub text: String,
    pub files: Vec<PathBuf>,
}

/// Reads `manifest.json` and `summary.json` from `run_dir`, writes
/// `report.tsv` (plus `qq_e<i>_k<k>.tsv` and `covariance.tsv` for CLT runs)
/// and returns the text rendering.
pub fn report(run_dir: &Path) -> Result<ReportOutput> {
    let manifest_path = run_dir.join("manifest.json");
    if !manifest_path.is_file() {
        return Err(Error::MissingRecords(format!(
            "{} has no manifest.json",
            run_dir.display()
        )));
    }
    let manifest: Manifest = read_json(&manifest_path)?;
    let summary: Summary = read_json(&run_dir.join("summary.json"))?;
    let mut text = format!(
        "{} run ({}), config sha256 {}, {:.1} s\n\n",
        manifest.experiment.name(),
        manifest.code_version,
        &manifest.config_sha256[..12.min(manifest.config_sha256.len())],
        manifest.wall_time_seconds
    );
    let mut files = Vec::new();
    let (table, display, notes) = tables(&summary, run_dir, &mut files)?;
    text.push_str(&display.to_text());
    text.push_str(&notes);
    let path = run_dir.join("report.tsv");
    fs::write(&path, table.to_tsv())?;
    files.insert(0, path);
    Ok(ReportOutput { text, files })
}

/// Full-precision table, display table with short numbers, trailing notes.
fn tables(
    summary: &Summary,
    dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<(Table, Table, String)> {
    let mut notes = String::new();
    let table = match summary {
        Summary::Converge(r) => {
            let mut t = Table::new(&[
                "eps",
                "k",
                "n",
                "median",
                "q1",
                "q3",
                "iqr",
                "continuum",
                "abs_dev",
            ]);
            for row in &r.rows {
                let mut c = vec![fmt_f64(row.eps), row.k.to_string(), row.n.to_string()];
                c.extend(cells(&[
                    row.median,
                    row.q1,
                    row.q3,
                    row.iqr,
                    row.continuum,
                    row.abs_dev,
                ]));
                t.push(c);
            }
            for (k, shrinking) in &r.shrinking {
                writeln!(
                    notes,
                    "k = {k}: |median - continuum| shrinking down the ladder: {shrinking}"
                )
                .unwrap();
            }
            t
        }
        Summary::Clt(s) => {
            let mut t = Table::new(&[
                "eps",
                "k",
                "n",
                "var_empirical",
                "var_predicted",
                "rel_dev",
                "ks_stat",
                "ks_p",
                "skewness",
                "excess_kurtosis",
                "centering_se",
            ]);
            let mut cov = Table::new(&["eps", "k_i", "k_j", "empirical", "predicted"]);
            for (e, rep) in s.reports.iter().enumerate() {
                for (i, &k) in rep.k_indices.iter().enumerate() {
                    let (emp, pred) = (rep.empirical[i][i], rep.predicted[i][i]);
                    let mut c = vec![fmt_f64(rep.eps), k.to_string(), rep.n.to_string()];
                    c.extend(cells(&[emp, pred, (emp - pred) / pred]));
                    match &rep.normality[i] {
                        Some(nr) => c.extend(cells(&[
                            nr.ks_stat,
                            nr.ks_p,
                            nr.skewness,
                            nr.excess_kurtosis,
                        ])),
                        None => c.extend(std::iter::repeat_n(String::new(), 4)),
                    }
                    c.push(fmt_f64(rep.centering_se[i]));
                    t.push(c);
                    for (j, &kj) in rep.k_indices.iter().enumerate().skip(i) {
                        cov.push(vec![
                            fmt_f64(rep.eps),
                            k.to_string(),
                            kj.to_string(),
                            fmt_f64(rep.empirical[i][j]),
                            fmt_f64(rep.predicted[i][j]),
                        ]);
                    }
                    let path = dir.join(format!("qq_e{e}_k{k}.tsv"));
                    fs::write(&path, qq_table(&rep.fluctuations[i], pred)?.to_tsv())?;
                    files.push(path);
                }
                if !rep.excluded.is_empty() {
                    writeln!(
                        notes,
                        "eps = {}: excluded non-simple indices {:?}",
                        rep.eps, rep.excluded
                    )
                    .unwrap();
                }
            }
            let path = dir.join("covariance.tsv");
            fs::write(&path, cov.to_tsv())?;
            files.push(path);
            t
        }
        Summary::DerivativeCheck(s) => {
            let mut t = Table::new(&["eps", "draw", "seed", "checks", "max_rel_err"]);
            for d in &s.draws {
                let worst = d.checks.iter().map(|c| c.rel_err).fold(0.0, f64::max);
                t.push(vec![
                    fmt_f64(d.eps),
                    d.draw.to_string(),
                    d.seed.to_string(),
                    d.checks.len().to_string(),
                    fmt_f64(worst),
                ]);
            }
            writeln!(
                notes,
                "max rel_err {} (tolerance {}): {}",
                short(s.max_rel_err),
                short(s.fd_tol),
                pass(s.passed)
            )
            .unwrap();
            t
        }
        Summary::GreenCheck(s) => {
            let mut t = Table::new(&[
                "eps",
                "draw",
                "seed",
                "checks",
                "max_green_rel_diff",
                "max_second_variation_rel_err",
            ]);
            for (g, sv) in s.green.iter().zip(&s.second_variation) {
                let green = g
                    .checks
                    .iter()
                    .map(|c| (c.value - c.solve_value).abs() / c.value.abs().max(1e-14))
                    .fold(0.0, f64::max);
                let second = sv.checks.iter().map(|c| c.rel_err).fold(0.0, f64::max);
                t.push(vec![
                    fmt_f64(g.eps),
                    g.draw.to_string(),
                    g.seed.to_string(),
                    g.checks.len().to_string(),
                    fmt_f64(green),
                    fmt_f64(second),
                ]);
            }
            writeln!(
                notes,
                "Green kernel agreement {} (tolerance {}), second variation {} (tolerance {}): {}",
                short(s.max_green_rel_diff),
                short(s.green_tol),
                short(s.max_second_variation_rel_err),
                short(s.second_variation_tol),
                pass(s.passed)
            )
            .unwrap();
            t
        }
        Summary::TailDivergence(r) => {
            let mut t = Table::new(&[
                "eps",
                "sites",
                "n",
                "median_lambda1",
                "frac_below_half",
                "certificate_violations",
                "frac_min_below",
                "exact_prob",
                "kprime_bound",
                "binomial_se",
            ]);
            for row in &r.rows {
                let mut c = vec![fmt_f64(row.eps), row.sites.to_string(), row.n.to_string()];
                c.extend(cells(&[row.median_lambda1, row.frac_below_half]));
                c.push(row.certificate_violations.to_string());
                c.extend(cells(&[
                    row.frac_min_below,
                    row.exact_prob,
                    row.kprime_bound,
                    row.binomial_se,
                ]));
                t.push(c);
            }
            writeln!(
                notes,
                "K = {}, K' = {}, kappa = {}; median strictly decreasing: {}; certificate on every sample: {}",
                r.tail_index, short(r.k_prime), short(r.kappa), r.median_decreasing, r.certificate_all
            )
            .unwrap();
            t
        }
        Summary::TruncationGap(r) => {
            let mut t = Table::new(&[
                "eps",
                "sites",
                "n",
                "mean_raw",
                "mean_trunc",
                "gap",
                "gap_se",
                "frac_truncated",
                "exact_truncation_prob",
                "effective_samples",
            ]);
            for row in &r.rows {
                let mut c = vec![fmt_f64(row.eps), row.sites.to_string(), row.n.to_string()];
                c.extend(cells(&[
                    row.mean_raw,
                    row.mean_trunc,
                    row.gap,
                    row.gap_se,
                    row.frac_truncated,
                ]));
                c.push(row.exact_truncation_prob.map_or(String::new(), fmt_f64));
                c.push(fmt_f64(row.effective_samples));
                t.push(c);
            }
            let fmt_opt = |x: Option<f64>| x.map_or("n/a".to_string(), short);
            if let Some(tilt) = r.tilt {
                writeln!(
                    notes,
                    "importance sampling: {} expected hits, proposal index {}",
                    short(tilt.expected_hits),
                    short(tilt.proposal_index)
                )
                .unwrap();
            }
            writeln!(
                notes,
                "fitted slope {} vs predicted exponent {}; growth z = {}, significant: {}",
                fmt_opt(r.fitted_slope),
                fmt_opt(r.predicted_exponent),
                short(r.growth_z),
                r.growth_significant
            )
            .unwrap();
            t
        }
        Summary::Diagnostics(s) => {
            let mut t = Table::new(&[
                "eps",
                "sites",
                "n",
                "frac_in_E",
                "frac_in_F",
                "frac_truncated",
                "median_projection",
                "median_xi_r_norm",
                "median_blocked_norm",
                "block_len",
                "moment_bound",
            ]);
            for l in &s.levels {
                let mut c = vec![fmt_f64(l.eps), l.sites.to_string(), l.n.to_string()];
                c.extend(cells(&[
                    l.frac_in_e,
                    l.frac_in_f,
                    l.frac_truncated,
                    l.median_projection_stats,
                    l.median_xi_r_norm,
                    l.median_blocked_norm,
                ]));
                c.push(l.block_len.to_string());
                c.push(fmt_f64(l.moment_bound));
                t.push(c);
            }
            let p = &s.event_params;
            writeln!(
                notes,
                "kappa = {}, r = {}, rho = {}, gamma = {}; non-simple continuum indices: {:?}",
                short(p.kappa),
                short(p.r),
                short(p.rho),
                short(p.gamma),
                s.flagged_indices
            )
            .unwrap();
            t
        }
    };
    let display = Table {
        header: table.header.clone(),
        rows: table
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| {
                        c.parse::<f64>()
                            .ok()
                            .filter(|_| c.contains('e'))
                            .map_or(c.clone(), short)
                    })
                    .collect()
            })
            .collect(),
    };
    Ok((table, display, notes))
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Sorted sample against `N(0, sigma2)` quantiles at `(i − 1/2)/n`.
pub fn qq_table(x: &[f64], sigma2: f64) -> Result<Table> {
    let law = Normal::new(0.0, sigma2.max(0.0).sqrt().max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let n = x.len() as f64;
    let mut t = Table::new(&["x", "normal_quantile"]);
    for (i, v) in sorted(x).into_iter().enumerate() {
        t.push(vec![
            fmt_f64(v),
            fmt_f64(law.inverse_cdf((i as f64 + 0.5) / n)),
        ]);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_renderings() {
        let mut t = Table::new(&["a", "bb"]);
        t.push(vec!["1".into(), "22222".into()]);
        assert_eq!(t.to_tsv(), "a\tbb\n1\t22222\n");
        assert_eq!(t.to_text(), "a     bb\n1  22222\n");
    }

    #[test]
    fn qq_pairs_are_sorted_and_symmetric() {
        let t = qq_table(&[0.3, -1.0, 2.0, 0.0], 4.0).unwrap();
        assert_eq!(t.rows.len(), 4);
        let q: Vec<f64> = t.rows.iter().map(|r| r[1].parse().unwrap()).collect();
        let x: Vec<f64> = t.rows.iter().map(|r| r[0].parse().unwrap()).collect();
        assert_eq!(x, vec![-1.0, 0.0, 0.3, 2.0]);
        assert!((q[0] + q[3]).abs() < 1e-12 && (q[1] + q[2]).abs() < 1e-12);
        // 2 × Φ^{-1}(7/8)
        assert!((q[3] - 2.0 * 1.1503493803760079).abs() < 1e-9);
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(report(dir.path()), Err(Error::MissingRecords(_))));
        fs::write(dir.path().join("manifest.json"), "{ not json").unwrap();
        assert!(matches!(report(dir.path()), Err(Error::Json(_))));
    }
}
