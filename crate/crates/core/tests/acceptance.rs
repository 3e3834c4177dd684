//! The acceptance suite. Each test prints one `PASS`/`FAIL` line to stderr
//! (bypassing the test harness capture) and then asserts the verdict.

use std::f64::consts::PI;
use std::io::Write;

use anderson_core::config::RunConfig;
use anderson_core::eigensolve::{
    continuum_reference, kyfan_sum, lowest_k_with, rayleigh_sum, SolverOptions, SolverPath,
};
use anderson_core::fluctuations::{normality_tests, predicted_covariance};
use anderson_core::io::RecordRow;
use anderson_core::lattice::{discretize, ContinuumDomain, Profile};
use anderson_core::operator::assemble;
use anderson_core::potential::{sample_potential, Family, PotentialModel};
use anderson_core::run::{execute, Execution, Summary};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn verdict(n: u32, name: &str, pass: bool, detail: String) {
    let line = format!(
        "criterion {n} {name}: {} ({detail})\n",
        if pass { "PASS" } else { "FAIL" }
    );
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

fn execute_config(text: &str) -> Execution {
    execute(&RunConfig::from_toml_str(text).unwrap()).unwrap()
}

fn lambdas(rows: &[RecordRow], k: usize) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.k == k)
        .map(|r| r.lambda_raw)
        .collect()
}

#[test]
fn criterion_1_homogenization() {
    let ex = execute_config(include_str!("../configs/homogenization.toml"));
    let l1 = lambdas(&ex.rows, 1);
    let l2 = lambdas(&ex.rows, 2);
    let dev1 = l1.iter().map(|l| (l - PI * PI).abs()).fold(0.0, f64::max);
    let dev2 = l2
        .iter()
        .map(|l| (l - 4.0 * PI * PI).abs())
        .fold(0.0, f64::max);
    verdict(
        1,
        "homogenization",
        l1.len() == 20 && l2.len() == 20 && dev1 <= 0.3 && dev2 <= 1.0,
        format!(
            "{} seeds, max |l1 - pi^2| = {dev1:.4} <= 0.3, max |l2 - 4pi^2| = {dev2:.4} <= 1.0",
            l1.len()
        ),
    );
}

fn clt_run() -> anderson_core::run::CltSummary {
    let ex = execute_config(include_str!("../configs/clt_interval.toml"));
    match ex.summary {
        Summary::Clt(s) => s,
        other => panic!("unexpected summary {other:?}"),
    }
}

#[test]
fn criterion_2_clt_variance() {
    let s = clt_run();
    let r = &s.reports[0];
    assert_eq!(r.k_indices, vec![1, 2]);
    // 4 ∫_0^1 sin^4(πy) dy · V = (3/2)(1/3)
    let sigma2 = 0.5;
    let var = r.empirical[0][0];
    let norm = normality_tests(&r.fluctuations[0], sigma2).unwrap();
    let pass = r.n == 2000
        && s.failures == 0
        && (var - sigma2).abs() <= 0.15 * sigma2
        && norm.ks_p > 0.01
        && norm.skewness.abs() <= 0.15
        && norm.excess_kurtosis.abs() <= 0.3;
    verdict(
        2,
        "clt variance",
        pass,
        format!(
            "n = {}, var = {var:.4} vs 0.5 (quadrature {:.4}), KS p = {:.3}, skew = {:.3}, excess kurtosis = {:.3}",
            r.n, r.predicted[0][0], norm.ks_p, norm.skewness, norm.excess_kurtosis
        ),
    );
}

#[test]
fn criterion_3_cross_covariance() {
    let s = clt_run();
    let r = &s.reports[0];
    // 4 ∫_0^1 sin^2(πy) sin^2(2πy) dy · V = 1 · (1/3)
    let target = 1.0 / 3.0;
    let cov = r.empirical[0][1];
    verdict(
        3,
        "cross-covariance",
        (cov - target).abs() <= 0.2 * target,
        format!(
            "cov12 = {cov:.4} vs 1/3 (quadrature {:.4})",
            r.predicted[0][1]
        ),
    );
}

#[test]
fn criterion_4_hadamard_first_variation() {
    let ex = execute_config(include_str!("../configs/derivative_check.toml"));
    let Summary::DerivativeCheck(s) = ex.summary else {
        panic!("unexpected summary")
    };
    let checks: usize = s.draws.iter().map(|d| d.checks.len()).sum();
    let ks: std::collections::BTreeSet<usize> = s
        .draws
        .iter()
        .flat_map(|d| d.checks.iter().map(|c| c.k))
        .collect();
    let pass = ex.lattice_sizes == vec![20]
        && s.draws.len() == 10
        && checks == 10 * 20 * 3
        && ks.into_iter().collect::<Vec<_>>() == vec![1, 2, 3]
        && s.step == 1e-4
        && s.max_rel_err <= 1e-6;
    verdict(
        4,
        "hadamard first variation",
        pass,
        format!(
            "{} draws x {} sites x k=1..3, max rel err = {:.3e} <= 1e-6",
            s.draws.len(),
            ex.lattice_sizes[0],
            s.max_rel_err
        ),
    );
}

#[test]
fn criterion_5_second_variation() {
    let ex = execute_config(include_str!("../configs/green_check.toml"));
    let Summary::GreenCheck(s) = ex.summary else {
        panic!("unexpected summary")
    };
    let checks: usize = s.second_variation.iter().map(|d| d.checks.len()).sum();
    let pass = ex.lattice_sizes == vec![10]
        && s.segment == 0.5
        && s.n_quad == 64
        && checks > 0
        && s.max_second_variation_rel_err <= 1e-4;
    verdict(
        5,
        "second variation identity",
        pass,
        format!(
            "{checks} checks on {} sites, max rel err = {:.3e} <= 1e-4",
            ex.lattice_sizes[0], s.max_second_variation_rel_err
        ),
    );
}

fn orthonormal_frame(columns: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = columns[0].len();
    let m = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    let q = m.qr().q();
    (0..columns.len())
        .map(|j| q.column(j).iter().copied().collect())
        .collect()
}

#[test]
fn criterion_6_ky_fan() {
    let lattice = discretize(&ContinuumDomain::new_box(vec![(0.0, 53.0)]).unwrap(), 1.0).unwrap();
    assert_eq!(lattice.len(), 50);
    let model = PotentialModel::raw(Family::Uniform { half_width: 1.0 }).unwrap();
    let h = assemble(&lattice, &sample_potential(&model, &lattice, 606).unwrap()).unwrap();
    let spectrum = lowest_k_with(
        &h,
        3,
        &SolverOptions::default().with_path(SolverPath::Dense),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::INFINITY;
    for draw in 0..100 {
        for k in 1..=3 {
            // half the frames are small perturbations of the optimum
            let noise = if draw % 2 == 0 { 1.0 } else { 1e-4 };
            let columns = (0..k)
                .map(|j| {
                    (0..50)
                        .map(|i| {
                            let base = if draw % 2 == 0 {
                                0.0
                            } else {
                                spectrum.eigenvectors[j][i]
                            };
                            base + noise * rng.sample::<f64, _>(StandardNormal)
                        })
                        .collect()
                })
                .collect();
            let frame = orthonormal_frame(columns);
            let excess = rayleigh_sum(&h, &frame).unwrap() - kyfan_sum(&spectrum, k).unwrap();
            worst = worst.min(excess);
        }
    }
    verdict(
        6,
        "ky fan principle",
        worst >= -1e-9,
        format!("100 frames x k=1..3, min (sum - Lambda_k) = {worst:.3e} >= -1e-9"),
    );
}

#[test]
fn criterion_7_heavy_tail_divergence() {
    let ex = execute_config(include_str!("../configs/tail_divergence.toml"));
    let Summary::TailDivergence(r) = ex.summary else {
        panic!("unexpected summary")
    };
    let medians: Vec<String> = r
        .rows
        .iter()
        .map(|row| format!("{:.1}", row.median_lambda1))
        .collect();
    let violations: usize = r.rows.iter().map(|row| row.certificate_violations).sum();
    let pass = r.rows.len() == 3
        && r.rows
            .iter()
            .all(|row| row.n == 200 && row.sites <= 16 * 16 * 16)
        && r.median_decreasing
        && r.certificate_all;
    verdict(
        7,
        "heavy-tail divergence",
        pass,
        format!(
            "medians {} at sites {:?}, certificate violations {violations}",
            medians.join(" > "),
            ex.lattice_sizes
        ),
    );
}

#[test]
fn criterion_8_truncation_gap() {
    let ex = execute_config(include_str!("../configs/truncation_gap.toml"));
    let Summary::TruncationGap(r) = ex.summary else {
        panic!("unexpected summary")
    };
    let (first, last) = (&r.rows[0], &r.rows[r.rows.len() - 1]);
    let pass = first.eps == 0.125
        && last.eps == 0.0625
        && r.rows.iter().all(|row| row.n == 2000)
        && first.gap < 0.0
        && last.gap < 0.0
        && r.growth_significant;
    verdict(
        8,
        "truncation gap",
        pass,
        format!(
            "gap {:.4} +- {:.4} at 1/8, {:.4} +- {:.4} at 1/16, growth z = {:.2} > 1.645; slope {:.3} vs predicted {}",
            first.gap,
            first.gap_se,
            last.gap,
            last.gap_se,
            r.growth_z,
            r.fitted_slope.unwrap_or(f64::NAN),
            r.predicted_exponent.unwrap_or(f64::NAN)
        ),
    );
}

fn random_instance(rng: &mut ChaCha8Rng) -> (ContinuumDomain, f64) {
    loop {
        let d = rng.random_range(1..=3usize);
        let intervals: Vec<(f64, f64)> = (0..d)
            .map(|_| {
                let a = rng.random_range(-1.0..1.0);
                (a, a + rng.random_range(0.5..2.0))
            })
            .collect();
        let domain = ContinuumDomain::new_box(intervals).unwrap();
        let eps = rng.random_range(0.004..0.25);
        if let Ok(lattice) = discretize(&domain, eps) {
            if (6..=500).contains(&lattice.len()) {
                return (domain, eps);
            }
        }
    }
}

#[test]
fn criterion_9_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut largest = 0;
    for instance in 0..50u64 {
        let (domain, eps) = random_instance(&mut rng);
        let lattice = discretize(&domain, eps).unwrap();
        let family = if rng.random::<bool>() {
            Family::Gaussian
        } else {
            Family::Uniform {
                half_width: rng.random_range(0.5..3.0),
            }
        };
        let model = PotentialModel::raw(family).unwrap();
        let h = assemble(
            &lattice,
            &sample_potential(&model, &lattice, instance).unwrap(),
        )
        .unwrap();
        let k = 5.min(h.dim());
        let solve = |path| lowest_k_with(&h, k, &SolverOptions::default().with_path(path)).unwrap();
        let dense = solve(SolverPath::Dense);
        let iterative = solve(SolverPath::Lanczos);
        for (a, b) in iterative.eigenvalues.iter().zip(&dense.eigenvalues) {
            worst = worst.max((a - b).abs() / b.abs());
        }
        largest = largest.max(h.dim());
    }
    let reference = continuum_reference(
        &ContinuumDomain::unit_box(1).unwrap(),
        &Profile::Constant(0.0),
        2,
        1.0 / 1024.0,
    )
    .unwrap();
    let sigma11 = predicted_covariance(&reference, &Profile::Constant(1.0), &[1]).unwrap()[0][0];
    verdict(
        9,
        "oracle equivalence",
        worst <= 1e-8 && (sigma11 - 1.5).abs() <= 0.01,
        format!(
            "50 instances up to dim {largest}, max rel diff = {worst:.3e} <= 1e-8; sigma11 quadrature = {sigma11:.6} vs 1.5"
        ),
    );
}
