use anderson_core::fluctuations::{run_ensemble, truncation_mean_gap, EnsembleConfig};
use anderson_core::lattice::{discretize, ContinuumDomain};
use anderson_core::potential::{sample_potential, Family, KappaMode, PotentialModel, TailTilt};

fn gap_config(n: usize, seed: u64) -> EnsembleConfig {
    let mut config = EnsembleConfig::new(
        ContinuumDomain::unit_box(3).unwrap(),
        PotentialModel::raw(Family::NegativePareto { index: 2.0 }).unwrap(),
        vec![1.0 / 6.0, 1.0 / 7.0],
        vec![1],
        n,
    );
    config.base_seed = seed;
    config
}

#[test]
fn tilted_gap_agrees_with_plain_monte_carlo() {
    let (_, plain) = truncation_mean_gap(&gap_config(20_000, 71)).unwrap();
    let mut tilted = gap_config(2_000, 72);
    tilted.tilt = Some(TailTilt::with_default_index(1.0, 2.0));
    let (_, weighted) = truncation_mean_gap(&tilted).unwrap();
    assert_eq!(plain.kappa, weighted.kappa);
    for (a, b) in plain.rows.iter().zip(&weighted.rows) {
        let spread = (a.gap_se.powi(2) + b.gap_se.powi(2)).sqrt();
        assert!(
            (a.gap - b.gap).abs() <= 4.0 * spread,
            "eps {}: plain {} ± {}, tilted {} ± {}",
            a.eps,
            a.gap,
            a.gap_se,
            b.gap,
            b.gap_se
        );
        assert!(b.gap < 0.0 && b.gap_se < a.gap_se);
        // the weighted hit indicator estimates the exact truncation probability
        let q = b.exact_truncation_prob.unwrap();
        assert!(
            (b.frac_truncated - q).abs() <= 0.15 * q,
            "{} vs {q}",
            b.frac_truncated
        );
        assert!(b.effective_samples > 200.0 && b.effective_samples <= 2000.0);
        assert_eq!(a.effective_samples, a.n as f64);
    }
}

#[test]
fn tilted_records_are_worker_independent() {
    let mut config = gap_config(40, 73);
    config.tilt = Some(TailTilt::with_default_index(1.5, 2.0));
    config.kappa_mode = KappaMode::Homogenization;
    config.workers = Some(1);
    let one = run_ensemble(&config).unwrap();
    config.workers = Some(3);
    let three = run_ensemble(&config).unwrap();
    assert_eq!(one, three);
    assert!(one.records.iter().any(|r| r.truncation_hit));
    assert!(one.records.iter().all(|r| r.log_weight.is_finite()));
}

#[test]
fn tilting_is_rejected_outside_the_truncation_gap() {
    use anderson_core::fluctuations::heavy_tail_divergence;
    let mut config = EnsembleConfig::new(
        ContinuumDomain::unit_box(3).unwrap(),
        PotentialModel::raw(Family::NegativePareto { index: 1.0 }).unwrap(),
        vec![0.2],
        vec![1],
        4,
    );
    config.tilt = Some(TailTilt::with_default_index(1.0, 1.0));
    assert!(heavy_tail_divergence(&config, None).is_err());
    config.events = true;
    assert!(run_ensemble(&config).is_err());
}

#[test]
fn pareto_exceedance_rate_matches_the_law() {
    // one-sided Pareto K = 1 at the tail experiment's level eps^{-kappa},
    // eps = 1/8, kappa = 2.2: P(xi <= -level) = 8^{-2.2}
    let lattice = discretize(&ContinuumDomain::unit_box(3).unwrap(), 0.125).unwrap();
    let model = PotentialModel::raw(Family::NegativePareto { index: 1.0 }).unwrap();
    let level = 8f64.powf(2.2);
    let p = 1.0 / level;
    let draws = 4000;
    let (mut sites, mut samples) = (0usize, 0usize);
    for seed in 0..draws {
        let xi = sample_potential(&model, &lattice, 9_000 + seed).unwrap();
        let hits = xi.values.iter().filter(|&&v| v <= -level).count();
        sites += hits;
        samples += usize::from(hits > 0);
    }
    let n = (draws as usize * lattice.len()) as f64;
    let site_se = (p * (1.0 - p) / n).sqrt();
    assert!((sites as f64 / n - p).abs() <= 4.0 * site_se);
    let q = 1.0 - (1.0 - p).powi(lattice.len() as i32);
    let sample_se = (q * (1.0 - q) / draws as f64).sqrt();
    assert!((samples as f64 / draws as f64 - q).abs() <= 4.0 * sample_se);
}
