//! Gaussian fluctuations of the two lowest eigenvalues on the unit interval
//! with a position-dependent variance profile.

use anderson_core::prelude::*;

fn main() -> Result<()> {
    let v = Profile::Affine {
        offset: 0.2,
        gradient: vec![0.4],
    };
    let model = PotentialModel::new(Family::Gaussian, None, Some(v.clone()))?;
    let eps = 1.0 / 256.0;
    let mut config = EnsembleConfig::new(
        ContinuumDomain::unit_box(1)?,
        model,
        vec![eps],
        vec![1, 2],
        600,
    );
    config.base_seed = 17;
    let result = run_ensemble(&config)?;
    let reference = config.reference()?;
    let report = clt_report(&result, eps, &reference, &v)?;

    println!("n = {}, eps = {eps}", report.n);
    for (i, k) in report.k_indices.iter().enumerate() {
        for (j, l) in report.k_indices.iter().enumerate().skip(i) {
            println!(
                "cov({k},{l}): empirical {:.4}  predicted {:.4}",
                report.empirical[i][j], report.predicted[i][j]
            );
        }
        if let Some(n) = &report.normality[i] {
            println!(
                "k = {k}: KS p = {:.3}, skewness {:.3}, excess kurtosis {:.3}",
                n.ks_p, n.skewness, n.excess_kurtosis
            );
        }
    }
    Ok(())
}
