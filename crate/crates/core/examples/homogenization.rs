//! Medians of the two lowest eigenvalues with a uniform potential approach
//! pi^2 and 4 pi^2 as the lattice is refined.

use anderson_core::prelude::*;

fn main() -> Result<()> {
    let model = PotentialModel::raw(Family::Uniform { half_width: 1.0 })?;
    let config = EnsembleConfig::new(
        ContinuumDomain::unit_box(1)?,
        model,
        vec![1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0],
        vec![1, 2],
        40,
    );
    let (_, report) = convergence_experiment(&config)?;
    println!(
        "{:>10} {:>3} {:>12} {:>10} {:>10}",
        "eps", "k", "median", "iqr", "|dev|"
    );
    for row in &report.rows {
        println!(
            "{:>10.6} {:>3} {:>12.6} {:>10.6} {:>10.6}",
            row.eps, row.k, row.median, row.iqr, row.abs_dev
        );
    }
    println!("closed-form reference: {}", report.reference_analytic);
    for (k, shrinking) in &report.shrinking {
        println!("k = {k}: deviation shrinking along the ladder: {shrinking}");
    }
    Ok(())
}
