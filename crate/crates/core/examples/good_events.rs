//! Statistics behind the good events E and F for a Gaussian potential with a
//! mean profile, evaluated on a few samples.

use anderson_core::potential::{choose_rho, Eigenfunction, EventParams};
use anderson_core::prelude::*;

fn main() -> Result<()> {
    let domain = ContinuumDomain::unit_box(2)?;
    let u = Profile::Constant(1.5);
    let model = PotentialModel::new(Family::Gaussian, Some(u.clone()), None)?;
    let eps = 1.0 / 48.0;
    let lattice = discretize(&domain, eps)?;
    let reference = continuum_reference(&domain, &u, 2, eps / 4.0)?;
    let phi: Vec<_> = reference
        .eigenfunctions
        .iter()
        .map(|f| move |y: &[f64]| f.eval(y))
        .collect();
    let phi: Vec<Eigenfunction> = phi.iter().map(|f| f as Eigenfunction).collect();

    let kappa = choose_kappa(model.moment_index(), 2, KappaMode::Clt)?;
    let r = choose_r(2, kappa)?;
    let params = EventParams {
        gamma: 0.5,
        kappa,
        r,
        rho: choose_rho(2, kappa, r)?,
        moment_factor: 4.0,
    };
    println!("kappa = {kappa:.4}, r = {r:.4}, rho = {:.4}", params.rho);
    for seed in 0..5 {
        let xi = sample_potential(&model, &lattice, seed)?;
        let e = event_diagnostics(&xi, &lattice, &phi, &model, params)?;
        println!(
            "seed {seed}: projection {:.4}  ||xi||_r {:.4} (bound {:.4})  blocked {:.4} (L = {})  in E: {}  in F: {}",
            e.projection_stats, e.xi_r_norm, e.moment_bound, e.blocked_norm, e.block_len, e.in_e, e.in_f
        );
    }
    Ok(())
}
