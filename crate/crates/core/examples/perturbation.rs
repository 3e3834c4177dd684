//! Eigenvalue response to changing the potential at one site: the Hadamard
//! derivative, the spectral Green kernel and the second variation identity.

use anderson_core::prelude::*;

fn main() -> Result<()> {
    let lattice = discretize(&ContinuumDomain::new_box(vec![(0.0, 13.0)])?, 1.0)?;
    let model = PotentialModel::raw(Family::Uniform { half_width: 1.0 })?;
    let h = assemble(&lattice, &sample_potential(&model, &lattice, 5)?)?;
    let site = 4;

    for k in 1..=3 {
        let c = hadamard_derivative_check(&h, k, site, 1e-4)?;
        println!(
            "k = {k}: d lambda / d xi({site}) = {:.12} (finite difference {:.12}), rel err {:.1e}",
            c.analytic, c.fd, c.rel_err
        );
    }

    let g = spectral_green_diag(&h, 1, site)?;
    println!(
        "G_1({site},{site}) = {:.12} from the spectrum, {:.12} from a bordered solve",
        g.value, g.solve_value
    );

    let xi0 = h.potential()[site];
    let sv = second_variation_check(&h, 1, site, xi0, xi0 + 0.5, 64)?;
    println!(
        "|g_1({site})| after moving xi by 0.5: {:.10} direct, {:.10} from the kernel, rel err {:.1e}",
        sv.lhs, sv.rhs, sv.rel_err
    );
    Ok(())
}
