//! Low-lying spectrum of one random Hamiltonian on a 2D rectangle, from each
//! solver path, next to the continuum Dirichlet eigenvalues.

use anderson_core::prelude::*;

fn main() -> Result<()> {
    let domain = ContinuumDomain::new_box(vec![(0.0, 1.0), (0.0, 0.75)])?;
    let eps = 1.0 / 32.0;
    let lattice = discretize(&domain, eps)?;
    let model = PotentialModel::raw(Family::Gaussian)?;
    let xi = sample_potential(&model, &lattice, 2024)?;
    let h = assemble(&lattice, &xi)?;
    println!(
        "{} sites, {} nonzeros, kinetic diagonal {:.1}",
        h.dim(),
        h.nnz(),
        h.kinetic_diagonal()
    );

    let k = 4;
    let reference = continuum_reference(&domain, &Profile::Constant(0.0), k, eps / 4.0)?;
    for path in [SolverPath::Lanczos, SolverPath::Dense] {
        let s = lowest_k_with(&h, k, &SolverOptions::default().with_path(path))?;
        println!("{path:?}");
        for i in 0..k {
            println!(
                "  k = {}  lambda = {:12.6}  residual = {:.1e}  simple = {}  continuum = {:10.4}",
                i + 1,
                s.eigenvalues[i],
                s.residuals[i],
                s.simple_flags[i],
                reference.eigenvalues[i]
            );
        }
    }
    let s = lowest_k(&h, 3, 1e-10)?;
    println!("Ky Fan sum Lambda_3 = {:.6}", kyfan_sum(&s, 3)?);
    Ok(())
}
