//! Low-lying eigenpairs of the lattice Hamiltonian, continuum reference
//! spectra and the variational (eigenvalue-sum) checks.

mod continuum;
mod dense;
mod lanczos;
mod tridiag;

pub use continuum::{continuum_reference, ContinuumReference, Eigenfunction};
pub use dense::{dense_eigen, DenseEigen};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::SparseHamiltonian;

/// Which algorithm computes the eigenpairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverPath {
    /// Tridiagonal bisection for paths, dense below the threshold, Lanczos above.
    #[default]
    Auto,
    Dense,
    Tridiagonal,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Residual target `||Hg − λg|| <= tol (|λ| + ||H||_row)`.
    pub tol: f64,
    pub path: SolverPath,
    /// `Auto` uses the dense solver up to this dimension.
    pub dense_threshold: usize,
    /// Cap on matrix-vector products in the iterative solver.
    pub max_matvecs: usize,
    /// Largest Krylov basis before a thick restart.
    pub krylov_dim: usize,
    /// Seed of the Lanczos starting block.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            path: SolverPath::Auto,
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
            max_matvecs: 100_000,
            krylov_dim: 96,
            seed: 0x5EED_1A2C_705F_0001,
        }
    }
}

pub const DEFAULT_DENSE_THRESHOLD: usize = 150;

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }

    pub fn with_path(mut self, path: SolverPath) -> Self {
        self.path = path;
        self
    }
}

/// Ascending eigenvalues with ℓ²-orthonormal eigenvectors.
///
/// Each eigenvector has its largest-magnitude entry positive (the lowest index
/// wins ties), so simple eigenpairs are a pure function of the matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// `λ_{i+1} − λ_i`.
    pub gaps: Vec<f64>,
    pub simple_flags: Vec<bool>,
    pub gap_tol: f64,
    pub path: SolverPath,
}

impl SpectrumResult {
    pub(crate) fn build(
        h: &SparseHamiltonian,
        eigenvalues: Vec<f64>,
        mut eigenvectors: Vec<Vec<f64>>,
        path: SolverPath,
    ) -> Self {
        eigenvectors.iter_mut().for_each(|v| fix_sign(v));
        let mut hv = vec![0.0; h.dim()];
        let residuals = eigenvalues
            .iter()
            .zip(&eigenvectors)
            .map(|(&lambda, v)| {
                h.matvec_into(v, &mut hv);
                hv.iter()
                    .zip(v)
                    .map(|(a, b)| (a - lambda * b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let gaps: Vec<f64> = eigenvalues.windows(2).map(|w| w[1] - w[0]).collect();
        let gap_tol = default_gap_tol(&eigenvalues);
        let simple_flags = simple_flags(&eigenvalues, gap_tol);
        SpectrumResult {
            eigenvalues,
            eigenvectors,
            residuals,
            gaps,
            simple_flags,
            gap_tol,
            path,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// JSON-ready record `{eps, k, eigenvalues, residuals, gaps}`.
    pub fn record(&self, eps: f64) -> SpectrumRecord {
        SpectrumRecord {
            eps,
            k: self.len(),
            eigenvalues: self.eigenvalues.clone(),
            residuals: self.residuals.clone(),
            gaps: self.gaps.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub eps: f64,
    pub k: usize,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub gaps: Vec<f64>,
}

/// `1e-6 (|λ_last| + |λ_1|)`.
pub fn default_gap_tol(eigenvalues: &[f64]) -> f64 {
    match (eigenvalues.first(), eigenvalues.last()) {
        (Some(a), Some(b)) => 1e-6 * (a.abs() + b.abs()),
        _ => 0.0,
    }
}

/// An index is simple when it is separated from each computed neighbour by
/// more than `gap_tol`.
pub fn simple_flags(eigenvalues: &[f64], gap_tol: f64) -> Vec<bool> {
    let n = eigenvalues.len();
    (0..n)
        .map(|i| {
            let below = i == 0 || eigenvalues[i] - eigenvalues[i - 1] > gap_tol;
            let above = i + 1 == n || eigenvalues[i + 1] - eigenvalues[i] > gap_tol;
            below && above
        })
        .collect()
}

pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The `k` smallest eigenpairs with default options and residual tolerance
/// `tol`.
pub fn lowest_k(h: &SparseHamiltonian, k: usize, tol: f64) -> Result<SpectrumResult> {
    lowest_k_with(h, k, &SolverOptions::with_tol(tol))
}

pub fn lowest_k_with(
    h: &SparseHamiltonian,
    k: usize,
    opts: &SolverOptions,
) -> Result<SpectrumResult> {
    let n = h.dim();
    if k == 0 || k > n {
        return Err(Error::IndexOutOfRange { k, available: n });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "solver tolerance {} must be positive",
            opts.tol
        )));
    }
    let path = match opts.path {
        SolverPath::Auto if h.is_tridiagonal() => SolverPath::Tridiagonal,
        SolverPath::Auto if n <= opts.dense_threshold => SolverPath::Dense,
        SolverPath::Auto => SolverPath::Lanczos,
        SolverPath::Tridiagonal if !h.is_tridiagonal() => {
            return Err(Error::InvalidParameter("matrix is not tridiagonal".into()));
        }
        other => other,
    };
    let (values, vectors) = match path {
        SolverPath::Dense => {
            let eig = dense_eigen(h)?;
            (
                eig.eigenvalues[..k].to_vec(),
                eig.eigenvectors[..k].to_vec(),
            )
        }
        SolverPath::Tridiagonal => {
            let (diag, off) = h.tridiagonal_parts().expect("checked tridiagonal");
            tridiag::lowest_k(&diag, &off, k)
        }
        SolverPath::Lanczos => lanczos::lowest_k(h, k, opts)?,
        SolverPath::Auto => unreachable!("resolved above"),
    };
    let result = SpectrumResult::build(h, values, vectors, path);
    let scale = h.row_norm_estimate();
    let ok = result
        .eigenvalues
        .iter()
        .zip(&result.residuals)
        .all(|(l, r)| *r <= opts.tol * (l.abs() + scale));
    if !ok {
        return Err(Error::NoConvergence {
            iterations: 0,
            residuals: result.residuals,
        });
    }
    Ok(result)
}

/// `Λ_k = λ_1 + … + λ_k` (`Λ_0 = 0`).
pub fn kyfan_sum(spectrum: &SpectrumResult, k: usize) -> Result<f64> {
    if k > spectrum.len() {
        return Err(Error::IndexOutOfRange {
            k,
            available: spectrum.len(),
        });
    }
    Ok(spectrum.eigenvalues[..k].iter().sum())
}

/// `Σ_i <h_i, H h_i>` over an orthonormal system; bounded below by `Λ_k`.
pub fn rayleigh_sum(h: &SparseHamiltonian, vectors: &[Vec<f64>]) -> Result<f64> {
    let mut deviation = 0.0f64;
    for (i, u) in vectors.iter().enumerate() {
        if u.len() != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                found: u.len(),
            });
        }
        for (j, v) in vectors.iter().enumerate().skip(i) {
            let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            deviation = deviation.max((dot - target).abs());
        }
    }
    if deviation > 1e-8 {
        return Err(Error::NotOrthonormal { deviation });
    }
    let mut hv = vec![0.0; h.dim()];
    Ok(vectors
        .iter()
        .map(|v| {
            h.matvec_into(v, &mut hv);
            v.iter().zip(&hv).map(|(a, b)| a * b).sum::<f64>()
        })
        .sum())
}

/// `δ = ⅓ min(λ_k − λ_{k−1}, λ_{k+1} − λ_k)` (1-based `k`; the lower gap is
/// omitted for `k = 1`) and whether `δ > gap_tol`.
pub fn gap_report(spectrum: &SpectrumResult, k: usize, gap_tol: f64) -> Result<(f64, bool)> {
    gap_report_values(&spectrum.eigenvalues, k, gap_tol)
}

pub fn gap_report_values(eigenvalues: &[f64], k: usize, gap_tol: f64) -> Result<(f64, bool)> {
    if k == 0 || k + 1 > eigenvalues.len() {
        return Err(Error::IndexOutOfRange {
            k: k + 1,
            available: eigenvalues.len(),
        });
    }
    let upper = eigenvalues[k] - eigenvalues[k - 1];
    let gap = if k == 1 {
        upper
    } else {
        upper.min(eigenvalues[k - 1] - eigenvalues[k - 2])
    };
    let delta = gap / 3.0;
    Ok((delta, delta > gap_tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{discretize, ContinuumDomain, LatticeDomain};
    use crate::operator::{assemble, dense_oracle};
    use crate::potential::{sample_potential, Family, PotentialModel, PotentialSample};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn path(n: usize, eps: f64) -> LatticeDomain {
        discretize(
            &ContinuumDomain::new_box(vec![(0.0, (n + 3) as f64 * eps)]).unwrap(),
            eps,
        )
        .unwrap()
    }

    fn zero(lat: &LatticeDomain) -> PotentialSample {
        PotentialSample::deterministic(vec![0.0; lat.len()], lat.eps())
    }

    fn three_site() -> SparseHamiltonian {
        let lat = path(3, 1.0);
        assemble(&lat, &zero(&lat)).unwrap()
    }

    fn check_orthonormal(s: &SpectrumResult) {
        for (i, u) in s.eigenvectors.iter().enumerate() {
            for (j, v) in s.eigenvectors.iter().enumerate() {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                if i == j {
                    assert!((dot - 1.0).abs() <= 1e-12, "norm {dot}");
                } else {
                    assert!(dot.abs() <= 1e-10, "overlap {dot}");
                }
            }
        }
    }

    #[test]
    fn three_site_path_closed_form() {
        let h = three_site();
        // Dirichlet path: 2 − 2 cos(nπ/4)
        let exact: Vec<f64> = (1..=3)
            .map(|n| 2.0 - 2.0 * (n as f64 * std::f64::consts::PI / 4.0).cos())
            .collect();
        assert_relative_eq!(exact[0], 2.0 - 2f64.sqrt(), epsilon = 1e-15);
        for path in [
            SolverPath::Dense,
            SolverPath::Tridiagonal,
            SolverPath::Lanczos,
            SolverPath::Auto,
        ] {
            let s = lowest_k_with(&h, 3, &SolverOptions::default().with_path(path)).unwrap();
            for (a, b) in s.eigenvalues.iter().zip(&exact) {
                assert_relative_eq!(a, b, epsilon = 1e-13);
            }
            check_orthonormal(&s);
        }
    }

    #[test]
    fn single_site_exact() {
        let lat = path(1, 0.5);
        let h = assemble(&lat, &PotentialSample::deterministic(vec![1.5], 0.5)).unwrap();
        let s = lowest_k(&h, 1, 1e-12).unwrap();
        assert_eq!(s.eigenvalues, vec![2.0 * 4.0 + 1.5]);
        assert_eq!(s.eigenvectors, vec![vec![1.0]]);
    }

    #[test]
    fn sign_convention() {
        let h = three_site();
        let s = lowest_k(&h, 3, 1e-12).unwrap();
        for v in &s.eigenvectors {
            let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let first = v.iter().position(|x| x.abs() == max).unwrap();
            assert!(v[first] > 0.0);
        }
        // ties broken by the lowest index: second mode is (1, 0, −1)/√2
        assert!(s.eigenvectors[1][0] > 0.0);
    }

    #[test]
    fn long_path_iterative_matches_dense() {
        let lat = discretize(&ContinuumDomain::unit_box(1).unwrap(), 1.0 / 514.0).unwrap();
        assert_eq!(lat.len(), 511);
        let h = assemble(&lat, &zero(&lat)).unwrap();
        let dense = lowest_k_with(
            &h,
            4,
            &SolverOptions::default().with_path(SolverPath::Dense),
        )
        .unwrap();
        for path in [SolverPath::Tridiagonal, SolverPath::Lanczos] {
            let it = lowest_k_with(&h, 4, &SolverOptions::default().with_path(path)).unwrap();
            for (a, b) in it.eigenvalues.iter().zip(&dense.eigenvalues) {
                assert_relative_eq!(a, b, max_relative = 1e-9);
            }
            check_orthonormal(&it);
        }
    }

    #[test]
    fn lanczos_matches_dense_on_random_2d_instances() {
        let model = PotentialModel::raw(Family::Gaussian).unwrap();
        let lat = discretize(&ContinuumDomain::unit_box(2).unwrap(), 1.0 / 18.0).unwrap();
        for seed in 0..4 {
            let xi = sample_potential(&model, &lat, seed).unwrap();
            let h = assemble(&lat, &xi).unwrap();
            let dense = lowest_k_with(
                &h,
                5,
                &SolverOptions::default().with_path(SolverPath::Dense),
            )
            .unwrap();
            let it = lowest_k_with(
                &h,
                5,
                &SolverOptions::default().with_path(SolverPath::Lanczos),
            )
            .unwrap();
            for (a, b) in it.eigenvalues.iter().zip(&dense.eigenvalues) {
                assert_relative_eq!(a, b, max_relative = 1e-8);
            }
            check_orthonormal(&it);
        }
    }

    #[test]
    fn lanczos_finds_degenerate_eigenvalues() {
        // ξ ≡ 0 on a square: λ_2 = λ_3 exactly
        let lat = discretize(&ContinuumDomain::unit_box(2).unwrap(), 1.0 / 16.0).unwrap();
        let h = assemble(&lat, &zero(&lat)).unwrap();
        let dense = lowest_k_with(
            &h,
            4,
            &SolverOptions::default().with_path(SolverPath::Dense),
        )
        .unwrap();
        let it = lowest_k_with(
            &h,
            4,
            &SolverOptions::default().with_path(SolverPath::Lanczos),
        )
        .unwrap();
        for (a, b) in it.eigenvalues.iter().zip(&dense.eigenvalues) {
            assert_relative_eq!(a, b, max_relative = 1e-8);
        }
        assert!(!it.simple_flags[1] && !it.simple_flags[2]);
        assert!(it.simple_flags[0]);
    }

    #[test]
    fn kyfan_sums() {
        let s = lowest_k(&three_site(), 3, 1e-12).unwrap();
        assert_eq!(kyfan_sum(&s, 1).unwrap(), s.eigenvalues[0]);
        assert_relative_eq!(kyfan_sum(&s, 3).unwrap(), 6.0, epsilon = 1e-13);
        for k in 1..=3 {
            let step = kyfan_sum(&s, k).unwrap() - kyfan_sum(&s, k - 1).unwrap();
            assert_relative_eq!(step, s.eigenvalues[k - 1], epsilon = 1e-14);
        }
        assert!(kyfan_sum(&s, 4).is_err());
    }

    fn random_ons(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let m = DMatrix::<f64>::from_fn(n, k, |_, _| StandardNormal.sample(rng));
        let q = m.qr().q();
        (0..k)
            .map(|j| q.column(j).iter().copied().collect())
            .collect()
    }

    #[test]
    fn rayleigh_sums_bound_eigenvalue_sums() {
        let lat = path(50, 1.0 / 51.0);
        let model = PotentialModel::raw(Family::Uniform { half_width: 1.0 }).unwrap();
        let xi = sample_potential(&model, &lat, 1).unwrap();
        let h = assemble(&lat, &xi).unwrap();
        let s = lowest_k(&h, 3, 1e-12).unwrap();
        for k in 1..=3 {
            let exact = rayleigh_sum(&h, &s.eigenvectors[..k]).unwrap();
            assert_relative_eq!(exact, kyfan_sum(&s, k).unwrap(), max_relative = 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            for k in 1..=3 {
                let ons = random_ons(h.dim(), k, &mut rng);
                assert!(rayleigh_sum(&h, &ons).unwrap() >= kyfan_sum(&s, k).unwrap() - 1e-9);
            }
        }
        // a standard basis vector gives the diagonal entry
        let mut e = vec![0.0; h.dim()];
        e[7] = 1.0;
        let r = rayleigh_sum(&h, &[e]).unwrap();
        assert_eq!(r, h.diagonal()[7]);
        assert!(r >= s.eigenvalues[0]);
        // non-orthonormal input
        let v = vec![vec![1.0; h.dim()]];
        assert!(matches!(
            rayleigh_sum(&h, &v),
            Err(Error::NotOrthonormal { .. })
        ));
    }

    #[test]
    fn gap_reports() {
        let s = lowest_k(&three_site(), 3, 1e-12).unwrap();
        let (delta, simple) = gap_report(&s, 2, 1e-9).unwrap();
        assert_relative_eq!(delta, 2f64.sqrt() / 3.0, epsilon = 1e-13);
        assert!(simple);
        let (delta1, _) = gap_report(&s, 1, 1e-9).unwrap();
        assert_relative_eq!(delta1, (s.eigenvalues[1] - s.eigenvalues[0]) / 3.0);
        assert!(gap_report(&s, 3, 1e-9).is_err());
        let (delta, simple) = gap_report_values(&[1.0, 2.0, 2.0, 5.0], 2, 1e-9).unwrap();
        assert_eq!(delta, 0.0);
        assert!(!simple);
    }

    #[test]
    fn nonnegative_potential_gives_positive_definite_matrix() {
        let lat = discretize(&ContinuumDomain::unit_box(2).unwrap(), 0.1).unwrap();
        let model = PotentialModel::raw(Family::Uniform { half_width: 3.0 }).unwrap();
        let xi = sample_potential(&model, &lat, 2).unwrap();
        let abs =
            PotentialSample::deterministic(xi.values.iter().map(|v| v.abs()).collect(), lat.eps());
        let h = assemble(&lat, &abs).unwrap();
        let eig = dense_oracle(&h).unwrap().symmetric_eigenvalues();
        assert!(eig.min() > 0.0);
    }

    #[test]
    fn adding_nonnegative_potential_raises_eigenvalues() {
        let lat = discretize(&ContinuumDomain::unit_box(2).unwrap(), 1.0 / 12.0).unwrap();
        let model = PotentialModel::raw(Family::Gaussian).unwrap();
        for seed in 0..5 {
            let xi = sample_potential(&model, &lat, seed).unwrap();
            let eta = sample_potential(&model, &lat, seed + 100).unwrap();
            let raised: Vec<f64> = xi
                .values
                .iter()
                .zip(&eta.values)
                .map(|(a, b)| a + b.abs())
                .collect();
            let a = lowest_k(&assemble(&lat, &xi).unwrap(), 6, 1e-11).unwrap();
            let b = lowest_k(
                &assemble(&lat, &PotentialSample::deterministic(raised, lat.eps())).unwrap(),
                6,
                1e-11,
            )
            .unwrap();
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                assert!(y >= x);
            }
        }
    }

    #[test]
    fn spectrum_invariant_under_site_relabelling() {
        let lat = discretize(&ContinuumDomain::unit_box(2).unwrap(), 0.1).unwrap();
        let model = PotentialModel::raw(Family::Gaussian).unwrap();
        let xi = sample_potential(&model, &lat, 12).unwrap();
        let dense = dense_oracle(&assemble(&lat, &xi).unwrap()).unwrap();
        let n = dense.nrows();
        let perm: Vec<usize> = (0..n).map(|i| (i * 17 + 5) % n).collect();
        let permuted = DMatrix::from_fn(n, n, |i, j| dense[(perm[i], perm[j])]);
        let mut a: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
        let mut b: Vec<f64> = permuted.symmetric_eigenvalues().iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn bad_requests() {
        let h = three_site();
        assert!(matches!(
            lowest_k(&h, 0, 1e-10),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            lowest_k(&h, 4, 1e-10),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(lowest_k(&h, 1, 0.0).is_err());
        let lat = discretize(&ContinuumDomain::unit_box(2).unwrap(), 0.1).unwrap();
        let h2 = assemble(&lat, &zero(&lat)).unwrap();
        assert!(lowest_k_with(
            &h2,
            1,
            &SolverOptions::default().with_path(SolverPath::Tridiagonal)
        )
        .is_err());
    }

    #[test]
    fn spectrum_record_shape() {
        let s = lowest_k(&three_site(), 2, 1e-12).unwrap();
        let rec = s.record(1.0);
        assert_eq!(rec.k, 2);
        assert_eq!(rec.gaps.len(), 1);
        let json = serde_json::to_value(&rec).unwrap();
        for key in ["eps", "k", "eigenvalues", "residuals", "gaps"] {
            assert!(json.get(key).is_some());
        }
    }
}
