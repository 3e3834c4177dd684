//! Symmetric tridiagonal eigenpairs by Sturm-count bisection and inverse
//! iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Number of eigenvalues strictly below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        q = diag[i] - x - off[i - 1] * off[i - 1] / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r =
            if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// The `j`-th smallest eigenvalue (0-based).
fn bisect(diag: &[f64], off: &[f64], j: usize, bounds: (f64, f64), pivmin: f64) -> f64 {
    let norm = bounds.0.abs().max(bounds.1.abs());
    let (mut lo, mut hi) = (
        bounds.0 - 1e-12 * norm - pivmin,
        bounds.1 + 1e-12 * norm + pivmin,
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + pivmin
        {
            break;
        }
        if sturm_count(diag, off, mid, pivmin) > j {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// LU factorisation with partial pivoting of a tridiagonal matrix.
struct TridiagLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn new(diag: &[f64], off: &[f64], shift: f64, tiny: f64) -> Self {
        let n = diag.len();
        let mut lu = TridiagLu {
            dl: off.to_vec(),
            d: diag.iter().map(|a| a - shift).collect(),
            du: off.to_vec(),
            du2: vec![0.0; n.saturating_sub(2)],
            swapped: vec![false; n.saturating_sub(1)],
        };
        for i in 0..n.saturating_sub(1) {
            if lu.d[i].abs() >= lu.dl[i].abs() {
                if lu.d[i] != 0.0 {
                    let fact = lu.dl[i] / lu.d[i];
                    lu.dl[i] = fact;
                    lu.d[i + 1] -= fact * lu.du[i];
                }
            } else {
                let fact = lu.d[i] / lu.dl[i];
                lu.d[i] = lu.dl[i];
                lu.dl[i] = fact;
                let temp = lu.du[i];
                lu.du[i] = lu.d[i + 1];
                lu.d[i + 1] = temp - fact * lu.d[i + 1];
                if i + 2 < n {
                    lu.du2[i] = lu.du[i + 1];
                    lu.du[i + 1] *= -fact;
                }
                lu.swapped[i] = true;
            }
        }
        for p in lu.d.iter_mut() {
            if p.abs() < tiny {
                *p = if *p < 0.0 { -tiny } else { tiny };
            }
        }
        lu
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn residual(diag: &[f64], off: &[f64], lambda: f64, v: &[f64]) -> f64 {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut r = (diag[i] - lambda) * v[i];
            if i > 0 {
                r += off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                r += off[i] * v[i + 1];
            }
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// Lowest `k` eigenpairs of the tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off`.
pub(crate) fn lowest_k(diag: &[f64], off: &[f64], k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = diag.len();
    if n == 1 {
        return (vec![diag[0]], vec![vec![1.0]]);
    }
    let bounds = gershgorin(diag, off);
    let norm = bounds.0.abs().max(bounds.1.abs()).max(f64::MIN_POSITIVE);
    let max_off2 = off.iter().fold(1.0f64, |m, b| m.max(b * b));
    let pivmin = f64::MIN_POSITIVE * max_off2;
    let values: Vec<f64> = (0..k)
        .map(|j| bisect(diag, off, j, bounds, pivmin))
        .collect();

    let cluster_tol = 1e-3 * norm;
    let mut rng = ChaCha8Rng::seed_from_u64(0x7121_D1A6);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut cluster_start = 0;
    for (j, &lambda) in values.iter().enumerate() {
        if j > 0 && lambda - values[j - 1] > cluster_tol {
            cluster_start = j;
        }
        let lu = TridiagLu::new(diag, off, lambda, f64::EPSILON * norm);
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        normalize(&mut v);
        for iter in 0..8 {
            lu.solve(&mut v);
            for u in &vectors[cluster_start..j] {
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= dot * y);
            }
            normalize(&mut v);
            if iter >= 1 && residual(diag, off, lambda, &v) <= 4.0 * n as f64 * f64::EPSILON * norm
            {
                break;
            }
        }
        vectors.push(v);
    }
    (values, vectors)
}
