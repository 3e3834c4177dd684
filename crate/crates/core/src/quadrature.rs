//! One-dimensional quadrature helpers.

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let prev = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integral of `f` over `(0, 1/2]` for integrands that may blow up at 0.
///
/// Gauss–Legendre panels on `[2^{-j-1}, 2^{-j}]` are added until they stop
/// contributing; the remaining tail is summed as a geometric series, which is
/// exact for power-law singularities.
pub fn integrate_to_zero(f: impl Fn(f64) -> f64) -> f64 {
    const MAX_LEVELS: i32 = 1000;
    let (nodes, weights) = gauss_legendre(20);
    let panel = |a: f64, b: f64| {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    };
    let mut total = 0.0;
    let (mut prev, mut last) = (0.0, 0.0);
    let mut quiet = 0;
    for j in 1..=MAX_LEVELS {
        let b = 0.5f64.powi(j);
        prev = last;
        last = panel(0.5 * b, b);
        total += last;
        if last.abs() <= 1e-18 * total.abs() {
            quiet += 1;
            if quiet == 3 {
                return total;
            }
        } else {
            quiet = 0;
        }
    }
    let ratio = last / prev;
    if ratio > 0.0 && ratio < 1.0 {
        total += last * ratio / (1.0 - ratio);
    }
    total
}

/// Integral of `f` over `(0, 1)` with possible singularities at both ends.
///
/// `upper(t)` must return `f(1 − t)`; passing it separately lets callers
/// evaluate the upper tail without the cancellation in `1 − t`.
pub fn integrate_unit_interval(f: impl Fn(f64) -> f64, upper: impl Fn(f64) -> f64) -> f64 {
    integrate_to_zero(f) + integrate_to_zero(upper)
}

/// Composite trapezoid rule over equally spaced samples with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        let moment: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert_relative_eq!(moment, 2.0 / 19.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_endpoint_integrals() {
        // ∫ u^{-1/2} du = 2
        assert_relative_eq!(
            integrate_unit_interval(|u| u.powf(-0.5), |t| (1.0 - t).powf(-0.5)),
            2.0,
            epsilon = 1e-13
        );
        // ∫ u^{-0.95} du = 20, a barely integrable singularity
        assert_relative_eq!(
            integrate_to_zero(|u| u.powf(-0.95)),
            20.0 * 0.5f64.powf(0.05),
            max_relative = 1e-12
        );
        // ∫ |ln u| du = 1
        assert_relative_eq!(
            integrate_unit_interval(|u| -u.ln(), |t| -(1.0 - t).ln()),
            1.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn trapezoid_exact_for_lines() {
        let v: Vec<f64> = (0..11).map(|i| 3.0 * i as f64 * 0.1 + 1.0).collect();
        assert_relative_eq!(trapezoid(&v, 0.1), 2.5, epsilon = 1e-14);
        assert_eq!(trapezoid(&[4.0], 0.1), 0.0);
    }
}
