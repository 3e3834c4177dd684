//! Continuum domains, their lattice discretizations, scaled norms and block
//! averaging.
//!
//! A [`LatticeDomain`] holds the integer sites `x` whose closed ℓ∞-ball of
//! radius `eps` around the physical point `eps·x` lies inside the open domain.
//! Sites are stored in lexicographic order, which fixes the vector layout used
//! by every other module.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Relative margin used when a lattice corner lands on the boundary.
const BOUNDARY_MARGIN: f64 = 1e-12;

/// Bounded open convex subset of `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ContinuumDomain {
    /// Product of open intervals `(lo_i, hi_i)`.
    Box { intervals: Vec<(f64, f64)> },
    /// Open Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
}

impl ContinuumDomain {
    pub fn new_box(intervals: Vec<(f64, f64)>) -> Result<Self> {
        let domain = ContinuumDomain::Box { intervals };
        domain.validate()?;
        Ok(domain)
    }

    /// The unit cube `(0,1)^d`.
    pub fn unit_box(d: usize) -> Result<Self> {
        Self::new_box(vec![(0.0, 1.0); d])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let domain = ContinuumDomain::Ball { center, radius };
        domain.validate()?;
        Ok(domain)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ContinuumDomain::Box { intervals } => {
                if intervals.is_empty() {
                    return Err(Error::UnsupportedDomain(
                        "box needs at least one axis".into(),
                    ));
                }
                for (axis, &(lo, hi)) in intervals.iter().enumerate() {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(Error::UnsupportedDomain(format!(
                            "box axis {axis} has interval ({lo}, {hi})"
                        )));
                    }
                }
            }
            ContinuumDomain::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(Error::UnsupportedDomain(
                        "ball needs a center in R^d, d >= 1".into(),
                    ));
                }
                if !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::UnsupportedDomain(
                        "ball center must be finite".into(),
                    ));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::UnsupportedDomain(format!(
                        "ball radius {radius} must be positive"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ContinuumDomain::Box { intervals } => intervals.len(),
            ContinuumDomain::Ball { center, .. } => center.len(),
        }
    }

    /// Membership in the open set.
    pub fn contains(&self, y: &[f64]) -> bool {
        self.contains_with_margin(y, 0.0)
    }

    fn contains_with_margin(&self, y: &[f64], margin: f64) -> bool {
        match self {
            ContinuumDomain::Box { intervals } => intervals.iter().zip(y).all(|(&(lo, hi), &v)| {
                let tol = margin * lo.abs().max(hi.abs()).max(1.0);
                v > lo + tol && v < hi - tol
            }),
            ContinuumDomain::Ball { center, radius } => {
                let r2: f64 = center.iter().zip(y).map(|(c, v)| (v - c) * (v - c)).sum();
                r2.sqrt() < radius * (1.0 - margin)
            }
        }
    }

    /// Lebesgue volume `|D|`.
    pub fn volume(&self) -> f64 {
        match self {
            ContinuumDomain::Box { intervals } => {
                intervals.iter().map(|(lo, hi)| hi - lo).product()
            }
            ContinuumDomain::Ball { radius, center } => {
                let d = center.len() as f64;
                std::f64::consts::PI.powf(d / 2.0) / statrs::function::gamma::gamma(d / 2.0 + 1.0)
                    * radius.powf(d)
            }
        }
    }

    /// Axis-aligned bounding box as `(lo, hi)` per axis.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            ContinuumDomain::Box { intervals } => intervals.clone(),
            ContinuumDomain::Ball { center, radius } => {
                center.iter().map(|c| (c - radius, c + radius)).collect()
            }
        }
    }

    /// Integer points `x` with `eps·x` inside the open domain, in lexicographic
    /// order. These are the nodes of the fine-grid quadrature.
    pub fn grid_points(&self, eps: f64) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        for_each_candidate(&self.bounds(), eps, |x| {
            let y: Vec<f64> = x.iter().map(|&xi| xi as f64 * eps).collect();
            if self.contains(&y) {
                out.push(x.to_vec());
            }
        });
        out
    }
}

fn for_each_candidate(bounds: &[(f64, f64)], eps: f64, mut visit: impl FnMut(&[i64])) {
    let ranges: Vec<(i64, i64)> = bounds
        .iter()
        .map(|&(lo, hi)| ((lo / eps).floor() as i64, (hi / eps).ceil() as i64))
        .collect();
    if ranges.iter().any(|&(a, b)| a > b) {
        return;
    }
    let d = ranges.len();
    let mut x: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        visit(&x);
        // odometer, last axis fastest => lexicographic order
        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if x[axis] < ranges[axis].1 {
                x[axis] += 1;
                for later in axis + 1..d {
                    x[later] = ranges[later].0;
                }
                break;
            }
        }
    }
}

/// The site set `D_eps` together with its index map.
#[derive(Clone)]
pub struct LatticeDomain {
    eps: f64,
    d: usize,
    coords: Vec<i64>,
    index: HashMap<Box<[i64]>, usize>,
    domain: ContinuumDomain,
}

impl fmt::Debug for LatticeDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeDomain")
            .field("eps", &self.eps)
            .field("d", &self.d)
            .field("len", &self.len())
            .finish()
    }
}

impl PartialEq for LatticeDomain {
    fn eq(&self, other: &Self) -> bool {
        self.eps == other.eps && self.d == other.d && self.coords == other.coords
    }
}

/// Discretize `domain` at spacing `eps`.
///
/// A site qualifies when every corner of the closed ℓ∞-cube of radius `eps`
/// around `eps·x` lies in the open domain, which is exact for convex shapes.
pub fn discretize(domain: &ContinuumDomain, eps: f64) -> Result<LatticeDomain> {
    domain.validate()?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let d = domain.dim();
    let mut coords = Vec::new();
    let mut corner = vec![0.0; d];
    for_each_candidate(&domain.bounds(), eps, |x| {
        let inside = (0..1usize << d).all(|mask| {
            for (axis, c) in corner.iter_mut().enumerate() {
                let offset = if mask >> axis & 1 == 1 { 1 } else { -1 };
                *c = (x[axis] + offset) as f64 * eps;
            }
            domain.contains_with_margin(&corner, BOUNDARY_MARGIN)
        });
        if inside {
            coords.extend_from_slice(x);
        }
    });
    if coords.is_empty() {
        return Err(Error::EmptyLattice { eps });
    }
    Ok(LatticeDomain::from_parts(eps, d, coords, domain.clone()))
}

impl LatticeDomain {
    fn from_parts(eps: f64, d: usize, coords: Vec<i64>, domain: ContinuumDomain) -> Self {
        let index = coords
            .chunks_exact(d)
            .enumerate()
            .map(|(i, x)| (x.to_vec().into_boxed_slice(), i))
            .collect();
        LatticeDomain {
            eps,
            d,
            coords,
            index,
            domain,
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn domain(&self) -> &ContinuumDomain {
        &self.domain
    }

    pub fn site(&self, i: usize) -> &[i64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn sites(&self) -> impl Iterator<Item = &[i64]> + '_ {
        self.coords.chunks_exact(self.d)
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        self.index.get(x).copied()
    }

    /// Physical location `eps·x` of site `i`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        self.site(i).iter().map(|&x| x as f64 * self.eps).collect()
    }

    /// `eps^d`, the cell volume.
    pub fn cell_volume(&self) -> f64 {
        self.eps.powi(self.d as i32)
    }

    /// SHA-256 over dimension, spacing and the site list.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.d as u64).to_le_bytes());
        hasher.update(self.eps.to_bits().to_le_bytes());
        for c in &self.coords {
            hasher.update(c.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::LatticeMismatch {
                expected: self.len(),
                found: f.len(),
            });
        }
        Ok(())
    }

    pub fn scaled_norm(&self, f: &[f64], p: f64) -> Result<f64> {
        self.check_len(f)?;
        scaled_norm(f, self.eps, self.d, p)
    }

    pub fn scaled_inner(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        scaled_inner(f, g, self.eps, self.d)
    }

    /// Zero-extended site function carrying `values`.
    pub fn site_function(&self, values: &[f64]) -> Result<SiteFunction> {
        self.check_len(values)?;
        let entries = self
            .sites()
            .zip(values)
            .map(|(x, &v)| (x.to_vec(), v))
            .collect();
        Ok(SiteFunction { d: self.d, entries })
    }
}

/// `(eps^d Σ |f|^p)^{1/p}`; `p = ∞` gives `max |f|`.
pub fn scaled_norm(f: &[f64], eps: f64, d: usize, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "norm exponent p = {p} must be >= 1"
        )));
    }
    if p.is_infinite() {
        return Ok(f.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let cell = eps.powi(d as i32);
    let sum: f64 = if p == 1.0 {
        f.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        f.iter().map(|v| v * v).sum()
    } else {
        f.iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((cell * sum).powf(1.0 / p))
}

/// `eps^d Σ f g`.
pub fn scaled_inner(f: &[f64], g: &[f64], eps: f64, d: usize) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::LatticeMismatch {
            expected: f.len(),
            found: g.len(),
        });
    }
    let dot: f64 = f.iter().zip(g).map(|(a, b)| a * b).sum();
    Ok(eps.powi(d as i32) * dot)
}

/// Finitely supported function on `Z^d`, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteFunction {
    d: usize,
    entries: BTreeMap<Vec<i64>, f64>,
}

impl SiteFunction {
    pub fn new(d: usize) -> Self {
        SiteFunction {
            d,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_pairs(d: usize, pairs: impl IntoIterator<Item = (Vec<i64>, f64)>) -> Result<Self> {
        let mut f = SiteFunction::new(d);
        for (x, v) in pairs {
            if x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: x.len(),
                });
            }
            *f.entries.entry(x).or_insert(0.0) += v;
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, x: &[i64]) -> f64 {
        self.entries.get(x).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[i64], f64)> + '_ {
        self.entries.iter().map(|(x, &v)| (x.as_slice(), v))
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.values().copied().collect()
    }

    pub fn sum(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn scaled_norm(&self, eps: f64, p: f64) -> Result<f64> {
        scaled_norm(&self.values(), eps, self.d, p)
    }
}

/// Replace `f` on every block `B_L(y) = L·y + {0,…,L−1}^d` by its block mean.
///
/// The result covers every site of each block that meets the support of `f`.
pub fn block_average(f: &SiteFunction, block: usize) -> Result<SiteFunction> {
    if block == 0 {
        return Err(Error::InvalidParameter(
            "block side L must be positive".into(),
        ));
    }
    let l = block as i64;
    let d = f.d;
    let mut sums: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (x, v) in f.iter() {
        let y: Vec<i64> = x.iter().map(|&xi| xi.div_euclid(l)).collect();
        *sums.entry(y).or_insert(0.0) += v;
    }
    let volume = (block as f64).powi(d as i32);
    let mut entries = BTreeMap::new();
    let cells = block.pow(d as u32);
    for (y, s) in sums {
        let mean = s / volume;
        for cell in 0..cells {
            let mut rest = cell;
            let mut x = vec![0i64; d];
            for axis in (0..d).rev() {
                x[axis] = y[axis] * l + (rest % block) as i64;
                rest /= block;
            }
            entries.insert(x, mean);
        }
    }
    Ok(SiteFunction { d, entries })
}

/// Continuous real function on the domain, used for mean and variance profiles.
pub type ProfileFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Profile {
    Constant(f64),
    /// `offset + gradient · y`.
    Affine {
        offset: f64,
        gradient: Vec<f64>,
    },
    Custom(ProfileFn),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant(c) => write!(f, "Constant({c})"),
            Profile::Affine { offset, gradient } => {
                write!(f, "Affine {{ offset: {offset}, gradient: {gradient:?} }}")
            }
            Profile::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Profile {
    pub fn custom(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Profile::Custom(Arc::new(f))
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            Profile::Constant(c) => *c,
            Profile::Affine { offset, gradient } => {
                offset + gradient.iter().zip(y).map(|(g, v)| g * v).sum::<f64>()
            }
            Profile::Custom(f) => f(y),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Profile::Constant(c) => Some(*c),
            Profile::Affine { offset, gradient } if gradient.iter().all(|g| *g == 0.0) => {
                Some(*offset)
            }
            _ => None,
        }
    }

    /// Multiply every value by `c`.
    pub fn scaled(&self, c: f64) -> Profile {
        match self {
            Profile::Constant(v) => Profile::Constant(c * v),
            Profile::Affine { offset, gradient } => Profile::Affine {
                offset: c * offset,
                gradient: gradient.iter().map(|g| c * g).collect(),
            },
            Profile::Custom(f) => {
                let f = Arc::clone(f);
                Profile::custom(move |y| c * f(y))
            }
        }
    }
}

/// Vector with entry `f(eps·x)` at each site `x`.
pub fn sample_profile(f: impl Fn(&[f64]) -> f64, lattice: &LatticeDomain) -> Vec<f64> {
    (0..lattice.len()).map(|i| f(&lattice.point(i))).collect()
}
