//! Extremal points of `E_d`, `E_d(p)` and `S_d(p)`, and the bijection between
//! exchangeable pmfs and pmfs of the coordinate sum.
//!
//! A [`SumPmf`] is a pmf `(p_0, …, p_d)` of `Y = X_1 + … + X_d`; an
//! [`ExchangeablePmf`] is the compressed vector `(f_0, …, f_d)` where `f_j` is
//! the mass of every weight-`j` binary vector. The two are related by
//! `p_j = C(d, j) f_j` ([`map_h`], [`map_h_inv`]).
//!
//! With the mean fixed to `p`, the sum pmfs form the polytope
//! `{p ≥ 0, Σ p_j = 1, Σ j p_j = p d}` whose vertices ([`RayDensity`]) are
//! two-point densities on `j1 < p d < j2`, plus the point mass at `p d` when
//! `p d` is an integer. [`enumerate_rays`] lists them in lexicographic
//! `(j1, j2)` order with the point mass last.

use crate::error::{domain, Error, Result};
use crate::util::{binomial, check_probability_vector, rationalize};

/// Tolerance on `Σ p_j = 1` for validated pmfs.
pub const SUM_TOL: f64 = 1e-12;

/// Largest denominator accepted when recognising `p` as a fraction.
const MAX_DENOMINATOR: i64 = 1_000_000;

/// Relative tolerance used to decide that `p d` is an integer when `p` is not
/// a recognisable fraction.
const INTEGER_PD_RTOL: f64 = 1e-9;

/// Pmf of the coordinate sum `Y` on `{0, …, d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SumPmf {
    d: usize,
    probs: Vec<f64>,
}

impl SumPmf {
    /// Validates nonnegativity and `Σ p_j = 1` within [`SUM_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidPmf(format!(
                "a sum pmf needs at least 2 entries (d >= 1), got {}",
                probs.len()
            )));
        }
        check_probability_vector(&probs, "sum pmf").map_err(Error::InvalidPmf)?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidPmf(format!("sum pmf sums to {total}, not 1")));
        }
        Ok(Self {
            d: probs.len() - 1,
            probs,
        })
    }

    /// Rescales a nonnegative vector to sum to one.
    pub fn normalized(mut probs: Vec<f64>) -> Result<Self> {
        check_probability_vector(&probs, "sum pmf").map_err(Error::InvalidPmf)?;
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidPmf("all entries are zero".into()));
        }
        probs.iter_mut().for_each(|v| *v /= total);
        Self::new(probs)
    }

    /// Unit mass at `j`.
    pub fn point_mass(d: usize, j: usize) -> Result<Self> {
        if d == 0 || j > d {
            return domain(format!("point mass at {j} is outside {{0..{d}}}"));
        }
        let mut probs = vec![0.0; d + 1];
        probs[j] = 1.0;
        Ok(Self { d, probs })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// `E[Y]`.
    pub fn mean(&self) -> f64 {
        self.expect(|j| j as f64)
    }

    /// `E[φ(Y)]`.
    pub fn expect(&self, phi: impl Fn(usize) -> f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(j, &w)| w * phi(j))
            .sum()
    }

    pub fn to_exchangeable(&self) -> ExchangeablePmf {
        map_h_inv(self)
    }
}

/// Compressed exchangeable pmf: `f[j]` is the mass of each weight-`j` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeablePmf {
    d: usize,
    f: Vec<f64>,
}

impl ExchangeablePmf {
    /// Validates nonnegativity and `Σ C(d, j) f_j = 1` within [`SUM_TOL`].
    pub fn new(f: Vec<f64>) -> Result<Self> {
        if f.len() < 2 {
            return Err(Error::InvalidPmf(format!(
                "an exchangeable pmf needs at least 2 entries (d >= 1), got {}",
                f.len()
            )));
        }
        check_probability_vector(&f, "exchangeable pmf").map_err(Error::InvalidPmf)?;
        let d = f.len() - 1;
        let total: f64 = f.iter().enumerate().map(|(j, v)| binomial(d, j) * v).sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidPmf(format!(
                "exchangeable pmf has total mass {total}, not 1"
            )));
        }
        Ok(Self { d, f })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    /// Mass of a single binary vector, determined by its weight.
    pub fn mass_of_weight(&self, weight: usize) -> f64 {
        self.f.get(weight).copied().unwrap_or(0.0)
    }

    pub fn to_sum_pmf(&self) -> SumPmf {
        map_h(self)
    }
}

/// `p_j = C(d, j) f_j`.
pub fn map_h(f: &ExchangeablePmf) -> SumPmf {
    let d = f.d;
    let probs =
        f.f.iter()
            .enumerate()
            .map(|(j, v)| binomial(d, j) * v)
            .collect();
    SumPmf { d, probs }
}

/// `f_j = p_j / C(d, j)`.
pub fn map_h_inv(py: &SumPmf) -> ExchangeablePmf {
    let d = py.d;
    let f = py
        .probs
        .iter()
        .enumerate()
        .map(|(j, v)| v / binomial(d, j))
        .collect();
    ExchangeablePmf { d, f }
}

/// The `d + 1` vertices of `E_d`: vertex `j` spreads unit mass uniformly over
/// the `C(d, j)` weight-`j` vectors.
pub fn exchangeable_simplex_vertices(d: usize) -> Result<Vec<ExchangeablePmf>> {
    if d == 0 {
        return domain("d must be at least 1");
    }
    Ok((0..=d)
        .map(|j| {
            let mut f = vec![0.0; d + 1];
            f[j] = 1.0 / binomial(d, j);
            ExchangeablePmf { d, f }
        })
        .collect())
}

/// Shape of a vertex of `S_d(p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayKind {
    TwoPoint {
        j1: usize,
        j2: usize,
        mass1: f64,
        mass2: f64,
    },
    PointMass {
        j: usize,
    },
}

/// A vertex of `S_d(p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayDensity {
    d: usize,
    p: f64,
    kind: RayKind,
}

impl RayDensity {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn kind(&self) -> RayKind {
        self.kind
    }

    pub fn support(&self) -> Vec<usize> {
        match self.kind {
            RayKind::TwoPoint { j1, j2, .. } => vec![j1, j2],
            RayKind::PointMass { j } => vec![j],
        }
    }

    pub fn masses(&self) -> Vec<f64> {
        match self.kind {
            RayKind::TwoPoint { mass1, mass2, .. } => vec![mass1, mass2],
            RayKind::PointMass { .. } => vec![1.0],
        }
    }

    /// `(support point, mass)` pairs.
    pub fn atoms(&self) -> impl Iterator<Item = (usize, f64)> {
        let (a, b) = match self.kind {
            RayKind::TwoPoint {
                j1,
                j2,
                mass1,
                mass2,
            } => ((j1, mass1), Some((j2, mass2))),
            RayKind::PointMass { j } => ((j, 1.0), None),
        };
        std::iter::once(a).chain(b)
    }

    pub fn mass_at(&self, y: usize) -> f64 {
        self.atoms()
            .find(|&(j, _)| j == y)
            .map(|(_, m)| m)
            .unwrap_or(0.0)
    }

    /// `E[φ(R)]` in O(1).
    pub fn expect(&self, phi: impl Fn(usize) -> f64) -> f64 {
        self.atoms().map(|(j, m)| m * phi(j)).sum()
    }

    pub fn to_sum_pmf(&self) -> SumPmf {
        let mut probs = vec![0.0; self.d + 1];
        for (j, m) in self.atoms() {
            probs[j] = m;
        }
        SumPmf { d: self.d, probs }
    }

    pub fn to_exchangeable(&self) -> ExchangeablePmf {
        map_h_inv(&self.to_sum_pmf())
    }
}

/// Convex weights over a list of rays.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureWeights {
    weights: Vec<f64>,
}

impl MixtureWeights {
    /// Renormalizes to sum one. Rejects negative, non-finite or all-zero input.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return domain("mixture weights are empty");
        }
        check_probability_vector(&weights, "mixture weights").map_err(Error::Domain)?;
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return domain("mixture weights are all zero");
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(len: usize) -> Result<Self> {
        Self::new(vec![1.0; len])
    }

    /// All mass on index `i`.
    pub fn unit(len: usize, i: usize) -> Result<Self> {
        if i >= len {
            return domain(format!("unit weight index {i} out of range {len}"));
        }
        let mut w = vec![0.0; len];
        w[i] = 1.0;
        Ok(Self { weights: w })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// Controls the integer-`p d` decision in [`enumerate_rays_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RayOptions {
    /// `Some(true)` forces the integer branch (point mass at `round(p d)`),
    /// `Some(false)` forces the two-point-only branch. `None` auto-detects.
    pub integer_pd: Option<bool>,
}

/// How `p d` is represented while building rays.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MeanPosition {
    pd: f64,
    /// `p d = num / den` exactly, when `p` was recognised as a fraction.
    exact: Option<(i128, i128)>,
    integer: bool,
    pub(crate) j1_max: usize,
    pub(crate) j2_min: usize,
}

impl MeanPosition {
    pub(crate) fn new(d: usize, p: f64, opts: RayOptions) -> Result<Self> {
        if d == 0 {
            return domain("d must be at least 1");
        }
        if !(p > 0.0 && p < 1.0) {
            return domain(format!("p must lie in (0, 1), got {p}"));
        }
        let mut pd = p * d as f64;
        let mut exact =
            rationalize(p, MAX_DENOMINATOR).map(|(a, b)| (a as i128 * d as i128, b as i128));
        let detected = match exact {
            Some((num, den)) => num % den == 0,
            None => (pd - pd.round()).abs() <= INTEGER_PD_RTOL * pd.max(1.0),
        };
        let integer = opts.integer_pd.unwrap_or(detected);
        if integer {
            let r = pd.round();
            if r < 1.0 || r > (d - 1) as f64 {
                return domain(format!(
                    "integer branch requested but round(p d) = {r} is not in 1..d-1"
                ));
            }
            pd = r;
            exact = Some((r as i128, 1));
            let k = r as usize;
            return Ok(Self {
                pd,
                exact,
                integer,
                j1_max: k - 1,
                j2_min: k + 1,
            });
        }
        if let Some((num, den)) = exact {
            pd = num as f64 / den as f64;
        }
        // Largest integer strictly below p d, smallest strictly above.
        let j1_max = (pd.ceil() as usize).saturating_sub(1);
        let j2_min = pd.floor() as usize + 1;
        if j2_min > d {
            return domain(format!("p d = {pd} leaves no support point above the mean"));
        }
        Ok(Self {
            pd,
            exact,
            integer,
            j1_max,
            j2_min,
        })
    }

    pub(crate) fn pd(&self) -> f64 {
        self.pd
    }

    pub(crate) fn is_integer(&self) -> bool {
        self.integer
    }

    /// Masses of the two-point ray on `(j1, j2)`.
    fn two_point_masses(&self, j1: usize, j2: usize) -> (f64, f64) {
        match self.exact {
            Some((num, den)) => {
                let span = (j2 - j1) as i128 * den;
                let m1 = j2 as i128 * den - num;
                let m2 = num - j1 as i128 * den;
                (m1 as f64 / span as f64, m2 as f64 / span as f64)
            }
            None => {
                let span = (j2 - j1) as f64;
                ((j2 as f64 - self.pd) / span, (self.pd - j1 as f64) / span)
            }
        }
    }
}

/// All vertices of `S_d(p)` with auto-detected integer `p d`.
pub fn enumerate_rays(d: usize, p: f64) -> Result<Vec<RayDensity>> {
    enumerate_rays_with(d, p, RayOptions::default())
}

pub fn enumerate_rays_with(d: usize, p: f64, opts: RayOptions) -> Result<Vec<RayDensity>> {
    let pos = MeanPosition::new(d, p, opts)?;
    let mut rays = Vec::with_capacity(count_from_position(d, &pos) as usize);
    for j1 in 0..=pos.j1_max {
        for j2 in pos.j2_min..=d {
            rays.push(two_point(d, p, &pos, j1, j2));
        }
    }
    if pos.integer {
        rays.push(RayDensity {
            d,
            p,
            kind: RayKind::PointMass { j: pos.pd as usize },
        });
    }
    Ok(rays)
}

fn two_point(d: usize, p: f64, pos: &MeanPosition, j1: usize, j2: usize) -> RayDensity {
    let (mass1, mass2) = pos.two_point_masses(j1, j2);
    RayDensity {
        d,
        p,
        kind: RayKind::TwoPoint {
            j1,
            j2,
            mass1,
            mass2,
        },
    }
}

/// Builds the single ray with the given support without enumerating the rest.
/// `support` is `[j1, j2]` straddling `p d`, or `[p d]` in the integer case.
pub fn ray_with_support(d: usize, p: f64, support: &[usize]) -> Result<RayDensity> {
    let pos = MeanPosition::new(d, p, RayOptions::default())?;
    match *support {
        [j] if pos.integer && j == pos.pd as usize => Ok(RayDensity {
            d,
            p,
            kind: RayKind::PointMass { j },
        }),
        [j1, j2] if j1 <= pos.j1_max && j2 >= pos.j2_min && j2 <= d => {
            Ok(two_point(d, p, &pos, j1, j2))
        }
        _ => domain(format!(
            "{support:?} is not the support of a ray of S_{d}({p})"
        )),
    }
}

/// `(j1^M + 1)(d − j1^M)` when `p d` is fractional, `d² p (1 − p) + 1` otherwise.
pub fn ray_count(d: usize, p: f64) -> Result<u64> {
    let pos = MeanPosition::new(d, p, RayOptions::default())?;
    Ok(count_from_position(d, &pos))
}

fn count_from_position(d: usize, pos: &MeanPosition) -> u64 {
    if pos.integer {
        let k = pos.pd as u64;
        // d² p (1 − p) = k (d − k) with k = p d.
        k * (d as u64 - k) + 1
    } else {
        (pos.j1_max as u64 + 1) * (d - pos.j1_max) as u64
    }
}

/// `Σ λ_i r_i`.
pub fn mixture_pmf(rays: &[RayDensity], weights: &MixtureWeights) -> Result<SumPmf> {
    if rays.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: rays.len(),
            actual: weights.len(),
        });
    }
    let first = rays
        .first()
        .ok_or_else(|| Error::Domain("no rays given".into()))?;
    if rays.iter().any(|r| r.d != first.d || r.p != first.p) {
        return Err(Error::MixedRays);
    }
    let mut probs = vec![0.0; first.d + 1];
    for (ray, &w) in rays.iter().zip(weights.as_slice()) {
        for (j, m) in ray.atoms() {
            probs[j] += w * m;
        }
    }
    SumPmf::new(probs)
}

/// Writes a pmf of `S_d(p)` as a convex combination of rays by greedily
/// pairing mass below `p d` with mass above it. Returns at most `d + 1`
/// `(ray, weight)` pairs with positive weight.
pub fn decompose_into_rays(py: &SumPmf, p: f64) -> Result<Vec<(RayDensity, f64)>> {
    let d = py.d;
    let pos = MeanPosition::new(d, p, RayOptions::default())?;
    let mean = py.mean();
    if (mean - pos.pd).abs() > 1e-9 * pos.pd.max(1.0) {
        return domain(format!("pmf mean {mean} differs from p d = {}", pos.pd));
    }
    let probs = py.probs();
    let mut below: Vec<(usize, f64)> = (0..=pos.j1_max)
        .filter(|&j| probs[j] > 0.0)
        .map(|j| (j, probs[j]))
        .collect();
    let mut above: Vec<(usize, f64)> = (pos.j2_min..=d)
        .filter(|&j| probs[j] > 0.0)
        .map(|j| (j, probs[j]))
        .collect();
    let mut out = Vec::new();
    if pos.integer {
        let m = probs[pos.pd as usize];
        if m > 0.0 {
            out.push((
                RayDensity {
                    d,
                    p,
                    kind: RayKind::PointMass { j: pos.pd as usize },
                },
                m,
            ));
        }
    }
    let (mut i, mut k) = (0, 0);
    while i < below.len() && k < above.len() {
        let (j1, a) = below[i];
        let (j2, b) = above[k];
        let ray = two_point(d, p, &pos, j1, j2);
        let (m1, m2) = pos.two_point_masses(j1, j2);
        let lam = (a / m1).min(b / m2);
        below[i].1 -= lam * m1;
        above[k].1 -= lam * m2;
        out.push((ray, lam));
        if a / m1 <= b / m2 {
            i += 1;
        } else {
            k += 1;
        }
    }
    Ok(out)
}

/// Expresses `py` as weights over `rays` (which must contain every ray used
/// by [`decompose_into_rays`], e.g. the full enumeration).
pub fn weights_over(rays: &[RayDensity], py: &SumPmf, p: f64) -> Result<MixtureWeights> {
    let parts = decompose_into_rays(py, p)?;
    let mut w = vec![0.0; rays.len()];
    for (ray, lam) in parts {
        let idx = rays
            .iter()
            .position(|r| r.support() == ray.support())
            .ok_or_else(|| Error::Domain(format!("ray {:?} missing from list", ray.support())))?;
        w[idx] += lam;
    }
    MixtureWeights::new(w)
}
