//! Measures on `S_d(p)`: cross and raw moments, correlation and its
//! attainable range, entropic risk, excess loss, quantiles and entropy.
//!
//! Every measure of the form `g(E[φ(Y)])` with `g` increasing is affine (up to
//! `g`) in the mixture weights, so its extremes over the polytope sit on the
//! rays and its exact distribution follows from [`crate::geometry`]. Quantile
//! and entropy are not of that form; use the uniform sampler for those.

use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::geometry::{triangulate_class, ExactCdf, MeasureCdf};
use crate::rays::{enumerate_rays, MeanPosition, RayDensity, RayOptions, SumPmf};

/// Guard for `P(Y ≤ y) ≥ α` against summation noise.
const QUANTILE_TOL: f64 = 1e-12;

/// Coefficient of `p_k` in the `alpha`-th cross moment:
/// `C(d − α, k − α) / C(d, k) = k(k−1)…(k−α+1) / (d(d−1)…(d−α+1))`.
pub fn cross_moment_coefficient(d: usize, alpha: usize, k: usize) -> f64 {
    if k < alpha {
        return 0.0;
    }
    (0..alpha)
        .map(|i| (k - i) as f64 / (d - i) as f64)
        .product()
}

/// `E[X_1 ⋯ X_α]`.
pub fn cross_moment(py: &SumPmf, alpha: usize) -> Result<f64> {
    let d = py.d();
    if alpha == 0 || alpha > d {
        return domain(format!("cross moment order {alpha} outside 1..={d}"));
    }
    Ok(py.expect(|k| cross_moment_coefficient(d, alpha, k)))
}

/// `μ₂` of a single ray in O(1); valid at any `d`.
pub fn ray_mu2(ray: &RayDensity) -> f64 {
    let d = ray.d();
    ray.expect(|k| cross_moment_coefficient(d, 2, k))
}

/// `E[Y^k]`.
pub fn raw_moment(py: &SumPmf, k: u32) -> f64 {
    py.expect(|j| (j as f64).powi(k as i32))
}

/// `E[Y²] − (E[Y] + d(d − 1) μ₂)`; zero up to rounding for every pmf.
pub fn second_moment_identity(py: &SumPmf) -> f64 {
    let d = py.d() as f64;
    let mu2 = if py.d() >= 2 {
        py.expect(|k| cross_moment_coefficient(py.d(), 2, k))
    } else {
        0.0
    };
    raw_moment(py, 2) - (py.mean() + d * (d - 1.0) * mu2)
}

/// `μ₂ = ρ p q + p²`.
pub fn mu2_of_rho(p: f64, rho: f64) -> Result<f64> {
    check_open_unit(p)?;
    Ok(rho * p * (1.0 - p) + p * p)
}

/// `ρ = (μ₂ − p²) / (p q)` for a given mean.
pub fn rho_of_mu2(p: f64, mu2: f64) -> Result<f64> {
    check_open_unit(p)?;
    Ok((mu2 - p * p) / (p * (1.0 - p)))
}

/// Pairwise correlation of the exchangeable vector with sum pmf `py`.
pub fn correlation_of(py: &SumPmf) -> Result<f64> {
    if py.d() < 2 {
        return domain("correlation needs d >= 2");
    }
    let p = py.mean() / py.d() as f64;
    if p <= 1e-15 || p >= 1.0 - 1e-15 {
        return domain(format!("mean p = {p} has zero variance"));
    }
    rho_of_mu2(p, cross_moment(py, 2)?)
}

/// Attainable correlation range over `E_d(p)`.
pub fn correlation_bounds(d: usize, p: f64) -> Result<(f64, f64)> {
    if d < 2 {
        return domain("correlation needs d >= 2");
    }
    let pos = MeanPosition::new(d, p, RayOptions::default())?;
    let df = d as f64;
    let rho_min = if pos.is_integer() {
        -1.0 / (df - 1.0)
    } else {
        let j = pos.j1_max as f64;
        let mu2 = (-j * (j + 1.0) + 2.0 * j * pos.pd()) / (df * (df - 1.0));
        (mu2 - p * p) / (p * (1.0 - p))
    };
    Ok((rho_min, 1.0))
}

/// `(1/γ) log E[e^{−γ Y}]`, computed so that small `γ` keeps full precision.
pub fn entropic_risk(py: &SumPmf, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return domain(format!("gamma must be positive, got {gamma}"));
    }
    let probs = py.probs();
    let lowest = probs.iter().position(|&w| w > 0.0).unwrap_or(0) as f64;
    // E[e^{−γ(Y − m)}] − 1, with m the smallest support point.
    let s: f64 = probs
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(j, &w)| w * (-gamma * (j as f64 - lowest)).exp_m1())
        .sum();
    Ok(-lowest + s.ln_1p() / gamma)
}

/// `E[(Y − k)^+]`.
pub fn excess_loss(py: &SumPmf, k: f64) -> f64 {
    py.expect(|j| (j as f64 - k).max(0.0))
}

/// `inf{y : P(Y ≤ y) ≥ α}`.
pub fn quantile(py: &SumPmf, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("quantile level must be in (0, 1), got {alpha}"));
    }
    let mut cum = 0.0;
    for (j, &w) in py.probs().iter().enumerate() {
        cum += w;
        if cum >= alpha - QUANTILE_TOL {
            return Ok(j);
        }
    }
    Ok(py.d())
}

/// Smallest and largest `α`-quantile over the rays of `S_d(p)`; every pmf in
/// the class has its quantile in between.
pub fn quantile_bounds(d: usize, p: f64, alpha: f64) -> Result<(usize, usize)> {
    let rays = enumerate_rays(d, p)?;
    let qs = rays
        .iter()
        .map(|r| quantile(&r.to_sum_pmf(), alpha))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        *qs.iter().min().expect("at least one ray"),
        *qs.iter().max().expect("at least one ray"),
    ))
}

/// Shannon entropy `−Σ p_i ln p_i` (natural log, `0 ln 0 = 0`).
pub fn entropy(py: &SumPmf) -> f64 {
    -py.probs()
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| w * w.ln())
        .sum::<f64>()
}

fn check_open_unit(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("p must lie in (0, 1), got {p}"));
    }
    Ok(())
}

/// A measure on sum pmfs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureSpec {
    /// `μ_α = E[X_1 ⋯ X_α]`.
    CrossMoment(usize),
    /// `E[Y^k]`.
    RawMoment(u32),
    EntropicRisk(f64),
    ExcessLoss(f64),
    Quantile(f64),
    Entropy,
    Correlation,
}

impl MeasureSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        match *self {
            MeasureSpec::CrossMoment(a) if a == 0 || a > d => {
                domain(format!("cross moment order {a} outside 1..={d}"))
            }
            MeasureSpec::EntropicRisk(g) if !(g > 0.0) || !g.is_finite() => {
                domain(format!("gamma must be positive, got {g}"))
            }
            MeasureSpec::ExcessLoss(k) if !k.is_finite() => {
                domain("excess threshold must be finite")
            }
            MeasureSpec::Quantile(a) if !(a > 0.0 && a < 1.0) => {
                domain(format!("quantile level must be in (0, 1), got {a}"))
            }
            MeasureSpec::Correlation if d < 2 => domain("correlation needs d >= 2"),
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, py: &SumPmf) -> Result<f64> {
        self.validate(py.d())?;
        match *self {
            MeasureSpec::CrossMoment(a) => cross_moment(py, a),
            MeasureSpec::RawMoment(k) => Ok(raw_moment(py, k)),
            MeasureSpec::EntropicRisk(g) => entropic_risk(py, g),
            MeasureSpec::ExcessLoss(k) => Ok(excess_loss(py, k)),
            MeasureSpec::Quantile(a) => quantile(py, a).map(|q| q as f64),
            MeasureSpec::Entropy => Ok(entropy(py)),
            MeasureSpec::Correlation => correlation_of(py),
        }
    }

    /// `true` when the measure is an increasing function of one expectation
    /// (given a fixed mean for [`MeasureSpec::Correlation`]).
    pub fn is_expectation(&self) -> bool {
        !matches!(self, MeasureSpec::Quantile(_) | MeasureSpec::Entropy)
    }

    /// `φ(j)` of the underlying expectation.
    fn integrand(&self, d: usize, j: usize) -> f64 {
        match *self {
            MeasureSpec::CrossMoment(a) => cross_moment_coefficient(d, a, j),
            MeasureSpec::Correlation => cross_moment_coefficient(d, 2, j),
            MeasureSpec::RawMoment(k) => (j as f64).powi(k as i32),
            MeasureSpec::ExcessLoss(k) => (j as f64 - k).max(0.0),
            MeasureSpec::EntropicRisk(g) => (-g * j as f64).exp(),
            MeasureSpec::Quantile(_) | MeasureSpec::Entropy => f64::NAN,
        }
    }

    /// Maps a threshold on the measure to the equivalent threshold on its
    /// expectation: `measure ≤ t ⇔ E[φ] ≤ threshold(t)`.
    fn expectation_threshold(&self, t: f64, p: Option<f64>) -> f64 {
        match *self {
            MeasureSpec::EntropicRisk(g) => (g * t).exp(),
            MeasureSpec::Correlation => {
                let p = p.expect("correlation distribution requires a fixed mean");
                t * p * (1.0 - p) + p * p
            }
            _ => t,
        }
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureSpec::CrossMoment(a) => write!(f, "moment:{a}"),
            MeasureSpec::RawMoment(k) => write!(f, "raw:{k}"),
            MeasureSpec::EntropicRisk(g) => write!(f, "entropic:{g}"),
            MeasureSpec::ExcessLoss(k) => write!(f, "excess:{k}"),
            MeasureSpec::Quantile(a) => write!(f, "quantile:{a}"),
            MeasureSpec::Entropy => write!(f, "entropy"),
            MeasureSpec::Correlation => write!(f, "correlation"),
        }
    }
}

impl FromStr for MeasureSpec {
    type Err = Error;

    /// Accepts `moment:k`, `raw:k`, `entropic:gamma`, `excess:k`,
    /// `quantile:alpha`, `entropy`, `correlation`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("unrecognised measure '{s}'"));
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())
        };
        let int = |a: Option<&str>| -> Result<usize> {
            a.ok_or_else(bad)?.parse::<usize>().map_err(|_| bad())
        };
        Ok(match name {
            "moment" => MeasureSpec::CrossMoment(int(arg)?),
            "raw" => MeasureSpec::RawMoment(int(arg)? as u32),
            "entropic" => MeasureSpec::EntropicRisk(num(arg)?),
            "excess" => MeasureSpec::ExcessLoss(num(arg)?),
            "quantile" => MeasureSpec::Quantile(num(arg)?),
            "entropy" if arg.is_none() => MeasureSpec::Entropy,
            "correlation" | "rho" if arg.is_none() => MeasureSpec::Correlation,
            _ => return Err(bad()),
        })
    }
}

/// Smallest and largest value of an expectation measure over `S_d(p)`, read
/// off the rays.
pub fn ray_extrema(d: usize, p: f64, spec: MeasureSpec) -> Result<(f64, f64)> {
    spec.validate(d)?;
    if !spec.is_expectation() {
        if let MeasureSpec::Quantile(a) = spec {
            let (lo, hi) = quantile_bounds(d, p, a)?;
            return Ok((lo as f64, hi as f64));
        }
        return domain(format!("{spec} does not attain its bounds on the rays"));
    }
    let vals = enumerate_rays(d, p)?
        .iter()
        .map(|r| spec.evaluate(&r.to_sum_pmf()))
        .collect::<Result<Vec<_>>>()?;
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Exact distribution of an expectation measure for a pmf drawn uniformly
/// from `S_d(p)` (or from `S_d` when `p` is `None`).
#[derive(Debug, Clone)]
pub struct MeasureDistribution {
    spec: MeasureSpec,
    p: Option<f64>,
    cdf: ExactCdf,
    min: f64,
    max: f64,
}

impl MeasureDistribution {
    pub fn new(d: usize, p: Option<f64>, spec: MeasureSpec) -> Result<Self> {
        spec.validate(d)?;
        if !spec.is_expectation() {
            return domain(format!(
                "{spec} is not an expectation measure; sample it instead"
            ));
        }
        if spec == MeasureSpec::Correlation && p.is_none() {
            return domain("correlation is affine in the pmf only for a fixed mean");
        }
        let class = triangulate_class(d, p)?;
        let ray_values: Vec<f64> = class
            .vertices
            .iter()
            .map(|v| v.expect(|j| spec.integrand(d, j)))
            .collect();
        let cdf = ExactCdf::new(&class.triangulation, &ray_values)?;
        let measured = class
            .vertices
            .iter()
            .map(|v| spec.evaluate(v))
            .collect::<Result<Vec<_>>>()?;
        let min = measured.iter().copied().fold(f64::INFINITY, f64::min);
        let max = measured.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            spec,
            p,
            cdf,
            min,
            max,
        })
    }

    pub fn spec(&self) -> MeasureSpec {
        self.spec
    }

    /// Range of the measure over the class (attained at rays).
    pub fn support(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t < self.min {
            return 0.0;
        }
        if t >= self.max {
            return 1.0;
        }
        self.cdf.cdf(self.spec.expectation_threshold(t, self.p))
    }

    pub fn tabulate(&self, grid: &[f64]) -> Result<MeasureCdf> {
        use rayon::prelude::*;
        if grid.windows(2).any(|w| w[1] < w[0]) {
            return domain("grid is not sorted");
        }
        let mut values: Vec<f64> = grid.par_iter().map(|&t| self.cdf(t)).collect();
        for i in 1..values.len() {
            values[i] = values[i].max(values[i - 1]);
        }
        MeasureCdf::new(grid.to_vec(), values, self.spec.to_string())
    }

    /// Forward-difference density with exact CDF evaluations.
    pub fn pdf(&self, grid: &[f64], delta: f64) -> Result<Vec<f64>> {
        if !(delta > 0.0) {
            return domain(format!("delta must be positive, got {delta}"));
        }
        Ok(grid
            .iter()
            .map(|&t| (self.cdf(t + delta) - self.cdf(t)) / delta)
            .collect())
    }

    /// `(max − min) / 10000`, the default finite-difference step.
    pub fn default_delta(&self) -> f64 {
        (self.max - self.min) / 10_000.0
    }
}
