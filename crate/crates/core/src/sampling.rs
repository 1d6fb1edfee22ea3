//! Random binary vectors from ray mixtures and comparison models, and
//! uniform sampling of pmfs from the polytope.
//!
//! Every draw `i` uses its own ChaCha8 stream `(seed, i)`, so results do not
//! depend on the number of threads or on the order in which draws run.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::geometry::{triangulate_class, MeasureCdf};
use crate::measures::{correlation_bounds, correlation_of, ray_mu2, rho_of_mu2, MeasureSpec};
use crate::rays::{
    enumerate_rays, ray_with_support, MeanPosition, MixtureWeights, RayDensity, RayKind,
    RayOptions, SumPmf,
};

/// Above this `d` the CLI defaults to sums only.
pub const SUM_ONLY_DEFAULT_ABOVE: usize = 10_000;

fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Keep the full binary vectors.
    Full,
    /// Keep only `Y = Σ X_i`.
    SumOnly,
}

/// Output of a sampler. Full rows are stored as sorted positions of the ones.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    d: usize,
    seed: u64,
    sums: Vec<usize>,
    rows: Option<Vec<Vec<u32>>>,
}

impl SampleBatch {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.sums.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> SampleMode {
        if self.rows.is_some() {
            SampleMode::Full
        } else {
            SampleMode::SumOnly
        }
    }

    pub fn sums(&self) -> &[usize] {
        &self.sums
    }

    /// One-positions of each row (Full mode only).
    pub fn rows(&self) -> Option<&[Vec<u32>]> {
        self.rows.as_deref()
    }

    /// Row `i` as a dense 0/1 vector (Full mode only).
    pub fn dense_row(&self, i: usize) -> Option<Vec<u8>> {
        let ones = self.rows.as_ref()?.get(i)?;
        let mut row = vec![0u8; self.d];
        for &k in ones {
            row[k as usize] = 1;
        }
        Some(row)
    }

    /// `(N_0, …, N_d)`: how many draws have each sum.
    pub fn sum_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.d + 1];
        for &y in &self.sums {
            counts[y] += 1;
        }
        counts
    }

    /// Moment estimates from the sums.
    pub fn summary(&self) -> SampleSummary {
        SampleSummary::from_sums(self.d, &self.sums)
    }
}

/// Estimates of `p`, `μ₂` and `ρ` from observed sums, using the unbiased
/// per-draw estimators `Y/d` and `Y(Y − 1)/(d(d − 1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub p: f64,
    pub p_se: f64,
    pub mu2: f64,
    pub mu2_se: f64,
    /// `NaN` when `d < 2` or the estimated `p` is 0 or 1.
    pub rho: f64,
}

impl SampleSummary {
    pub fn from_sums(d: usize, sums: &[usize]) -> Self {
        let n = sums.len() as f64;
        let df = d as f64;
        let (p, p_se) = mean_and_se(sums.iter().map(|&y| y as f64 / df), n);
        let (mu2, mu2_se) = if d >= 2 {
            mean_and_se(
                sums.iter()
                    .map(|&y| (y as f64) * (y as f64 - 1.0) / (df * (df - 1.0))),
                n,
            )
        } else {
            (f64::NAN, f64::NAN)
        };
        let rho = rho_of_mu2(p, mu2).unwrap_or(f64::NAN);
        Self {
            p,
            p_se,
            mu2,
            mu2_se,
            rho,
        }
    }
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone, n: f64) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Runs `draw` for every index in parallel and collects sums and rows.
/// `draw` returns the sum and, when asked for, the one-positions.
fn collect_batch<F>(d: usize, n: usize, seed: u64, mode: SampleMode, draw: F) -> SampleBatch
where
    F: Fn(&mut ChaCha8Rng, &mut Vec<u32>, bool) -> (usize, Option<Vec<u32>>) + Sync,
{
    let full = mode == SampleMode::Full;
    let out: Vec<(usize, Option<Vec<u32>>)> = (0..n as u64)
        .into_par_iter()
        .map_init(
            || {
                if full {
                    (0..d as u32).collect()
                } else {
                    Vec::new()
                }
            },
            |scratch, i| {
                let mut rng = draw_rng(seed, i);
                draw(&mut rng, scratch, full)
            },
        )
        .collect();
    let (sums, rows): (Vec<usize>, Vec<Option<Vec<u32>>>) = out.into_iter().unzip();
    SampleBatch {
        d,
        seed,
        sums,
        rows: if full {
            Some(rows.into_iter().map(|r| r.unwrap_or_default()).collect())
        } else {
            None
        },
    }
}

/// Uniformly random `k`-subset of `0..d` by a partial Fisher–Yates shuffle of
/// `scratch` (which must hold a permutation of `0..d`). The shuffle is undone
/// afterwards so the scratch array can be reused; cost is O(k).
pub(crate) fn random_subset(rng: &mut impl Rng, scratch: &mut [u32], k: usize) -> Vec<u32> {
    let d = scratch.len();
    let mut swaps = Vec::with_capacity(k);
    for i in 0..k {
        let j = rng.random_range(i..d);
        scratch.swap(i, j);
        swaps.push(j);
    }
    let mut chosen = scratch[..k].to_vec();
    for (i, &j) in swaps.iter().enumerate().rev() {
        scratch.swap(i, j);
    }
    chosen.sort_unstable();
    chosen
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cum: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    // Rounding must never route a draw to a zero-weight entry.
    if let Some(last) = weights.iter().rposition(|&w| w > 0.0) {
        cum[last..].iter_mut().for_each(|c| *c = f64::INFINITY);
    }
    cum
}

fn pick(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

/// Draws from `Σ λ_k r_k`: choose a ray, then one of its support points, then
/// (Full mode) a uniformly random binary vector of that weight.
pub fn sample_rays(
    rays: &[RayDensity],
    weights: &MixtureWeights,
    n: usize,
    seed: u64,
    mode: SampleMode,
) -> Result<SampleBatch> {
    if rays.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: rays.len(),
            actual: weights.len(),
        });
    }
    let Some(first) = rays.first() else {
        return domain("no rays to sample from");
    };
    let d = first.d();
    if rays.iter().any(|r| r.d() != d || r.p() != first.p()) {
        return Err(Error::MixedRays);
    }
    let cum = cumulative(weights.as_slice());
    Ok(collect_batch(d, n, seed, mode, |rng, scratch, full| {
        let ray = &rays[pick(&cum, rng.random::<f64>())];
        let y = match ray.kind() {
            RayKind::TwoPoint { j1, j2, mass1, .. } => {
                if rng.random::<f64>() < mass1 {
                    j1
                } else {
                    j2
                }
            }
            RayKind::PointMass { j } => j,
        };
        let row = full.then(|| random_subset(rng, scratch, y));
        (y, row)
    }))
}

/// [`sample_rays`] over all rays of `E_d(p)`.
pub fn sample_mixture(
    d: usize,
    p: f64,
    weights: &MixtureWeights,
    n: usize,
    seed: u64,
    mode: SampleMode,
) -> Result<SampleBatch> {
    sample_rays(&enumerate_rays(d, p)?, weights, n, seed, mode)
}

/// Draws from the exchangeable law with sum pmf `py`: `Y ~ py`, then a
/// uniformly random vector of weight `Y`.
pub fn sample_exchangeable(py: &SumPmf, n: usize, seed: u64, mode: SampleMode) -> SampleBatch {
    let cum = cumulative(py.probs());
    collect_batch(py.d(), n, seed, mode, |rng, scratch, full| {
        let y = pick(&cum, rng.random::<f64>());
        (y, full.then(|| random_subset(rng, scratch, y)))
    })
}

/// Two-ray mixture `λ r_min + (1 − λ) r_max` hitting a target correlation.
#[derive(Debug, Clone)]
pub struct CorrelationFamily {
    /// Ray with the smallest `μ₂` (and correlation `rho_min`).
    pub min_ray: RayDensity,
    /// The `{0, d}` ray (correlation 1).
    pub max_ray: RayDensity,
    pub rho_min: f64,
    /// Weight on `min_ray`.
    pub lambda: f64,
}

impl CorrelationFamily {
    /// Builds the two rays directly, so it works for any `d`.
    pub fn new(d: usize, p: f64, rho: f64) -> Result<Self> {
        if d < 2 {
            return domain("correlation needs d >= 2");
        }
        let pos = MeanPosition::new(d, p, RayOptions::default())?;
        let min_support: Vec<usize> = if pos.is_integer() {
            vec![pos.j1_max + 1]
        } else {
            vec![pos.j1_max, pos.j2_min]
        };
        let min_ray = ray_with_support(d, p, &min_support)?;
        let max_ray = ray_with_support(d, p, &[0, d])?;
        let rho_min = rho_of_mu2(p, ray_mu2(&min_ray))?;
        let (bound, _) = correlation_bounds(d, p)?;
        if !(rho >= bound - 1e-12 && rho <= 1.0 + 1e-12) {
            return domain(format!(
                "correlation {rho} outside the attainable range [{bound}, 1]"
            ));
        }
        let lambda = ((1.0 - rho) / (1.0 - rho_min)).clamp(0.0, 1.0);
        Ok(Self {
            min_ray,
            max_ray,
            rho_min,
            lambda,
        })
    }

    pub fn rays(&self) -> [RayDensity; 2] {
        [self.min_ray, self.max_ray]
    }

    pub fn weights(&self) -> MixtureWeights {
        MixtureWeights::new(vec![self.lambda, 1.0 - self.lambda]).expect("lambda lies in [0, 1]")
    }

    /// The same mixture as weights over `enumerate_rays(d, p)`.
    pub fn weights_over_all(&self) -> Result<MixtureWeights> {
        let rays = enumerate_rays(self.min_ray.d(), self.min_ray.p())?;
        let mut w = vec![0.0; rays.len()];
        for (ray, lambda) in [
            (&self.min_ray, self.lambda),
            (&self.max_ray, 1.0 - self.lambda),
        ] {
            let idx = rays
                .iter()
                .position(|r| r.support() == ray.support())
                .expect("family rays are rays of the class");
            w[idx] += lambda;
        }
        MixtureWeights::new(w)
    }

    pub fn sample(&self, n: usize, seed: u64, mode: SampleMode) -> Result<SampleBatch> {
        sample_rays(&self.rays(), &self.weights(), n, seed, mode)
    }
}

/// Weights over `enumerate_rays(d, p)` of the two-ray family with correlation `rho`.
pub fn correlation_family(d: usize, p: f64, rho: f64) -> Result<MixtureWeights> {
    CorrelationFamily::new(d, p, rho)?.weights_over_all()
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("p must lie in (0, 1), got {p}"));
    }
    Ok(())
}

/// `X_i = Z` if `U_i = 1`, else `Y_i`, with `U_i ~ B(√ρ)` and `Z, Y_i ~ B(p)`.
pub fn sample_one_factor(
    d: usize,
    p: f64,
    rho: f64,
    n: usize,
    seed: u64,
    mode: SampleMode,
) -> Result<SampleBatch> {
    check_p(p)?;
    if !(0.0..=1.0).contains(&rho) {
        return domain(format!(
            "one-factor correlation must be in [0, 1], got {rho}"
        ));
    }
    let s = rho.sqrt();
    Ok(collect_batch(d, n, seed, mode, |rng, _, full| {
        let z = rng.random_bool(p);
        let mut ones = full.then(Vec::new);
        let mut y = 0;
        for i in 0..d {
            let x = if rng.random_bool(s) {
                z
            } else {
                rng.random_bool(p)
            };
            if x {
                y += 1;
                if let Some(o) = ones.as_mut() {
                    o.push(i as u32);
                }
            }
        }
        (y, ones)
    }))
}

/// `(a, b)` of the beta mixture with mean `p` and correlation `rho`.
pub fn beta_mixture_params(p: f64, rho: f64) -> Result<(f64, f64)> {
    check_p(p)?;
    if !(rho > 0.0) {
        return domain(format!("beta mixture needs rho > 0, got {rho}"));
    }
    let q = 1.0 - p;
    let mu2 = rho * p * q + p * p;
    if mu2 >= p {
        return domain(format!("rho = {rho} gives a degenerate beta mixture"));
    }
    let var = mu2 - p * p;
    Ok((p * (p - mu2) / var, q * (p - mu2) / var))
}

/// `Ψ ~ Beta(a, b)`, then `d` independent `B(Ψ)` coordinates.
pub fn sample_beta_mixture(
    d: usize,
    a: f64,
    b: f64,
    n: usize,
    seed: u64,
    mode: SampleMode,
) -> Result<SampleBatch> {
    let beta = Beta::new(a, b).map_err(|e| Error::Domain(format!("beta({a}, {b}): {e}")))?;
    Ok(collect_batch(d, n, seed, mode, |rng, _, full| {
        let psi: f64 = beta.sample(rng);
        let mut ones = full.then(Vec::new);
        let mut y = 0;
        for i in 0..d {
            if rng.random::<f64>() < psi {
                y += 1;
                if let Some(o) = ones.as_mut() {
                    o.push(i as u32);
                }
            }
        }
        (y, ones)
    }))
}

/// Flat Dirichlet weights (normalized unit exponentials).
fn dirichlet_flat(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Uniformly random mixture weights of length `k`.
pub fn random_weights(k: usize, seed: u64) -> Result<MixtureWeights> {
    if k == 0 {
        return domain("need at least one weight");
    }
    MixtureWeights::new(dirichlet_flat(&mut draw_rng(seed, 0), k))
}

/// `n` pmfs drawn uniformly from `S_d(p)`, or from all of `S_d` when `p` is
/// `None`.
pub fn sample_uniform_pmfs(d: usize, p: Option<f64>, n: usize, seed: u64) -> Result<Vec<SumPmf>> {
    let class = triangulate_class(d, p)?;
    let tri = &class.triangulation;
    let cum = cumulative(tri.probs());
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = draw_rng(seed, i);
            let simplex = &tri.simplices()[pick(&cum, rng.random::<f64>())];
            let w = dirichlet_flat(&mut rng, simplex.len());
            let mut probs = vec![0.0; d + 1];
            for (&v, wv) in simplex.iter().zip(&w) {
                for (pj, vj) in probs.iter_mut().zip(class.vertices[v].probs()) {
                    *pj += wv * vj;
                }
            }
            SumPmf::normalized(probs)
        })
        .collect()
}

/// The measure evaluated on `n` uniformly drawn pmfs, sorted ascending.
pub fn sample_measure_values(
    d: usize,
    p: Option<f64>,
    spec: MeasureSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    spec.validate(d)?;
    let mut values = sample_uniform_pmfs(d, p, n, seed)?
        .par_iter()
        .map(|py| spec.evaluate(py))
        .collect::<Result<Vec<_>>>()?;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Empirical CDF of a measure under uniform sampling; the grid holds the
/// distinct sampled values.
pub fn empirical_measure_distribution(
    d: usize,
    p: Option<f64>,
    spec: MeasureSpec,
    n: usize,
    seed: u64,
) -> Result<MeasureCdf> {
    if n == 0 {
        return domain("need at least one sample");
    }
    let values = sample_measure_values(d, p, spec, n, seed)?;
    empirical_cdf(&values, spec.to_string())
}

/// Step CDF of sorted samples.
pub fn empirical_cdf(sorted: &[f64], name: impl Into<String>) -> Result<MeasureCdf> {
    let n = sorted.len() as f64;
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        if grid.last() == Some(&v) {
            *values.last_mut().expect("paired with grid") = (i + 1) as f64 / n;
        } else {
            grid.push(v);
            values.push((i + 1) as f64 / n);
        }
    }
    MeasureCdf::new(grid, values, name)
}

/// Kolmogorov–Smirnov distance between sorted samples and a continuous CDF.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// `(p, ρ)` of pmfs drawn uniformly from all of `S_d`; pmfs with `p` in
/// `{0, 1}` (probability zero) are skipped.
pub fn sample_mean_correlation(d: usize, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    if d < 2 {
        return domain("correlation needs d >= 2");
    }
    Ok(sample_uniform_pmfs(d, None, n, seed)?
        .iter()
        .filter_map(|py| {
            correlation_of(py)
                .ok()
                .map(|rho| (py.mean() / d as f64, rho))
        })
        .collect())
}
