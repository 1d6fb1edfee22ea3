//! Maximum likelihood in `E_d` and `E_d(p)`, and the likelihood-ratio test of
//! exchangeability against the unrestricted multinomial on `2^d` cells.

use std::collections::HashMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{domain, Error, Result};
use crate::rays::{
    decompose_into_rays, enumerate_rays, weights_over, ExchangeablePmf, MixtureWeights, RayDensity,
    SumPmf,
};
use crate::util::{binomial, ln_binomial};

/// Largest `d` for which individual cells are tracked.
pub const MAX_CELL_DIM: usize = 64;

/// Expected cell counts below this trigger a warning in [`glr_test`].
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

/// Observed binary vectors: counts per sum and, for `d ≤ 64`, per cell (bit
/// `i` of the key is coordinate `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct CountData {
    d: usize,
    sum_counts: Vec<u64>,
    cells: Option<HashMap<u64, u64>>,
}

impl CountData {
    /// From dense 0/1 rows.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidData("no observations".into()));
        };
        let d = first.as_ref().len();
        if d == 0 {
            return Err(Error::InvalidData("rows are empty".into()));
        }
        let mut sum_counts = vec![0u64; d + 1];
        let mut cells = (d <= MAX_CELL_DIM).then(HashMap::new);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::InvalidData(format!(
                    "row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
            let mut key = 0u64;
            let mut y = 0;
            for (k, &x) in row.iter().enumerate() {
                match x {
                    0 => {}
                    1 => {
                        y += 1;
                        if k < 64 {
                            key |= 1 << k;
                        }
                    }
                    _ => {
                        return Err(Error::InvalidData(format!(
                            "row {i} has non-binary entry {x}"
                        )))
                    }
                }
            }
            sum_counts[y] += 1;
            if let Some(c) = cells.as_mut() {
                *c.entry(key).or_insert(0) += 1;
            }
        }
        Ok(Self {
            d,
            sum_counts,
            cells,
        })
    }

    /// From rows given as positions of their ones.
    pub fn from_one_positions(d: usize, rows: &[Vec<u32>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidData("no observations".into()));
        }
        let mut sum_counts = vec![0u64; d + 1];
        let mut cells = (d <= MAX_CELL_DIM).then(HashMap::new);
        for row in rows {
            if row.iter().any(|&k| k as usize >= d) || row.len() > d {
                return Err(Error::InvalidData(format!("row {row:?} outside 0..{d}")));
            }
            sum_counts[row.len()] += 1;
            if let Some(c) = cells.as_mut() {
                let key = row.iter().fold(0u64, |acc, &k| acc | 1 << k);
                *c.entry(key).or_insert(0) += 1;
            }
        }
        Ok(Self {
            d,
            sum_counts,
            cells,
        })
    }

    /// Only the sum counts `(N_0, …, N_d)`; enough for the MLEs but not for
    /// the likelihood-ratio test.
    pub fn from_sum_counts(sum_counts: Vec<u64>) -> Result<Self> {
        if sum_counts.len() < 2 {
            return Err(Error::InvalidData("need counts for d >= 1".into()));
        }
        if sum_counts.iter().sum::<u64>() == 0 {
            return Err(Error::InvalidData("no observations".into()));
        }
        Ok(Self {
            d: sum_counts.len() - 1,
            sum_counts,
            cells: None,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> u64 {
        self.sum_counts.iter().sum()
    }

    pub fn sum_counts(&self) -> &[u64] {
        &self.sum_counts
    }

    pub fn cells(&self) -> Option<&HashMap<u64, u64>> {
        self.cells.as_ref()
    }
}

/// `Σ N_j log p_j` with `0 log 0 = 0`.
pub fn loglik_sums(counts: &[u64], py: &SumPmf) -> f64 {
    counts
        .iter()
        .zip(py.probs())
        .filter(|(&n, _)| n > 0)
        .map(|(&n, &p)| n as f64 * p.ln())
        .sum()
}

/// Cell-level log-likelihood `Σ_cells N_c log f_{w(c)} = Σ_j N_j log f_j`.
pub fn loglik(data: &CountData, f: &ExchangeablePmf) -> f64 {
    data.sum_counts
        .iter()
        .zip(f.values())
        .filter(|(&n, _)| n > 0)
        .map(|(&n, &fj)| n as f64 * fj.ln())
        .sum()
}

/// MLE over all of `E_d`: `f̂_j = (N_j / n) / C(d, j)`.
pub fn mle_unconstrained(data: &CountData) -> Result<ExchangeablePmf> {
    let n = data.n() as f64;
    let d = data.d;
    let f = data
        .sum_counts
        .iter()
        .enumerate()
        .map(|(j, &c)| c as f64 / n / binomial(d, j))
        .collect();
    ExchangeablePmf::new(f)
}

/// MLE over `E_d(p)`.
#[derive(Debug, Clone)]
pub struct FixedMeanMle {
    /// `p̂` on sums.
    pub pmf: SumPmf,
    /// Multiplier of the mean constraint.
    pub multiplier: f64,
    /// One representation `p̂ = Σ λ_k r_k` with positive weights.
    pub components: Vec<(RayDensity, f64)>,
    pub p: f64,
}

impl FixedMeanMle {
    pub fn exchangeable(&self) -> ExchangeablePmf {
        self.pmf.to_exchangeable()
    }

    /// The representation as weights over `enumerate_rays(d, p)`.
    pub fn weights_over_all(&self) -> Result<(Vec<RayDensity>, MixtureWeights)> {
        let rays = enumerate_rays(self.pmf.d(), self.p)?;
        let w = weights_over(&rays, &self.pmf, self.p)?;
        Ok((rays, w))
    }
}

/// Maximizes `Σ N_j log p_j` subject to `Σ p_j = 1`, `Σ j p_j = p d`.
///
/// Stationarity gives `p_j = N_j / (n + ν (j − p d))` for observed `j`, with
/// `ν` the root of the decreasing function
/// `g(ν) = Σ N_j (j − p d) / (n + ν (j − p d))` on
/// `[−n / (d − p d), n / (p d)]`. When `g` has no root there, the optimum
/// puts the leftover mass on the unobserved endpoint `0` or `d`.
pub fn mle_fixed_p(data: &CountData, p: f64) -> Result<FixedMeanMle> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("p must lie in (0, 1), got {p}"));
    }
    let d = data.d;
    let n = data.n() as f64;
    let pd = p * d as f64;
    let obs: Vec<(usize, f64)> = data
        .sum_counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(j, &c)| (j, c as f64))
        .collect();
    let g = |nu: f64| -> f64 {
        obs.iter()
            .map(|&(j, c)| {
                let s = j as f64 - pd;
                c * s / (n + nu * s)
            })
            .sum()
    };
    let lo = -n / (d as f64 - pd);
    let hi = n / pd;
    let n0 = data.sum_counts[0];
    let nd = data.sum_counts[d];

    let (nu, slack) = if n0 == 0 && g(hi) >= 0.0 {
        (hi, Some(0))
    } else if nd == 0 && g(lo) <= 0.0 {
        (lo, Some(d))
    } else {
        let dg = |nu: f64| -> f64 {
            -obs.iter()
                .map(|&(j, c)| {
                    let s = j as f64 - pd;
                    c * s * s / ((n + nu * s) * (n + nu * s))
                })
                .sum::<f64>()
        };
        (find_root(g, dg, lo, hi), None)
    };

    let mut probs = vec![0.0; d + 1];
    for &(j, c) in &obs {
        probs[j] = c / (n + nu * (j as f64 - pd));
    }
    if let Some(j) = slack {
        let rest: f64 = probs.iter().sum();
        probs[j] = (1.0 - rest).max(0.0);
    }
    let pmf = polish_onto_constraints(probs, pd)?;
    let components = decompose_into_rays(&pmf, p)?;
    Ok(FixedMeanMle {
        pmf,
        multiplier: nu,
        components,
        p,
    })
}

/// Root of a decreasing `g` on `(lo, hi)` by Newton steps safeguarded with
/// bisection; `dg` is its derivative.
fn find_root(g: impl Fn(f64) -> f64, dg: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let mut x = 0.0;
    for _ in 0..200 {
        let gx = g(x);
        if gx > 0.0 {
            a = x;
        } else if gx < 0.0 {
            b = x;
        } else {
            return x;
        }
        let newton = x - gx / dg(x);
        let next = if newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if next == x || b - a <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            break;
        }
        x = next;
    }
    x
}

/// Removes the last rounding drift in the two linear constraints by moving
/// mass between the two positive entries nearest below and above `p d`.
fn polish_onto_constraints(mut probs: Vec<f64>, pd: f64) -> Result<SumPmf> {
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|x| *x /= total);
    let mean: f64 = probs.iter().enumerate().map(|(j, &x)| j as f64 * x).sum();
    let err = mean - pd;
    if err != 0.0 {
        // Shift mass δ from j_hi to j_lo (or back) to fix the mean.
        let lo = (0..probs.len())
            .rev()
            .find(|&j| (j as f64) < pd && probs[j] > 0.0);
        let hi = (0..probs.len()).find(|&j| (j as f64) > pd && probs[j] > 0.0);
        if let (Some(lo), Some(hi)) = (lo, hi) {
            let delta = err / (hi - lo) as f64;
            if probs[hi] >= delta && probs[lo] >= -delta {
                probs[hi] -= delta;
                probs[lo] += delta;
            }
        }
    }
    SumPmf::new(probs)
}

/// Null hypothesis for [`glr_test`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NullHypothesis {
    Exchangeable,
    ExchangeableWithMean(f64),
}

impl NullHypothesis {
    /// `2^d − 1 − dim`: `dim = d` for `E_d`, `d − 1` for `E_d(p)`.
    pub fn degrees_of_freedom(&self, d: usize) -> Result<u64> {
        if d == 0 || d >= 64 {
            return domain(format!("cannot form 2^d cells for d = {d}"));
        }
        let cells = (1u64 << d) - 1;
        Ok(match self {
            NullHypothesis::Exchangeable => cells - d as u64,
            NullHypothesis::ExchangeableWithMean(_) => cells - (d as u64 - 1),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlrResult {
    /// `Λ(N)`; may underflow to 0 for very large statistics.
    pub lambda_stat: f64,
    /// `−2 log Λ`.
    pub neg2log: f64,
    pub df: u64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    /// `n · min_j f̂_j`: smallest expected count of any cell under the null.
    pub min_expected_count: f64,
    pub warning: Option<String>,
}

/// Likelihood-ratio test of the null against the unrestricted multinomial on
/// the `2^d` cells; unobserved cells contribute nothing.
pub fn glr_test(data: &CountData, h0: NullHypothesis, alpha: f64) -> Result<GlrResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must be in (0, 1), got {alpha}"));
    }
    let d = data.d;
    let df = h0.degrees_of_freedom(d)?;
    let Some(cells) = data.cells() else {
        return Err(Error::InvalidData(
            "the likelihood-ratio test needs per-cell counts".into(),
        ));
    };
    let f_hat = match h0 {
        NullHypothesis::Exchangeable => mle_unconstrained(data)?,
        NullHypothesis::ExchangeableWithMean(p) => mle_fixed_p(data, p)?.exchangeable(),
    };
    let n = data.n() as f64;
    // log f̂_j through log p̂_j − log C(d, j) keeps precision for large d.
    let py = f_hat.to_sum_pmf();
    let log_f = |j: usize| py.probs()[j].ln() - ln_binomial(d, j);
    let log_lambda: f64 = cells
        .iter()
        .map(|(&key, &c)| {
            let c = c as f64;
            c * (log_f(key.count_ones() as usize) - (c / n).ln())
        })
        .sum();
    let neg2log = (-2.0 * log_lambda).max(0.0);
    // With no free cells (d = 1 under plain exchangeability) the null is
    // saturated and the statistic is identically zero.
    let p_value = if df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64)
            .map_err(|e| Error::Domain(e.to_string()))?
            .sf(neg2log)
            .clamp(0.0, 1.0)
    };
    let min_expected_count = f_hat
        .values()
        .iter()
        .map(|&f| n * f)
        .fold(f64::INFINITY, f64::min);
    let warning = (min_expected_count < MIN_EXPECTED_COUNT).then(|| {
        format!(
            "smallest expected cell count is {min_expected_count:.3} (< {MIN_EXPECTED_COUNT}); \
             the chi-square approximation may be poor"
        )
    });
    Ok(GlrResult {
        lambda_stat: log_lambda.exp(),
        neg2log,
        df,
        p_value,
        alpha,
        reject: p_value < alpha,
        min_expected_count,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells_d2(c: [u64; 4]) -> CountData {
        // Cells 00, 01, 10, 11.
        let mut rows: Vec<[u8; 2]> = Vec::new();
        for (pattern, &k) in [[0, 0], [0, 1], [1, 0], [1, 1]].iter().zip(&c) {
            rows.extend(std::iter::repeat_n(*pattern, k as usize));
        }
        CountData::from_rows(&rows).unwrap()
    }

    #[test]
    fn counts_from_rows() {
        let data = CountData::from_rows(&[[0u8, 0], [1, 1], [1, 1]]).unwrap();
        assert_eq!(data.sum_counts(), &[1, 0, 2]);
        let cells = data.cells().unwrap();
        assert_eq!(cells.get(&0), Some(&1));
        assert_eq!(cells.get(&3), Some(&2));
        assert_eq!(cells.len(), 2);
        assert!(CountData::from_rows::<[u8; 2]>(&[]).is_err());
        assert!(CountData::from_rows(&[[0u8, 2]]).is_err());
        assert!(CountData::from_rows(&[vec![0u8, 1], vec![1]]).is_err());
        let same = CountData::from_one_positions(2, &[vec![], vec![0, 1], vec![0, 1]]).unwrap();
        assert_eq!(same, data);
    }

    #[test]
    fn unconstrained_mle_formula() {
        let data = CountData::from_sum_counts(vec![10, 40, 40, 10]).unwrap();
        let f = mle_unconstrained(&data).unwrap();
        let want = [0.1, 0.4 / 3.0, 0.4 / 3.0, 0.1];
        for (a, b) in f.values().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let unit = mle_unconstrained(&CountData::from_sum_counts(vec![0, 0, 7]).unwrap()).unwrap();
        assert_eq!(unit.values(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn fixed_mean_mle_recovers_feasible_pmf() {
        // Counts proportional to (0.2, 0.4, 0.4): mean 1.2 = 0.6 · 2.
        let data = CountData::from_sum_counts(vec![20, 40, 40]).unwrap();
        let m = mle_fixed_p(&data, 0.6).unwrap();
        for (a, b) in m.pmf.probs().iter().zip([0.2, 0.4, 0.4]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(m.multiplier.abs() < 1e-9);
    }

    #[test]
    fn fixed_mean_mle_two_cell_closed_form() {
        for c in [
            [40u64, 20, 20, 20],
            [3, 0, 5, 9],
            [0, 4, 4, 0],
            [5, 0, 0, 1],
        ] {
            let data = cells_d2(c);
            let n = c.iter().sum::<u64>() as f64;
            let m = mle_fixed_p(&data, 0.5).unwrap();
            let (rays, w) = m.weights_over_all().unwrap();
            for (ray, &lam) in rays.iter().zip(w.as_slice()) {
                let want = if ray.support() == vec![0, 2] {
                    (c[0] + c[3]) as f64 / n
                } else {
                    (c[1] + c[2]) as f64 / n
                };
                assert!((lam - want).abs() < 1e-15, "{c:?}");
            }
        }
    }

    #[test]
    fn fixed_mean_mle_boundary_cases() {
        // Only j = 0 observed: the rest of the mass must sit at d.
        let m = mle_fixed_p(&CountData::from_sum_counts(vec![10, 0, 0, 0]).unwrap(), 0.4).unwrap();
        for (a, b) in m.pmf.probs().iter().zip([0.6, 0.0, 0.0, 0.4]) {
            assert!((a - b).abs() < 1e-12);
        }
        // Only j = 3 observed.
        let m = mle_fixed_p(&CountData::from_sum_counts(vec![0, 0, 0, 10]).unwrap(), 0.4).unwrap();
        for (a, b) in m.pmf.probs().iter().zip([0.6, 0.0, 0.0, 0.4]) {
            assert!((a - b).abs() < 1e-12);
        }
        // Mass only at pd.
        let m = mle_fixed_p(&CountData::from_sum_counts(vec![0, 5, 0]).unwrap(), 0.5).unwrap();
        assert_eq!(m.pmf.probs(), &[0.0, 1.0, 0.0]);
        assert!(mle_fixed_p(&CountData::from_sum_counts(vec![1, 1]).unwrap(), 1.0).is_err());
    }

    #[test]
    fn glr_degrees_of_freedom() {
        assert_eq!(
            NullHypothesis::ExchangeableWithMean(0.5)
                .degrees_of_freedom(5)
                .unwrap(),
            27
        );
        assert_eq!(
            NullHypothesis::Exchangeable.degrees_of_freedom(5).unwrap(),
            26
        );
        assert_eq!(
            NullHypothesis::Exchangeable.degrees_of_freedom(2).unwrap(),
            1
        );
        assert!(NullHypothesis::Exchangeable.degrees_of_freedom(64).is_err());
    }

    #[test]
    fn glr_hand_computed() {
        let r = glr_test(
            &cells_d2([40, 20, 20, 20]),
            NullHypothesis::ExchangeableWithMean(0.5),
            0.05,
        )
        .unwrap();
        let want = 2.0 * (40.0 * (0.4f64 / 0.3).ln() + 20.0 * (0.2f64 / 0.3).ln());
        assert!((r.neg2log - want).abs() < 1e-9);
        assert!((r.neg2log - 6.796).abs() < 1e-3);
        assert_eq!(r.df, 2);
        assert!(r.reject);
        let flat = glr_test(
            &cells_d2([25, 25, 25, 25]),
            NullHypothesis::ExchangeableWithMean(0.5),
            0.05,
        )
        .unwrap();
        assert!(flat.neg2log.abs() < 1e-12);
        assert!((flat.lambda_stat - 1.0).abs() < 1e-12);
        assert!((flat.p_value - 1.0).abs() < 1e-12);
        assert!(!flat.reject);
    }

    #[test]
    fn glr_warns_on_sparse_cells() {
        let r = glr_test(&cells_d2([1, 1, 1, 1]), NullHypothesis::Exchangeable, 0.05).unwrap();
        assert!(r.warning.is_some());
        let sums_only = CountData::from_sum_counts(vec![1, 2, 1]).unwrap();
        assert!(glr_test(&sums_only, NullHypothesis::Exchangeable, 0.05).is_err());
    }

    #[test]
    fn glr_decision_at_critical_value() {
        // −2 log Λ = 39.49 against χ²₂₇ (0.95 quantile 40.113) is not rejected.
        let chi = ChiSquared::new(27.0).unwrap();
        assert!((chi.inverse_cdf(0.95) - 40.113).abs() < 1e-3);
        assert!(chi.sf(39.49) > 0.05);
    }
}
