//! Partial exchangeability: invariance only under permutations inside each
//! group of a partition of the coordinates.
//!
//! A partially exchangeable pmf is fixed by `g(j_1, …, j_n)`, the common mass
//! of vectors with `j_k` ones in group `k`. Multiplying by
//! `Π C(d_k, j_k)` gives the pmf of the group sums `(Y_1, …, Y_n)` on a grid
//! of `Π (d_k + 1)` cells, flattened with the first group varying fastest.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::rays::{SumPmf, SUM_TOL};
use crate::util::binomial;

/// Default cap on the number of candidate supports examined by [`pex_rays`].
pub const DEFAULT_MAX_CANDIDATES: u128 = 10_000_000;

const SOLVE_TOL: f64 = 1e-10;
const POSITIVE_TOL: f64 = 1e-12;

/// An ordered partition of `{1, …, d}` into nonempty groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    d: usize,
    groups: Vec<Vec<usize>>,
}

impl PartitionSpec {
    /// `groups` hold 1-based coordinate indices.
    pub fn new(d: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; d];
        for g in &groups {
            if g.is_empty() {
                return domain("groups must be nonempty");
            }
            for &i in g {
                if i == 0 || i > d {
                    return domain(format!("coordinate {i} outside 1..={d}"));
                }
                if std::mem::replace(&mut seen[i - 1], true) {
                    return domain(format!("coordinate {i} appears twice"));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return domain(format!("coordinate {} is in no group", i + 1));
        }
        Ok(Self { d, groups })
    }

    /// The single-group partition (plain exchangeability).
    pub fn trivial(d: usize) -> Result<Self> {
        Self::new(d, vec![(1..=d).collect()])
    }

    /// Parses `"1,2|3,4"`.
    pub fn parse(d: usize, s: &str) -> Result<Self> {
        let groups = s
            .split('|')
            .map(|g| {
                g.split(',')
                    .map(|i| {
                        i.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::Domain(format!("bad coordinate '{i}' in '{s}'")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(d, groups)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// `(d_1 + 1, …, d_n + 1)`.
    pub fn grid_shape(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.len() + 1).collect()
    }

    pub fn num_cells(&self) -> usize {
        self.grid_shape().iter().product()
    }

    /// Dimension of the simplex of partially exchangeable pmfs,
    /// `Π (d_k + 1) − 1`.
    pub fn simplex_dimension(&self) -> usize {
        self.num_cells() - 1
    }

    /// Multi-index `(j_1, …, j_n)` of a flat cell index.
    pub fn cell(&self, mut index: usize) -> Vec<usize> {
        self.grid_shape()
            .iter()
            .map(|&s| {
                let j = index % s;
                index /= s;
                j
            })
            .collect()
    }

    pub fn index(&self, cell: &[usize]) -> usize {
        cell.iter()
            .zip(self.grid_shape())
            .rev()
            .fold(0, |acc, (&j, s)| acc * s + j)
    }

    /// `Π C(d_k, j_k)` for each cell.
    fn multiplicities(&self) -> Vec<f64> {
        let sizes = self.sizes();
        (0..self.num_cells())
            .map(|i| {
                self.cell(i)
                    .iter()
                    .zip(&sizes)
                    .map(|(&j, &dk)| binomial(dk, j))
                    .product()
            })
            .collect()
    }
}

impl fmt::Display for PartitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self
            .groups
            .iter()
            .map(|g| g.iter().map(usize::to_string).join(","))
            .join("|");
        f.write_str(&s)
    }
}

/// Pmf of the group sums on the `Π (d_k + 1)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSumPmf {
    shape: Vec<usize>,
    probs: Vec<f64>,
}

impl MultiSumPmf {
    pub fn new(shape: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let cells: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) {
            return domain("grid shape must be nonempty with positive extents");
        }
        if probs.len() != cells {
            return Err(Error::LengthMismatch {
                expected: cells,
                actual: probs.len(),
            });
        }
        crate::util::check_probability_vector(&probs, "grid pmf").map_err(Error::InvalidPmf)?;
        Ok(Self { shape, probs })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Flat indices of the cells with positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.probs.len())
            .filter(|&i| self.probs[i] > 0.0)
            .collect()
    }

    /// Multi-index of a flat cell index.
    pub fn cell(&self, mut index: usize) -> Vec<usize> {
        self.shape
            .iter()
            .map(|&s| {
                let j = index % s;
                index /= s;
                j
            })
            .collect()
    }

    /// Pmf of `Y_k`, summing over the other groups.
    pub fn margin(&self, k: usize) -> Result<SumPmf> {
        if k >= self.shape.len() {
            return domain(format!("group {k} out of range"));
        }
        let mut m = vec![0.0; self.shape[k]];
        for (i, &w) in self.probs.iter().enumerate() {
            m[self.cell(i)[k]] += w;
        }
        SumPmf::new(m)
    }

    /// `(E[Y_1], …, E[Y_n])`.
    pub fn means(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.len()];
        for (i, &w) in self.probs.iter().enumerate() {
            for (o, j) in out.iter_mut().zip(self.cell(i)) {
                *o += w * j as f64;
            }
        }
        out
    }
}

/// `g` values to the grid pmf: multiply each cell by `Π C(d_k, j_k)`.
pub fn map_fg(spec: &PartitionSpec, g: &[f64]) -> Result<MultiSumPmf> {
    if g.len() != spec.num_cells() {
        return Err(Error::LengthMismatch {
            expected: spec.num_cells(),
            actual: g.len(),
        });
    }
    if g.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidPmf("g must be nonnegative".into()));
    }
    let probs = g
        .iter()
        .zip(spec.multiplicities())
        .map(|(x, m)| x * m)
        .collect::<Vec<_>>();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidPmf(format!("total mass {total} is not 1")));
    }
    MultiSumPmf::new(spec.grid_shape(), probs)
}

/// Inverse of [`map_fg`].
pub fn map_fg_inv(spec: &PartitionSpec, pmf: &MultiSumPmf) -> Result<Vec<f64>> {
    if pmf.shape() != spec.grid_shape().as_slice() {
        return Err(Error::DimensionMismatch(format!(
            "grid shape {:?} does not match partition {spec}",
            pmf.shape()
        )));
    }
    Ok(pmf
        .probs()
        .iter()
        .zip(spec.multiplicities())
        .map(|(x, m)| x / m)
        .collect())
}

fn check_means(spec: &PartitionSpec, means: &[f64]) -> Result<()> {
    if means.len() != spec.num_groups() {
        return Err(Error::LengthMismatch {
            expected: spec.num_groups(),
            actual: means.len(),
        });
    }
    if let Some(p) = means.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return domain(format!("group means must lie in (0, 1), got {p}"));
    }
    Ok(())
}

/// One row per group: the coefficient of cell `(j_1, …, j_n)` in row `k` is
/// `j_k − p_k d_k`.
pub fn pex_constraints(spec: &PartitionSpec, means: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_means(spec, means)?;
    let sizes = spec.sizes();
    let cells: Vec<Vec<usize>> = (0..spec.num_cells()).map(|i| spec.cell(i)).collect();
    Ok((0..spec.num_groups())
        .map(|k| {
            let target = means[k] * sizes[k] as f64;
            cells.iter().map(|c| c[k] as f64 - target).collect()
        })
        .collect())
}

/// Extreme points of `{p ≥ 0, Σ p = 1, constraints}` with the default size
/// guard.
pub fn pex_rays(spec: &PartitionSpec, means: &[f64]) -> Result<Vec<MultiSumPmf>> {
    pex_rays_with_limit(spec, means, DEFAULT_MAX_CANDIDATES)
}

/// Every extreme point has at most `n + 1` cells in its support, so all
/// supports of size `1..=n+1` are tried: the normalization and mean equations
/// restricted to the support must have a unique, strictly positive solution.
pub fn pex_rays_with_limit(
    spec: &PartitionSpec,
    means: &[f64],
    max_candidates: u128,
) -> Result<Vec<MultiSumPmf>> {
    let rows = pex_constraints(spec, means)?;
    let m = spec.num_cells();
    let k = spec.num_groups() + 1;
    let candidates: u128 = (1..=k.min(m)).map(|s| binomial_u128(m, s)).sum();
    if candidates > max_candidates {
        return Err(Error::TooLarge {
            candidates,
            limit: max_candidates,
        });
    }
    let mut system = vec![vec![1.0; m]];
    system.extend(rows);
    let mut rhs = vec![0.0; k];
    rhs[0] = 1.0;

    let mut found: Vec<(Vec<usize>, Vec<f64>)> = (1..=k.min(m))
        .flat_map(|s| (0..m).combinations(s))
        .par_bridge()
        .filter_map(|support| solve_on_support(&system, &rhs, &support).map(|x| (support, x)))
        .collect();
    found.sort_by(|a, b| a.0.cmp(&b.0));
    found.dedup_by(|a, b| {
        a.0 == b.0 && a.1.iter().zip(&b.1).all(|(x, y)| (x - y).abs() < SOLVE_TOL)
    });

    let shape = spec.grid_shape();
    found
        .into_iter()
        .map(|(support, x)| {
            let mut probs = vec![0.0; m];
            for (&i, v) in support.iter().zip(x) {
                probs[i] = v;
            }
            MultiSumPmf::new(shape.clone(), probs)
        })
        .collect()
}

/// Unique solution of the equations restricted to `support`, if it exists and
/// is strictly positive.
fn solve_on_support(system: &[Vec<f64>], rhs: &[f64], support: &[usize]) -> Option<Vec<f64>> {
    let k = system.len();
    let s = support.len();
    let a = DMatrix::from_fn(k, s, |r, c| system[r][support[c]]);
    let b = DVector::from_column_slice(rhs);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd
        .singular_values
        .iter()
        .any(|&sv| sv <= SOLVE_TOL * smax.max(1.0))
    {
        return None;
    }
    let x = svd.solve(&b, 0.0).ok()?;
    if (&a * &x - &b).amax() > SOLVE_TOL {
        return None;
    }
    if x.iter().any(|&v| v <= POSITIVE_TOL) {
        return None;
    }
    // Clean up rounding in the normalization.
    let total: f64 = x.iter().sum();
    Some(x.iter().map(|v| v / total).collect())
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| {
        acc.saturating_mul((n - i) as u128) / (i as u128 + 1)
    })
}

impl FromStr for PartitionSpec {
    type Err = Error;

    /// `"d:1,2|3,4"` or just `"1,2|3,4"` (with `d` the largest index).
    fn from_str(s: &str) -> Result<Self> {
        let (d, groups) = match s.split_once(':') {
            Some((d, g)) => (
                d.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Domain(format!("bad dimension in '{s}'")))?,
                g,
            ),
            None => {
                let max = s
                    .split(['|', ','])
                    .filter_map(|i| i.trim().parse::<usize>().ok())
                    .max()
                    .unwrap_or(0);
                (max, s)
            }
        };
        Self::parse(d, groups)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rays::{enumerate_rays, map_h};

    fn pair_spec() -> PartitionSpec {
        PartitionSpec::parse(4, "1,2|3,4").unwrap()
    }

    #[test]
    fn partition_validation() {
        assert!(PartitionSpec::parse(4, "1,2|3").is_err());
        assert!(PartitionSpec::parse(4, "1,2|2,3,4").is_err());
        assert!(PartitionSpec::parse(4, "1,2|3,5").is_err());
        assert!(PartitionSpec::parse(4, "1,x|3,4").is_err());
        let s = pair_spec();
        assert_eq!(s.grid_shape(), vec![3, 3]);
        assert_eq!(s.simplex_dimension(), 8);
        assert_eq!(s.to_string(), "1,2|3,4");
        assert_eq!("1,2|3,4".parse::<PartitionSpec>().unwrap(), s);
        assert_eq!(s.cell(1), vec![1, 0]);
        assert_eq!(s.cell(3), vec![0, 1]);
        for i in 0..9 {
            assert_eq!(s.index(&s.cell(i)), i);
        }
    }

    #[test]
    fn map_fg_round_trip() {
        let s = pair_spec();
        // Uniform on all 16 binary vectors.
        let g = vec![1.0 / 16.0; 9];
        let pmf = map_fg(&s, &g).unwrap();
        let want = [1.0, 2.0, 1.0, 2.0, 4.0, 2.0, 1.0, 2.0, 1.0].map(|x| x / 16.0);
        for (a, b) in pmf.probs().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let back = map_fg_inv(&s, &pmf).unwrap();
        for (a, b) in back.iter().zip(&g) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(map_fg(&s, &[0.1; 9]).is_err());
        assert!(map_fg(&s, &[0.1; 4]).is_err());
    }

    #[test]
    fn trivial_partition_is_map_h() {
        let s = PartitionSpec::trivial(3).unwrap();
        let f = vec![0.1, 0.1, 0.1, 0.3];
        let pmf = map_fg(&s, &f).unwrap();
        let h = map_h(&crate::rays::ExchangeablePmf::new(f).unwrap());
        assert_eq!(pmf.probs(), h.probs());
    }

    #[test]
    fn constraint_rows() {
        let rows = pex_constraints(&pair_spec(), &[0.5, 0.25]).unwrap();
        assert_eq!(
            rows[0],
            vec![-1.0, 0.0, 1.0, -1.0, 0.0, 1.0, -1.0, 0.0, 1.0]
        );
        assert_eq!(
            rows[1],
            vec![-0.5, -0.5, -0.5, 0.5, 0.5, 0.5, 1.5, 1.5, 1.5]
        );
        assert!(pex_constraints(&pair_spec(), &[0.5]).is_err());
        assert!(pex_constraints(&pair_spec(), &[0.5, 1.0]).is_err());
    }

    #[test]
    fn pair_example_has_fourteen_rays() {
        let rays = pex_rays(&pair_spec(), &[0.5, 0.25]).unwrap();
        assert_eq!(rays.len(), 14);
        for r in &rays {
            assert!(r.support().len() <= 3);
            let m = r.means();
            assert!((m[0] - 1.0).abs() < 1e-12 && (m[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn single_group_matches_enumerate_rays() {
        for d in 1..=6 {
            for p in [0.2, 0.4, 0.5, 0.75] {
                let spec = PartitionSpec::trivial(d).unwrap();
                let pex = pex_rays(&spec, &[p]).unwrap();
                let rays = enumerate_rays(d, p).unwrap();
                assert_eq!(pex.len(), rays.len(), "d={d} p={p}");
                for r in rays {
                    let probs = r.to_sum_pmf().into_probs();
                    assert!(pex.iter().any(|x| x
                        .probs()
                        .iter()
                        .zip(&probs)
                        .all(|(a, b)| (a - b).abs() < 1e-10)));
                }
            }
        }
    }

    #[test]
    fn size_guard() {
        let spec = PartitionSpec::parse(4, "1,2|3,4").unwrap();
        assert!(matches!(
            pex_rays_with_limit(&spec, &[0.5, 0.25], 100),
            Err(Error::TooLarge {
                candidates: 129,
                limit: 100
            })
        ));
    }

    #[test]
    fn margins_have_group_means() {
        for r in pex_rays(&pair_spec(), &[0.5, 0.25]).unwrap() {
            assert!((r.margin(0).unwrap().mean() - 1.0).abs() < 1e-12);
            assert!((r.margin(1).unwrap().mean() - 0.5).abs() < 1e-12);
        }
    }
}
