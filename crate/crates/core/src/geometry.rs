//! Triangulation of the constraint polytope and exact distributions of
//! expectation measures over it.
//!
//! Points of `S_d(p)` live in `R^{d+1}` but span only a `(d − 1)`-dimensional
//! affine subspace. [`embed`] expresses the vertices in an orthonormal basis of
//! that subspace, [`triangulate`] splits the hull into simplices with a placing
//! (incremental, lexicographic) triangulation, and each simplex is picked with
//! probability proportional to its volume.
//!
//! An expectation measure is affine in the mixture weights, so inside a
//! simplex `{E φ ≤ t}` is a slice of the standard simplex cut by one
//! hyperplane. [`varsi_fraction`] gives its relative volume exactly, and
//! [`measure_cdf`] mixes those fractions over the triangulation.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{det, dot, extend_basis, factorial, norm, solve, sub};
use crate::rays::SumPmf;

/// Simplices lighter than this fraction of the total volume are dropped.
pub const PRUNE_RTOL: f64 = 1e-12;

/// Shifted coefficients closer than this to zero are split symmetrically.
const VARSI_ZERO: f64 = 1e-12;

/// Vertices expressed in an orthonormal basis of their affine hull.
#[derive(Debug, Clone)]
pub struct EmbeddedPolytope {
    points: Vec<Vec<f64>>,
    origin: Vec<f64>,
    basis: Vec<Vec<f64>>,
    coords: Vec<Vec<f64>>,
}

impl EmbeddedPolytope {
    pub fn affine_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Original (ambient) coordinates of the vertices.
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Vertices in hull coordinates.
    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    /// Hull coordinates of an ambient point (orthogonal projection).
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let v = sub(x, &self.origin);
        self.basis.iter().map(|b| dot(&v, b)).collect()
    }

    /// Ambient point with the given hull coordinates.
    pub fn lift(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.origin.clone();
        for (c, b) in y.iter().zip(&self.basis) {
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += c * bi);
        }
        x
    }
}

/// Embeds sum pmfs sharing the same `d`.
pub fn embed(vertices: &[SumPmf]) -> Result<EmbeddedPolytope> {
    if let Some(first) = vertices.first() {
        if vertices.iter().any(|v| v.d() != first.d()) {
            return Err(Error::DimensionMismatch("vertices have different d".into()));
        }
    }
    let points: Vec<Vec<f64>> = vertices.iter().map(|v| v.probs().to_vec()).collect();
    embed_points(&points)
}

/// Embeds arbitrary points of equal length. The basis is Gram–Schmidt over
/// `v_1 − v_0, v_2 − v_0, …` in input order.
pub fn embed_points(points: &[Vec<f64>]) -> Result<EmbeddedPolytope> {
    if points.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 vertices, got {}",
            points.len()
        )));
    }
    let n = points[0].len();
    if points.iter().any(|p| p.len() != n) {
        return Err(Error::DimensionMismatch(
            "points have different lengths".into(),
        ));
    }
    let origin = points[0].clone();
    let diffs: Vec<Vec<f64>> = points.iter().map(|p| sub(p, &origin)).collect();
    let scale = diffs.iter().map(|v| norm(v)).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::Degenerate("all vertices coincide".into()));
    }
    let tol = 1e-10 * scale;
    let mut basis = Vec::new();
    for v in &diffs[1..] {
        extend_basis(&mut basis, v, tol);
    }
    let coords = diffs
        .iter()
        .map(|v| basis.iter().map(|b| dot(v, b)).collect())
        .collect();
    Ok(EmbeddedPolytope {
        points: points.to_vec(),
        origin,
        basis,
        coords,
    })
}

/// `|det(v_1 − v_0, …, v_n − v_0)| / n!` for `n + 1` points in `R^n`.
pub fn simplex_volume(points: &[Vec<f64>]) -> Result<f64> {
    let Some(v0) = points.first() else {
        return Err(Error::DimensionMismatch("no points".into()));
    };
    let n = points.len() - 1;
    if points.iter().any(|p| p.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "{} points need to live in R^{n}",
            points.len()
        )));
    }
    let rows: Vec<Vec<f64>> = points[1..].iter().map(|p| sub(p, v0)).collect();
    Ok(det(&rows).abs() / factorial(n))
}

/// A partition of the polytope into simplices with their selection
/// probabilities `vol(T_i) / vol(C)`.
#[derive(Debug, Clone)]
pub struct TriangulatedPolytope {
    affine_dim: usize,
    simplices: Vec<Vec<usize>>,
    volumes: Vec<f64>,
    probs: Vec<f64>,
    total_volume: f64,
}

impl TriangulatedPolytope {
    /// Computes volumes and probabilities for an explicit list of simplices
    /// (vertex indices into `poly`). Near-empty simplices are pruned.
    pub fn from_simplices(poly: &EmbeddedPolytope, simplices: Vec<Vec<usize>>) -> Result<Self> {
        let k = poly.affine_dim();
        let mut volumes = Vec::with_capacity(simplices.len());
        for s in &simplices {
            if s.len() != k + 1 || s.iter().any(|&i| i >= poly.len()) {
                return Err(Error::DimensionMismatch(format!(
                    "simplex {s:?} is not {} valid vertex indices",
                    k + 1
                )));
            }
            let pts: Vec<Vec<f64>> = s.iter().map(|&i| poly.coords[i].clone()).collect();
            volumes.push(simplex_volume(&pts)?);
        }
        let raw_total: f64 = volumes.iter().sum();
        if raw_total <= 0.0 {
            return Err(Error::Degenerate("polytope has zero volume".into()));
        }
        let (simplices, volumes): (Vec<_>, Vec<_>) = simplices
            .into_iter()
            .zip(volumes)
            .filter(|(_, v)| *v > PRUNE_RTOL * raw_total)
            .unzip();
        let total_volume: f64 = volumes.iter().sum();
        let probs = volumes.iter().map(|v| v / total_volume).collect();
        Ok(Self {
            affine_dim: k,
            simplices,
            volumes,
            probs,
            total_volume,
        })
    }

    /// A single point: one zero-volume "simplex" that is always selected.
    pub fn point() -> Self {
        Self {
            affine_dim: 0,
            simplices: vec![vec![0]],
            volumes: vec![0.0],
            probs: vec![1.0],
            total_volume: 0.0,
        }
    }

    pub fn affine_dim(&self) -> usize {
        self.affine_dim
    }

    pub fn simplices(&self) -> &[Vec<usize>] {
        &self.simplices
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }
}

/// Orientation of `q` relative to the hyperplane through the `k` facet
/// vertices, in hull coordinates of dimension `k`.
fn orientation(coords: &[Vec<f64>], facet: &[usize], q: &[f64]) -> f64 {
    let v0 = &coords[facet[0]];
    let mut rows: Vec<Vec<f64>> = facet[1..].iter().map(|&i| sub(&coords[i], v0)).collect();
    rows.push(sub(q, v0));
    det(&rows)
}

/// Placing triangulation: vertices are inserted in lexicographic order of
/// their hull coordinates; each new vertex is coned to every boundary facet
/// it sees strictly from outside.
pub fn triangulate(poly: &EmbeddedPolytope) -> Result<TriangulatedPolytope> {
    let k = poly.affine_dim();
    if k == 0 {
        return Err(Error::Degenerate("polytope is a single point".into()));
    }
    let coords = &poly.coords;
    let mut order: Vec<usize> = (0..poly.len()).collect();
    order.sort_by(|&a, &b| {
        coords[a]
            .iter()
            .zip(&coords[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let scale = coords
        .iter()
        .flatten()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(1e-300);
    // Orientation determinants scale like length^k.
    let eps = 1e-11 * scale.powi(k as i32);

    // Seed simplex: first affinely independent vertices in placing order.
    let mut seed = vec![order[0]];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for &i in &order[1..] {
        if seed.len() == k + 1 {
            break;
        }
        if extend_basis(
            &mut basis,
            &sub(&coords[i], &coords[order[0]]),
            1e-10 * scale,
        ) {
            seed.push(i);
        }
    }
    if seed.len() != k + 1 {
        return Err(Error::Degenerate(
            "could not find an initial simplex".into(),
        ));
    }

    let mut simplices: Vec<Vec<usize>> = Vec::new();
    let mut facets: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    let add_simplex = |s: Vec<usize>,
                       simplices: &mut Vec<Vec<usize>>,
                       facets: &mut HashMap<Vec<usize>, Vec<usize>>| {
        let mut s = s;
        s.sort_unstable();
        let id = simplices.len();
        for skip in 0..s.len() {
            let f: Vec<usize> = s
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, &v)| v)
                .collect();
            facets.entry(f).or_default().push(id);
        }
        simplices.push(s);
    };
    add_simplex(seed.clone(), &mut simplices, &mut facets);

    for &q in order.iter().filter(|i| !seed.contains(i)) {
        let qc = &coords[q];
        let mut visible: Vec<Vec<usize>> = Vec::new();
        for (facet, owners) in &facets {
            if owners.len() != 1 {
                continue;
            }
            let opposite = simplices[owners[0]]
                .iter()
                .copied()
                .find(|v| !facet.contains(v))
                .expect("simplex has a vertex off each facet");
            let s_opp = orientation(coords, facet, &coords[opposite]);
            let s_q = orientation(coords, facet, qc);
            if s_q.abs() > eps && s_q.signum() != s_opp.signum() {
                visible.push(facet.clone());
            }
        }
        // Deterministic insertion order regardless of hash iteration.
        visible.sort();
        for facet in visible {
            let mut s = facet;
            s.push(q);
            add_simplex(s, &mut simplices, &mut facets);
        }
    }
    TriangulatedPolytope::from_simplices(poly, simplices)
}

/// Vertices and triangulation of `S_d(p)` (or of the full simplex `S_d` when
/// `p` is `None`).
#[derive(Debug, Clone)]
pub struct ClassTriangulation {
    pub vertices: Vec<SumPmf>,
    pub triangulation: TriangulatedPolytope,
}

pub fn triangulate_class(d: usize, p: Option<f64>) -> Result<ClassTriangulation> {
    let vertices: Vec<SumPmf> = match p {
        Some(p) => crate::rays::enumerate_rays(d, p)?
            .iter()
            .map(|r| r.to_sum_pmf())
            .collect(),
        None => (0..=d)
            .map(|j| SumPmf::point_mass(d, j))
            .collect::<Result<_>>()?,
    };
    let triangulation = if vertices.len() == 1 {
        TriangulatedPolytope::point()
    } else {
        let poly = embed(&vertices)?;
        match p {
            Some(_) => triangulate(&poly)?,
            None => TriangulatedPolytope::from_simplices(&poly, vec![(0..=d).collect()])?,
        }
    };
    Ok(ClassTriangulation {
        vertices,
        triangulation,
    })
}

/// Barycentric coordinates of hull point `x` in simplex `simplex`.
pub fn barycentric(poly: &EmbeddedPolytope, simplex: &[usize], x: &[f64]) -> Option<Vec<f64>> {
    let v0 = &poly.coords[simplex[0]];
    let k = simplex.len() - 1;
    // Columns are v_i − v_0; solve for the weights of vertices 1..k.
    let cols: Vec<Vec<f64>> = simplex[1..]
        .iter()
        .map(|&i| sub(&poly.coords[i], v0))
        .collect();
    let a: Vec<Vec<f64>> = (0..k)
        .map(|r| cols.iter().map(|c| c[r]).collect())
        .collect();
    let tail = solve(&a, &sub(x, v0))?;
    let head = 1.0 - tail.iter().sum::<f64>();
    Some(std::iter::once(head).chain(tail).collect())
}

/// Fraction of the standard simplex `{λ ≥ 0, Σ λ = 1}` on which
/// `Σ λ_j coeffs_j ≤ t`, by Varsi's recurrence.
pub fn varsi_fraction(coeffs: &[f64], t: f64) -> Result<f64> {
    if coeffs.is_empty() {
        return Err(Error::Domain(
            "varsi_fraction needs at least one coefficient".into(),
        ));
    }
    if coeffs.iter().any(|c| !c.is_finite()) || !t.is_finite() {
        return Err(Error::Domain("non-finite coefficient or threshold".into()));
    }
    let lo = coeffs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = coeffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if t < lo {
        return Ok(0.0);
    }
    if t >= hi {
        return Ok(1.0);
    }
    let shifted: Vec<f64> = coeffs.iter().map(|c| c - t).collect();
    let near_zero: Vec<usize> = (0..shifted.len())
        .filter(|&i| shifted[i].abs() <= VARSI_ZERO)
        .collect();
    let frac = if near_zero.is_empty() {
        1.0 - varsi_upper(&shifted)
    } else {
        let mut plus = shifted.clone();
        let mut minus = shifted;
        for &i in &near_zero {
            plus[i] = VARSI_ZERO;
            minus[i] = -VARSI_ZERO;
        }
        1.0 - 0.5 * (varsi_upper(&plus) + varsi_upper(&minus))
    };
    Ok(frac.clamp(0.0, 1.0))
}

/// Relative volume of `{Σ λ_j y_j ≥ 0}`. Each update is a convex combination
/// of the previous table entries, so the recurrence is stable.
fn varsi_upper(y: &[f64]) -> f64 {
    let neg: Vec<f64> = y.iter().copied().filter(|&v| v < 0.0).collect();
    let mut table = vec![0.0; neg.len() + 1];
    table[0] = 1.0;
    for &yk in y.iter().filter(|&&v| v >= 0.0) {
        for j in 1..=neg.len() {
            let yj = neg[j - 1];
            table[j] = (yj * table[j] - yk * table[j - 1]) / (yj - yk);
        }
    }
    table[neg.len()]
}

/// Tabulated distribution function of a measure over the polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureCdf {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub measure_name: String,
}

impl MeasureCdf {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, measure_name: impl Into<String>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        check_sorted(&grid)?;
        Ok(Self {
            grid,
            values,
            measure_name: measure_name.into(),
        })
    }

    /// Piecewise-linear interpolation, constant beyond the grid ends.
    pub fn interpolate(&self, t: f64) -> f64 {
        let g = &self.grid;
        if g.is_empty() {
            return f64::NAN;
        }
        if t <= g[0] {
            return self.values[0];
        }
        if t >= g[g.len() - 1] {
            return self.values[g.len() - 1];
        }
        let i = g.partition_point(|&x| x <= t);
        let (x0, x1) = (g[i - 1], g[i]);
        let (y0, y1) = (self.values[i - 1], self.values[i]);
        if x1 == x0 {
            return y1;
        }
        y0 + (y1 - y0) * (t - x0) / (x1 - x0)
    }
}

fn check_sorted(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("grid has non-finite thresholds".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("grid is not sorted".into()));
    }
    Ok(())
}

/// The exact distribution function `t ↦ Σ_i P(T_i) · frac_i(t)` of an
/// expectation measure whose value at vertex `j` is `ray_values[j]`.
#[derive(Debug, Clone)]
pub struct ExactCdf {
    parts: Vec<(f64, Vec<f64>)>,
    min: f64,
    max: f64,
}

impl ExactCdf {
    pub fn new(tri: &TriangulatedPolytope, ray_values: &[f64]) -> Result<Self> {
        let mut parts = Vec::with_capacity(tri.len());
        for (s, &prob) in tri.simplices().iter().zip(tri.probs()) {
            let vals: Option<Vec<f64>> = s.iter().map(|&i| ray_values.get(i).copied()).collect();
            let vals = vals.ok_or_else(|| {
                Error::DimensionMismatch("ray_values shorter than vertex list".into())
            })?;
            parts.push((prob, vals));
        }
        let used = parts.iter().flat_map(|(_, v)| v.iter().copied());
        let (min, max) = used.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        Ok(Self { parts, min, max })
    }

    /// Smallest and largest attainable value.
    pub fn support(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let f: f64 = self
            .parts
            .iter()
            .map(|(prob, vals)| prob * varsi_fraction(vals, t).unwrap_or(f64::NAN))
            .sum();
        f.clamp(0.0, 1.0)
    }

    /// Evaluates the CDF on a sorted grid (in parallel; results do not depend
    /// on the thread count). Rounding noise is removed by a running maximum.
    pub fn tabulate(&self, grid: &[f64], name: &str) -> Result<MeasureCdf> {
        check_sorted(grid)?;
        let mut values: Vec<f64> = grid.par_iter().map(|&t| self.cdf(t)).collect();
        for i in 1..values.len() {
            if values[i] < values[i - 1] {
                values[i] = values[i - 1];
            }
        }
        MeasureCdf::new(grid.to_vec(), values, name)
    }

    /// `(F(t + Δ) − F(t)) / Δ` evaluated exactly at each grid point.
    pub fn pdf(&self, grid: &[f64], delta: f64) -> Result<Vec<f64>> {
        if !(delta > 0.0) {
            return Err(Error::Domain(format!(
                "delta must be positive, got {delta}"
            )));
        }
        Ok(grid
            .par_iter()
            .map(|&t| (self.cdf(t + delta) - self.cdf(t)) / delta)
            .collect())
    }
}

/// `F(t) = Σ_i P(T_i) · varsi_fraction(values on T_i, t)` over `grid`.
pub fn measure_cdf(
    tri: &TriangulatedPolytope,
    ray_values: &[f64],
    grid: &[f64],
    name: &str,
) -> Result<MeasureCdf> {
    ExactCdf::new(tri, ray_values)?.tabulate(grid, name)
}

/// Forward-difference density `(F(t + Δ) − F(t)) / Δ`, reading `F(t + Δ)`
/// off the tabulated CDF by linear interpolation.
pub fn cdf_to_pdf(cdf: &MeasureCdf, delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!(
            "delta must be positive, got {delta}"
        )));
    }
    Ok(cdf
        .grid
        .iter()
        .zip(&cdf.values)
        .map(|(&t, &f)| (cdf.interpolate(t + delta) - f) / delta)
        .collect())
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rays::enumerate_rays;

    fn table_one() -> EmbeddedPolytope {
        let pmfs: Vec<SumPmf> = enumerate_rays(3, 0.4)
            .unwrap()
            .iter()
            .map(|r| r.to_sum_pmf())
            .collect();
        embed(&pmfs).unwrap()
    }

    #[test]
    fn embedding_dimensions() {
        assert_eq!(table_one().affine_dim(), 2);
        let pmfs: Vec<SumPmf> = enumerate_rays(6, 0.4)
            .unwrap()
            .iter()
            .map(|r| r.to_sum_pmf())
            .collect();
        assert_eq!(embed(&pmfs).unwrap().affine_dim(), 5);
    }

    #[test]
    fn segment_embedding_is_signed_distance() {
        let e = embed_points(&[vec![0.0, 0.0, 1.0], vec![3.0, 4.0, 1.0]]).unwrap();
        assert_eq!(e.affine_dim(), 1);
        assert_eq!(e.coords()[0], vec![0.0]);
        assert!((e.coords()[1][0] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn embedding_rejects_coincident_points() {
        let p = vec![0.5, 0.5];
        assert!(matches!(
            embed_points(&[p.clone(), p]),
            Err(Error::Degenerate(_))
        ));
        assert!(embed_points(&[vec![1.0]]).is_err());
    }

    #[test]
    fn simplex_volume_examples() {
        let tri = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!((simplex_volume(&tri).unwrap() - 0.5).abs() < 1e-15);
        let flat = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert_eq!(simplex_volume(&flat).unwrap(), 0.0);
        assert!(simplex_volume(&[vec![0.0, 0.0], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn triangulating_a_simplex_gives_itself() {
        let e = embed_points(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let t = triangulate(&e).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.probs(), &[1.0]);
    }

    #[test]
    fn table_one_quadrilateral_gives_two_triangles() {
        let e = table_one();
        let t = triangulate(&e).unwrap();
        assert_eq!(t.len(), 2);
        assert!((t.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_is_covered() {
        let e = embed_points(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![0.5, 1.5],
        ])
        .unwrap();
        let t = triangulate(&e).unwrap();
        assert!((t.total_volume() - 1.25).abs() < 1e-12);
    }

    #[test]
    fn varsi_examples() {
        assert!((varsi_fraction(&[0.0, 1.0], 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((varsi_fraction(&[0.0, 1.0], 0.25).unwrap() - 0.25).abs() < 1e-15);
        let f = varsi_fraction(&[0.0, 0.0, 1.0], 1.0 / 3.0).unwrap();
        assert!((f - 5.0 / 9.0).abs() < 1e-14);
        assert_eq!(varsi_fraction(&[0.2, 0.4], 0.1).unwrap(), 0.0);
        assert_eq!(varsi_fraction(&[0.2, 0.4], 0.4).unwrap(), 1.0);
        assert_eq!(varsi_fraction(&[0.7], 0.7).unwrap(), 1.0);
        assert!(varsi_fraction(&[], 0.0).is_err());
    }

    #[test]
    fn varsi_single_high_coefficient_matches_closed_form() {
        for k in 2..9 {
            let mut c = vec![0.0; k];
            c[k - 1] = 1.0;
            for &t in &[0.05, 0.3, 0.77] {
                let want = 1.0 - (1.0f64 - t).powi(k as i32 - 1);
                assert!((varsi_fraction(&c, t).unwrap() - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn varsi_at_a_coefficient_is_continuous() {
        let c = [0.1, 0.3, 0.5, 0.9];
        let at = varsi_fraction(&c, 0.3).unwrap();
        let below = varsi_fraction(&c, 0.3 - 1e-9).unwrap();
        let above = varsi_fraction(&c, 0.3 + 1e-9).unwrap();
        assert!(below <= at + 1e-12 && at <= above + 1e-12);
        assert!((above - below).abs() < 1e-7);
    }

    #[test]
    fn pdf_of_linear_cdf_is_flat() {
        let grid = linear_grid(0.0, 1.0, 11);
        let cdf = MeasureCdf::new(grid.clone(), grid.clone(), "linear").unwrap();
        let pdf = cdf_to_pdf(&cdf, 0.1).unwrap();
        for v in &pdf[..10] {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pdf_of_step_cdf_is_a_spike() {
        let grid = linear_grid(0.0, 1.0, 11);
        let values: Vec<f64> = grid
            .iter()
            .map(|&t| if t >= 0.5 { 1.0 } else { 0.0 })
            .collect();
        let cdf = MeasureCdf::new(grid, values, "step").unwrap();
        let pdf = cdf_to_pdf(&cdf, 0.1).unwrap();
        assert!((pdf[4] - 10.0).abs() < 1e-9);
        assert!(pdf
            .iter()
            .enumerate()
            .all(|(i, &v)| i == 4 || v.abs() < 1e-9));
        assert!(cdf_to_pdf(&cdf, 0.0).is_err());
    }

    #[test]
    fn unsorted_grid_rejected() {
        let e = table_one();
        let t = triangulate(&e).unwrap();
        assert!(measure_cdf(&t, &[0.2, 0.4, 1.0 / 15.0, 0.1], &[0.3, 0.1], "mu2").is_err());
    }
}
