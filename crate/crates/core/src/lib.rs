//! # exchpoly
//!
//! Exchangeable multivariate Bernoulli distributions as points of a convex
//! polytope.
//!
//! A pmf on `{0,1}^d` that is invariant under coordinate permutations is fixed
//! by the `d + 1` values `f_j` it assigns to weight-`j` vectors. Multiplying by
//! `C(d, j)` turns it into the pmf of the coordinate sum `Y`, and fixing the
//! Bernoulli mean `p` cuts the simplex of such pmfs down to the polytope
//! `{p ≥ 0, Σ p_j = 1, Σ j p_j = p d}`. Its vertices are known in closed form:
//! two-point densities straddling `p d`, plus a point mass when `p d` is an
//! integer.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`rays`] | vertex enumeration, the exchangeable ↔ sum-pmf map, mixtures |
//! | [`geometry`] | affine embedding, placing triangulation, Varsi fractions, exact measure CDFs |
//! | [`measures`] | cross/raw moments, correlation bounds, entropic risk, excess loss, quantiles, entropy |
//! | [`sampling`] | ray-mixture sampler (scales to `d = 10^5`), one-factor and beta-mixture models, uniform pmf sampling |
//! | [`inference`] | maximum likelihood in `E_d` and `E_d(p)`, likelihood-ratio test of exchangeability |
//! | [`pex`] | partial exchangeability: per-group sum pmfs and their vertices |
//!
//! ```
//! use exchpoly::rays::enumerate_rays;
//!
//! let rays = enumerate_rays(3, 0.4).unwrap();
//! assert_eq!(rays.len(), 4);
//! assert_eq!(rays[0].support(), vec![0, 2]);
//! ```

// Range checks are written `!(lo < x && x < hi)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod inference;
mod linalg;
pub mod measures;
pub mod pex;
pub mod rays;
pub mod sampling;
mod util;

pub use error::{Error, Result};
pub use rays::{ExchangeablePmf, MixtureWeights, RayDensity, SumPmf};
