//! Construction, sampling, and numerical certification of moment-matched
//! contaminated regression instances.
//!
//! The central object is a one-dimensional conditional law built for each
//! label `y`: a spike at `y` carrying mass `alpha_y = sqrt(alpha) *
//! exp(-y^2 (1 - alpha)/2)` plus a discrete complement `F_y` supported on at
//! most `2m + 1` atoms in `[-B, B]`, chosen so the mixture's first `2m`
//! Hermite moments vanish. Smoothing the mixture through the
//! Ornstein-Uhlenbeck channel `x -> rho x + sqrt(1 - rho^2) Z` yields the
//! distribution of the covariate component along a planted direction; in
//! every direction orthogonal to it the data is exactly standard normal.
//! Low-degree moments along *any* direction then agree with pure noise, which
//! is what makes the planted instances statistically stealthy, while the
//! planted pair `(x, y)` still determines the regressor well enough for an
//! (inefficient) list decoder to recover it.
//!
//! Module map:
//!
//! - [`hermite`]: orthonormal Hermite polynomials, Gauss quadrature,
//!   coefficient-vector arithmetic.
//! - [`moment_match`]: the grid LP that constructs `F_y`, support reduction,
//!   and randomized dual certificates.
//! - [`instance`]: instance parameters, the per-label family cache, planted
//!   and null samplers, dataset file I/O.
//! - [`verify`]: chi-square correlation audits, analytic budgets, and
//!   sample-moment z-score audits.
//! - [`decoder`]: the grid-based list decoder with residual membership
//!   conditions.
//! - [`testing`]: the two-arm hypothesis-testing reduction and trial harness.

pub mod decoder;
pub mod hermite;
pub mod instance;
pub mod moment_match;
mod simplex;
pub mod testing;
pub mod verify;
