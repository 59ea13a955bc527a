//! Orthonormal Hermite polynomials, Gauss quadrature for standard-normal
//! expectations, and coefficient-vector arithmetic.
//!
//! Throughout the crate `h_k` denotes the *normalized probabilist's* Hermite
//! polynomial: `h_k(x) = He_k(x) / sqrt(k!)`, so that
//! `E_{X ~ N(0,1)}[h_i(X) h_j(X)] = 1{i = j}`.
//! The family satisfies the forward recurrence
//!
//! ```text
//! h_0(x) = 1,   h_1(x) = x,
//! sqrt(k) h_k(x) = x h_{k-1}(x) - sqrt(k-1) h_{k-2}(x).
//! ```
//!
//! A distribution `F` with all moments is represented where convenient by its
//! Hermite coefficient vector `(E_F[h_0], E_F[h_1], ...)`; smoothing `F` by the
//! Ornstein-Uhlenbeck channel `X -> rho X + sqrt(1-rho^2) Z` acts diagonally on
//! that vector, scaling entry `i` by `rho^i`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

/// Evaluate the normalized Hermite polynomial `h_k` at `x` by the forward
/// recurrence. Exact at the recurrence's fixed points: `h_0 = 1`, `h_1 = x`.
pub fn hermite_eval(k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return prev;
    }
    for j in 2..=k {
        let next = (x * cur - ((j - 1) as f64).sqrt() * prev) / (j as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Evaluate `h_0(x), ..., h_kmax(x)` in one recurrence pass.
pub fn hermite_eval_all(kmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(1.0);
    if kmax == 0 {
        return out;
    }
    out.push(x);
    for j in 2..=kmax {
        let next = (x * out[j - 1] - ((j - 1) as f64).sqrt() * out[j - 2]) / (j as f64).sqrt();
        out.push(next);
    }
    out
}

/// A finite vector of Hermite coefficients `coeffs[i] = E[h_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSeries {
    coeffs: Vec<f64>,
}

impl HermiteSeries {
    /// Wrap a coefficient vector; entry `i` is the coefficient of `h_i`.
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a Hermite series needs at least h_0");
        Self { coeffs }
    }

    /// Highest represented degree.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of `h_i` (zero beyond the represented degree).
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// Borrow the raw coefficients.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `sum_{i >= from} coeffs[i]^2` — the energy carried at degree `from`
    /// and above. For a probability law's coefficient vector with `from = 1`
    /// this is exactly its chi-square divergence from `N(0,1)`.
    pub fn tail_energy(&self, from: usize) -> f64 {
        self.coeffs.iter().skip(from).map(|c| c * c).sum()
    }

    /// Convert Hermite coefficients to raw moments `E[X^n]` for
    /// `n = 0..=degree`, via `x^n = n! * sum_j He_{n-2j}(x) / (2^j j! (n-2j)!)`.
    ///
    /// This is the independent route used to cross-check matched Hermite
    /// moments against Gaussian raw moments.
    pub fn raw_moments(&self) -> Vec<f64> {
        let n_max = self.degree();
        let mut out = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let mut acc = 0.0;
            let mut j = 0usize;
            while 2 * j <= n {
                let k = n - 2 * j;
                // n! / (2^j j! k!) * sqrt(k!) = n! / (2^j j! sqrt(k!))
                let coef = factorial(n) / (2f64.powi(j as i32) * factorial(j) * factorial(k).sqrt());
                acc += coef * self.coeffs[k];
                j += 1;
            }
            out.push(acc);
        }
        out
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Hermite moments `E_F[h_i]`, `i = 0..=kmax`, of a discrete distribution
/// given by `atoms` and matching `weights`.
pub fn hermite_moments_of_discrete(atoms: &[f64], weights: &[f64], kmax: usize) -> HermiteSeries {
    assert_eq!(atoms.len(), weights.len(), "atom/weight length mismatch");
    let mut coeffs = vec![0.0; kmax + 1];
    for (&t, &w) in atoms.iter().zip(weights) {
        let h = hermite_eval_all(kmax, t);
        for (c, hv) in coeffs.iter_mut().zip(&h) {
            *c += w * hv;
        }
    }
    HermiteSeries::new(coeffs)
}

/// Coefficient vector of the Ornstein-Uhlenbeck pushforward: smoothing a law
/// by `X -> rho X + sqrt(1-rho^2) Z` multiplies the `i`-th Hermite coefficient
/// by `rho^i`.
pub fn ou_pushforward(series: &HermiteSeries, rho: f64) -> HermiteSeries {
    assert!((0.0..=1.0).contains(&rho), "rho must lie in [0, 1]");
    let mut scale = 1.0;
    let coeffs = series
        .coeffs()
        .iter()
        .map(|c| {
            let v = c * scale;
            scale *= rho;
            v
        })
        .collect();
    HermiteSeries::new(coeffs)
}

/// A Gauss quadrature rule computing `E_{X ~ N(0,1)}[f(X)]`, exact for
/// polynomial `f` of degree `<= 2n - 1`.
///
/// Nodes are the eigenvalues of the `n x n` Jacobi matrix of the recurrence
/// (zero diagonal, off-diagonal `sqrt(i)`); the weight at node `i` is the
/// squared first component of the corresponding eigenvector (the total mass
/// `mu_0` of the standard normal weight is 1).
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Build (or fetch from the process-wide cache) the `n`-node rule.
    pub fn new(n: usize) -> Arc<Self> {
        assert!(n >= 1, "quadrature needs at least one node");
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("quadrature cache poisoned");
        map.entry(n).or_insert_with(|| Arc::new(Self::build(n))).clone()
    }

    fn build(n: usize) -> Self {
        let jacobi = DMatrix::from_fn(n, n, |r, c| {
            if r + 1 == c || c + 1 == r {
                (r.max(c) as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        GaussHermite {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Quadrature nodes in ascending order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights matching [`Self::nodes`]; they sum to 1.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E_{X ~ N(0,1)}[f(X)]` under this rule.
    pub fn expectation(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Default node count for integrating an expression of polynomial degree
/// `max_degree`: comfortably past the `2n - 1 >= max_degree` exactness bound.
pub fn default_quadrature_nodes(max_degree: usize) -> usize {
    4 * max_degree + 8
}

/// `E_{X ~ N(0,1)}[f(X)]` by an `n`-node Gauss rule.
pub fn gauss_quadrature_expectation(f: impl FnMut(f64) -> f64, nodes: usize) -> f64 {
    GaussHermite::new(nodes).expectation(f)
}

/// Grid-search maximum of `h_k(x)^2 e^{-x^2/2}` over `[-W, W]` with
/// `W = sqrt(4k + 8)` (the weighted square decays past the turning point).
/// `grid_points` controls the resolution; pass 0 for the default `200_000`.
///
/// The maxima decay like `k^{-1/6}`, which is what keeps high-degree
/// coefficient budgets summable in the chi-square audits.
pub fn hermite_tail_sup(k: usize, grid_points: usize) -> f64 {
    let g = if grid_points == 0 { 200_000 } else { grid_points };
    assert!(g >= 2, "tail sup needs at least two grid points");
    let w = (4.0 * k as f64 + 8.0).sqrt();
    let mut best = f64::NEG_INFINITY;
    for i in 0..g {
        let x = -w + 2.0 * w * (i as f64) / ((g - 1) as f64);
        let h = hermite_eval(k, x);
        let v = h * h * (-0.5 * x * x).exp();
        if v > best {
            best = v;
        }
    }
    best
}
