//! Spike-plus-complement mixtures that match Gaussian moments.
//!
//! For a label value `y` and contamination rate `alpha`, the mixture
//!
//! ```text
//! M_y = alpha_y * delta_y + (1 - alpha_y) * F_y,
//! alpha_y = sqrt(alpha) * exp(-y^2 (1 - alpha) / 2),
//! ```
//!
//! must satisfy `E_{M_y}[h_i] = 0` for `i = 1..=2m`, i.e. the discrete
//! complement `F_y` has to hit the target Hermite moments
//! `e_i = -alpha_y h_i(y) / (1 - alpha_y)`. [`solve_complement`] finds such an
//! `F_y` supported on at most `2m + 1` atoms in `[-B, B]` by solving a grid LP
//! (minimize the total L1 moment violation over nonnegative weights on a
//! Chebyshev grid); a zero optimum is a *constructive feasibility
//! certificate*. The dual side — `E_{N(0,1)}[p] >= alpha_y p(y)` for every
//! polynomial `p` nonnegative on `[-B, B]` of degree `<= 2m` — is sampled
//! independently by [`dual_certificate_check`], and [`caratheodory_reduce`]
//! provides the support-reduction route used to cross-check the LP's atom
//! count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hermite::{
    gauss_quadrature_expectation, hermite_eval, hermite_eval_all, hermite_moments_of_discrete,
    HermiteSeries,
};
use crate::simplex::{self, BasisVar};

/// Moment-matching failures.
#[derive(Debug, Error)]
pub enum MomentMatchError {
    /// The LP could not reach the violation tolerance after escalating the
    /// support bound and grid resolution.
    #[error("no discrete complement within tolerance (best L1 violation {residual:.3e})")]
    Infeasible { residual: f64 },
    /// The null-space step of the support reduction lost precision.
    #[error("support reduction lost numerical rank (defect {defect:.3e})")]
    NumericalRankFailure { defect: f64 },
    /// A sampled dual polynomial certifies infeasibility beyond tolerance.
    #[error("duality certificate violated: normalized slack {slack:.3e} on trial {trial}")]
    CertificateViolation { slack: f64, trial: usize },
    /// A distribution or mixture failed its structural invariants.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

/// A finitely supported probability distribution on the line with a declared
/// support bound: atoms strictly increasing in `[-B, B]`, nonnegative weights
/// summing to one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    support_bound: f64,
}

impl DiscreteDistribution {
    /// Validate and build. Weight sums may deviate from 1 by at most 1e-12;
    /// atoms must be strictly increasing and inside the bound.
    pub fn new(
        atoms: Vec<f64>,
        weights: Vec<f64>,
        support_bound: f64,
    ) -> Result<Self, MomentMatchError> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(MomentMatchError::InvalidDistribution(format!(
                "{} atoms vs {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if !(support_bound > 0.0) {
            return Err(MomentMatchError::InvalidDistribution(format!(
                "support bound {support_bound} must be positive"
            )));
        }
        for pair in atoms.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(MomentMatchError::InvalidDistribution(format!(
                    "atoms not strictly increasing at {} -> {}",
                    pair[0], pair[1]
                )));
            }
        }
        for &t in &atoms {
            if t.abs() > support_bound + 1e-9 {
                return Err(MomentMatchError::InvalidDistribution(format!(
                    "atom {t} outside [-{support_bound}, {support_bound}]"
                )));
            }
        }
        let mut total = 0.0;
        for &w in &weights {
            if w < 0.0 {
                return Err(MomentMatchError::InvalidDistribution(format!(
                    "negative weight {w}"
                )));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(MomentMatchError::InvalidDistribution(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self {
            atoms,
            weights,
            support_bound,
        })
    }

    /// Atom locations, strictly increasing.
    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    /// Weights matching [`Self::atoms`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Declared support bound `B`.
    pub fn support_bound(&self) -> f64 {
        self.support_bound
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    /// True when there are no atoms (never constructed; kept for API hygiene).
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Hermite moments `E[h_i]`, `i = 0..=kmax`.
    pub fn hermite_moments(&self, kmax: usize) -> HermiteSeries {
        hermite_moments_of_discrete(&self.atoms, &self.weights, kmax)
    }
}

/// Spike mass at label `y`: `alpha_y = sqrt(alpha) * exp(-y^2 (1-alpha)/2)`.
///
/// Integrating `alpha_y` against the label marginal `N(0, 1/alpha)` returns
/// exactly `alpha`, so this is the per-label inlier rate that makes the
/// overall inlier fraction come out to `alpha`.
pub fn inlier_weight(y: f64, alpha: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    alpha.sqrt() * (-y * y * (1.0 - alpha) / 2.0).exp()
}

/// `alpha_y * value`, defined as 0 when the spike mass has underflowed to
/// exactly zero. Far-tail labels can make `h_i(y)` overflow to infinity while
/// `alpha_y` underflows; the true product is 0, not NaN.
#[inline]
pub(crate) fn spike_product(alpha_y: f64, value: f64) -> f64 {
    if alpha_y == 0.0 {
        0.0
    } else {
        alpha_y * value
    }
}

/// Hermite moments the complement must hit so the mixture's first `2m`
/// moments vanish: `e_0 = 1`, `e_i = -alpha_y h_i(y) / (1 - alpha_y)`.
pub fn target_complement_hermite(y: f64, alpha_y: f64, m: usize) -> Vec<f64> {
    assert!(m >= 1, "m must be at least 1");
    assert!((0.0..1.0).contains(&alpha_y), "alpha_y must lie in [0, 1)");
    if alpha_y == 0.0 {
        // Vanishing spike: the complement matches the plain Gaussian moments.
        let mut e = vec![0.0; 2 * m + 1];
        e[0] = 1.0;
        return e;
    }
    let h = hermite_eval_all(2 * m, y);
    let mut e = vec![1.0];
    for i in 1..=2 * m {
        e.push(-alpha_y * h[i] / (1.0 - alpha_y));
    }
    e
}

/// The reproducing-kernel value `sum_{i=0}^{m} h_i(y)^2`; the sharpest
/// rank-one dual witness has ratio `alpha_y * K_m(y, y)`, so a value above 1
/// certifies infeasibility before any LP work.
fn kernel_diag(m: usize, y: f64) -> f64 {
    hermite_eval_all(m, y).iter().map(|h| h * h).sum()
}

/// Diagnostic from the sufficiency lemma: `alpha_y * sum_{i=1}^{m} h_i(y)^2`.
/// Values at or below 1/2 guarantee feasibility of the degree-`2m` match;
/// larger values are reported but do not by themselves mean infeasibility.
pub fn sup_ratio_value(y: f64, alpha: f64, m: usize) -> f64 {
    assert!(m >= 1, "m must be at least 1");
    let alpha_y = inlier_weight(y, alpha);
    if alpha_y == 0.0 {
        return 0.0;
    }
    let h = hermite_eval_all(m, y);
    alpha_y * h[1..].iter().map(|v| v * v).sum::<f64>()
}

/// Default matching half-degree for a contamination rate: `max(1, floor(0.3 / sqrt(alpha)))`.
pub fn default_m(alpha: f64) -> usize {
    // The nudge keeps exact ratios (e.g. alpha = 0.01 -> 3) from landing one
    // ulp below their integer value before the floor.
    ((0.3 / alpha.sqrt() + 1e-9).floor() as usize).max(1)
}

/// Default complement support bound: `4 sqrt(m)`.
pub fn default_support_bound(m: usize) -> f64 {
    4.0 * (m as f64).sqrt()
}

/// Default LP grid resolution.
pub const DEFAULT_GRID_POINTS: usize = 2001;

/// Acceptance threshold on the LP's total L1 moment violation.
pub const LP_TOLERANCE: f64 = 1e-9;

/// Tolerance on the mixture's vanishing Hermite moments.
pub const MIXTURE_TOLERANCE: f64 = 1e-7;

/// Precomputed LP data for one `(m, B, grid)` family: Hermite columns on a
/// Chebyshev grid, row-equilibrated so the simplex sees entries of order one.
/// Shared by the direct solver and by warm re-solves at perturbed labels.
#[derive(Debug, Clone)]
pub(crate) struct ComplementGrid {
    pub m: usize,
    pub b: f64,
    pub grid: Vec<f64>,
    pub rows: usize,
    /// Column-major `rows x grid.len()` scaled Hermite values.
    pub h: Vec<f64>,
    pub row_scale: Vec<f64>,
}

impl ComplementGrid {
    pub fn new(m: usize, b: f64, grid_points: usize) -> Self {
        assert!(m >= 1 && b > 0.0);
        assert!(
            grid_points >= 4 * m + 4,
            "grid must have at least 4m + 4 points"
        );
        let grid = chebyshev_grid(b, grid_points);
        let rows = 2 * m + 1;
        let mut h = vec![0.0; rows * grid.len()];
        for (j, &t) in grid.iter().enumerate() {
            let vals = hermite_eval_all(2 * m, t);
            h[j * rows..(j + 1) * rows].copy_from_slice(&vals);
        }
        let mut row_scale = vec![1.0; rows];
        for i in 0..rows {
            let mut best: f64 = 0.0;
            for j in 0..grid.len() {
                best = best.max(h[j * rows + i].abs());
            }
            row_scale[i] = best.max(1.0);
        }
        for j in 0..grid.len() {
            for i in 0..rows {
                h[j * rows + i] /= row_scale[i];
            }
        }
        ComplementGrid {
            m,
            b,
            grid,
            rows,
            h,
            row_scale,
        }
    }

    /// Row-scaled target vector for label `y`.
    pub fn scaled_target(&self, y: f64, alpha_y: f64) -> Vec<f64> {
        target_complement_hermite(y, alpha_y, self.m)
            .iter()
            .zip(&self.row_scale)
            .map(|(e, s)| e / s)
            .collect()
    }

    /// Full simplex solve at label `y`; returns the weighted atoms, the
    /// unscaled L1 violation, and the final basis.
    pub fn solve(&self, y: f64, alpha_y: f64) -> (Vec<(f64, f64)>, f64, Vec<BasisVar>) {
        let e = self.scaled_target(y, alpha_y);
        let sol = simplex::solve_l1(&self.h, self.rows, self.grid.len(), &e);
        let support = self.support(&sol.weights);
        let violation = self.unscaled_violation(y, alpha_y, &support);
        (support, violation, sol.basis)
    }

    /// Warm re-solve at label `y` reusing a basis from a nearby label. Returns
    /// `None` when the basis is no longer feasible there.
    pub fn warm_solve(
        &self,
        y: f64,
        alpha_y: f64,
        basis: &[BasisVar],
    ) -> Option<(Vec<(f64, f64)>, f64)> {
        let e = self.scaled_target(y, alpha_y);
        let weights = simplex::basic_weights(&self.h, self.rows, &e, basis)?;
        let support = self.support(&weights);
        let violation = self.unscaled_violation(y, alpha_y, &support);
        (violation <= LP_TOLERANCE).then_some((support, violation))
    }

    fn support(&self, weights: &[(usize, f64)]) -> Vec<(f64, f64)> {
        weights
            .iter()
            .map(|&(j, w)| (self.grid[j], w))
            .collect()
    }

    /// L1 violation of a weighted support against the *unscaled* moment
    /// targets — the honest acceptance number.
    pub fn unscaled_violation(&self, y: f64, alpha_y: f64, support: &[(f64, f64)]) -> f64 {
        let e = target_complement_hermite(y, alpha_y, self.m);
        let mut resid: Vec<f64> = e.iter().map(|v| -v).collect();
        for &(t, w) in support {
            let h = hermite_eval_all(2 * self.m, t);
            for (r, hv) in resid.iter_mut().zip(&h) {
                *r += w * hv;
            }
        }
        resid.iter().map(|r| r.abs()).sum()
    }
}

/// Chebyshev(-Lobatto) grid on `[-b, b]`, ascending, endpoints included.
fn chebyshev_grid(b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| -b * (std::f64::consts::PI * j as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Find a discrete complement for label `y` at rate `alpha`: at most `2m + 1`
/// atoms in `[-B, B]` whose Hermite moments hit the mixture's targets within
/// [`LP_TOLERANCE`].
///
/// Escalation on failure: the support bound doubles (up to `8 B`) and the grid
/// is refined (up to 16001 points) before reporting [`MomentMatchError::Infeasible`]
/// with the best violation seen. A reproducing-kernel dual witness with
/// `alpha_y K_m(y,y) > 1` short-circuits straight to `Infeasible`, since no
/// support bound can repair that.
pub fn solve_complement(
    y: f64,
    alpha: f64,
    m: usize,
    b: f64,
    grid_points: usize,
) -> Result<DiscreteDistribution, MomentMatchError> {
    let alpha_y = inlier_weight(y, alpha);
    solve_complement_weighted(y, alpha_y, m, b, grid_points)
}

/// Whether the rank-one kernel witness certifies infeasibility at this label.
fn kernel_infeasible(y: f64, alpha_y: f64, m: usize) -> Option<f64> {
    let value = spike_product(alpha_y, kernel_diag(m, y));
    (value > 1.0 + 1e-12).then_some(value - 1.0)
}

/// [`solve_complement`] with the spike mass supplied directly.
pub fn solve_complement_weighted(
    y: f64,
    alpha_y: f64,
    m: usize,
    b: f64,
    grid_points: usize,
) -> Result<DiscreteDistribution, MomentMatchError> {
    assert!(m >= 1, "m must be at least 1");
    assert!(b > 0.0, "support bound must be positive");
    if let Some(excess) = kernel_infeasible(y, alpha_y, m) {
        return Err(MomentMatchError::Infeasible { residual: excess });
    }

    let mut grids = vec![grid_points];
    for g in [4 * grid_points + 1, 16_001] {
        if g > grid_points && g <= 16_001 && !grids.contains(&g) {
            grids.push(g);
        }
    }
    let mut best = f64::INFINITY;
    for scale in [1.0, 2.0, 4.0, 8.0] {
        for &g in &grids {
            let lp = ComplementGrid::new(m, b * scale, g);
            let (support, violation, _) = lp.solve(y, alpha_y);
            if violation <= LP_TOLERANCE {
                return finish_support(support, b * scale, m);
            }
            best = best.min(violation);
        }
    }
    Err(MomentMatchError::Infeasible { residual: best })
}

/// Turn LP support into a validated distribution, reducing the atom count if
/// a degenerate solve left more than `2m + 1` active columns.
fn finish_support(
    support: Vec<(f64, f64)>,
    b: f64,
    m: usize,
) -> Result<DiscreteDistribution, MomentMatchError> {
    let atoms: Vec<f64> = support.iter().map(|s| s.0).collect();
    let mut weights: Vec<f64> = support.iter().map(|s| s.1).collect();
    // Guard against a residual sum drift of a few ulps breaking validation.
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() <= 1e-12 {
        // leave as-is
    } else if (total - 1.0).abs() <= 1e-10 {
        for w in &mut weights {
            *w /= total;
        }
    }
    let dist = DiscreteDistribution::new(atoms, weights, b)?;
    if dist.len() > 2 * m + 1 {
        caratheodory_reduce(&dist, m)
    } else {
        Ok(dist)
    }
}

/// Reduce a distribution to at most `2m + 1` atoms while preserving Hermite
/// moments `0..=2m`, by repeatedly moving along a null direction of the
/// moment matrix until a weight hits zero.
pub fn caratheodory_reduce(
    dist: &DiscreteDistribution,
    m: usize,
) -> Result<DiscreteDistribution, MomentMatchError> {
    assert!(m >= 1, "m must be at least 1");
    let rows = 2 * m + 1;
    let before = dist.hermite_moments(2 * m);
    let mut atoms = dist.atoms().to_vec();
    let mut weights = dist.weights().to_vec();

    while atoms.len() > rows {
        let k = atoms.len();
        let mat = nalgebra::DMatrix::from_fn(rows, k, |i, j| hermite_eval(i, atoms[j]));
        let nu = null_vector(&mat)?;
        // Defect check: the direction must genuinely annihilate the moments.
        let mut defect: f64 = 0.0;
        for i in 0..rows {
            let mut acc = 0.0;
            for j in 0..k {
                acc += mat[(i, j)] * nu[j];
            }
            defect = defect.max(acc.abs());
        }
        let scale = mat.amax().max(1.0);
        if defect > 1e-8 * scale {
            return Err(MomentMatchError::NumericalRankFailure { defect });
        }

        // Step sizes that zero the first weight in each direction.
        let mut theta_pos = f64::INFINITY; // move +nu, limited by nu_j < 0
        let mut theta_neg = f64::INFINITY; // move -nu, limited by nu_j > 0
        for (w, &v) in weights.iter().zip(&nu) {
            if v < -1e-14 {
                theta_pos = theta_pos.min(w / -v);
            } else if v > 1e-14 {
                theta_neg = theta_neg.min(w / v);
            }
        }
        if !theta_pos.is_finite() && !theta_neg.is_finite() {
            return Err(MomentMatchError::NumericalRankFailure { defect: f64::NAN });
        }
        let step = if theta_pos <= theta_neg { theta_pos } else { -theta_neg };
        for (w, &v) in weights.iter_mut().zip(&nu) {
            *w += step * v;
        }
        let (mut next_atoms, mut next_weights) = (Vec::new(), Vec::new());
        for (&t, &w) in atoms.iter().zip(&weights) {
            if w > 1e-13 {
                next_atoms.push(t);
                next_weights.push(w);
            }
        }
        if next_atoms.len() == atoms.len() {
            return Err(MomentMatchError::NumericalRankFailure { defect });
        }
        atoms = next_atoms;
        weights = next_weights;
    }

    let reduced = DiscreteDistribution::new(atoms, weights, dist.support_bound())?;
    let after = reduced.hermite_moments(2 * m);
    let drift = before
        .coeffs()
        .iter()
        .zip(after.coeffs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if drift > 1e-9 {
        return Err(MomentMatchError::NumericalRankFailure { defect: drift });
    }
    Ok(reduced)
}

/// A null vector of a short, wide matrix via column-pivoted QR.
fn null_vector(mat: &nalgebra::DMatrix<f64>) -> Result<Vec<f64>, MomentMatchError> {
    let rows = mat.nrows();
    let k = mat.ncols();
    debug_assert!(k > rows);
    let qr = mat.clone().col_piv_qr();
    let r = qr.r();
    let p = qr.p();
    // Recover the column permutation by applying it to an index row.
    let mut index_row = nalgebra::DMatrix::from_fn(1, k, |_, j| j as f64);
    p.permute_columns(&mut index_row);
    let perm: Vec<usize> = (0..k).map(|j| index_row[(0, j)] as usize).collect();

    // Solve the triangular system R[.., ..rows] z = -R[.., rows].
    let mut z = vec![0.0; rows];
    for i in (0..rows).rev() {
        let mut acc = -r[(i, rows)];
        for j in i + 1..rows {
            acc -= r[(i, j)] * z[j];
        }
        let d = r[(i, i)];
        if d.abs() < 1e-300 {
            return Err(MomentMatchError::NumericalRankFailure { defect: d.abs() });
        }
        z[i] = acc / d;
    }
    let mut nu = vec![0.0; k];
    for (pos, &orig) in perm.iter().enumerate() {
        if pos < rows {
            nu[orig] = z[pos];
        } else if pos == rows {
            nu[orig] = 1.0;
        }
    }
    // Canonical sign: first nonzero component positive.
    if let Some(first) = nu.iter().find(|v| v.abs() > 0.0) {
        if *first < 0.0 {
            for v in &mut nu {
                *v = -*v;
            }
        }
    }
    Ok(nu)
}

/// The spike-plus-complement mixture for one label, with its matching
/// half-degree. Construction verifies the vanishing-moment invariant.
#[derive(Debug, Clone)]
pub struct SpikeMixture {
    y: f64,
    alpha_y: f64,
    complement: DiscreteDistribution,
    m: usize,
}

impl SpikeMixture {
    /// Assemble and validate: `|E_mixture[h_i]| <= 1e-7` for `i = 1..=2m`.
    pub fn new(
        y: f64,
        alpha_y: f64,
        complement: DiscreteDistribution,
        m: usize,
    ) -> Result<Self, MomentMatchError> {
        if !(0.0..1.0).contains(&alpha_y) {
            return Err(MomentMatchError::InvalidDistribution(format!(
                "spike mass {alpha_y} outside [0, 1)"
            )));
        }
        let mix = Self {
            y,
            alpha_y,
            complement,
            m,
        };
        let worst = mix
            .hermite_residuals()
            .into_iter()
            .fold(0.0f64, |a, r| a.max(r.abs()));
        if worst > MIXTURE_TOLERANCE {
            return Err(MomentMatchError::InvalidDistribution(format!(
                "mixture moment residual {worst:.3e} exceeds {MIXTURE_TOLERANCE:.0e}"
            )));
        }
        Ok(mix)
    }

    /// Solve the complement and assemble the mixture in one step.
    pub fn solve(
        y: f64,
        alpha: f64,
        m: usize,
        b: f64,
        grid_points: usize,
    ) -> Result<Self, MomentMatchError> {
        let alpha_y = inlier_weight(y, alpha);
        let complement = solve_complement_weighted(y, alpha_y, m, b, grid_points)?;
        Self::new(y, alpha_y, complement, m)
    }

    pub fn label(&self) -> f64 {
        self.y
    }

    pub fn spike_mass(&self) -> f64 {
        self.alpha_y
    }

    pub fn complement(&self) -> &DiscreteDistribution {
        &self.complement
    }

    pub fn matching_half_degree(&self) -> usize {
        self.m
    }

    /// Mixture Hermite moments `E[h_i]`, `i = 0..=kmax`.
    pub fn hermite_moments(&self, kmax: usize) -> HermiteSeries {
        let spike = hermite_eval_all(kmax, self.y);
        let comp = self.complement.hermite_moments(kmax);
        let coeffs = spike
            .iter()
            .zip(comp.coeffs())
            .map(|(s, c)| spike_product(self.alpha_y, *s) + (1.0 - self.alpha_y) * c)
            .collect();
        HermiteSeries::new(coeffs)
    }

    /// The vanishing-moment residuals, `i = 1..=2m`.
    pub fn hermite_residuals(&self) -> Vec<f64> {
        self.hermite_moments(2 * self.m).coeffs()[1..].to_vec()
    }
}

/// One sampled dual witness.
#[derive(Debug, Clone)]
pub struct CertificateWitness {
    /// `false`: `p = r^2` with `deg r <= m`; `true`: `p = (B^2 - x^2) q^2`
    /// with `deg q <= m - 1`.
    pub edge_form: bool,
    /// Hermite-basis coefficients of `r` or `q`.
    pub coefficients: Vec<f64>,
    /// Normalized slack `(E[p] - alpha_y p(y)) / scale(p)`.
    pub slack: f64,
}

/// Result of sampling dual certificates.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub trials: usize,
    pub min_slack: f64,
    pub witness: CertificateWitness,
}

/// Sample `trials` random polynomials of each admissible form and verify the
/// duality inequality `E_{N(0,1)}[p] >= alpha_y p(y)` to a relative slack of
/// `-1e-9`. Coefficients are standard normal in the Hermite basis.
pub fn dual_certificate_check(
    mix: &SpikeMixture,
    trials: usize,
    seed: u64,
) -> Result<CertificateReport, MomentMatchError> {
    assert!(trials >= 1, "at least one trial required");
    let m = mix.matching_half_degree();
    let b = mix.complement().support_bound();
    let y = mix.label();
    let alpha_y = mix.spike_mass();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quad_nodes = 2 * m + 4;
    let hy = hermite_eval_all(m, y);

    let mut min_slack = f64::INFINITY;
    let mut witness = None;
    let mut violation = None;
    for trial in 0..trials {
        // Square form: E[r^2] is the squared coefficient norm by
        // orthonormality; no quadrature needed.
        let c: Vec<f64> = (0..=m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let energy: f64 = c.iter().map(|v| v * v).sum();
        let r_at_y: f64 = c.iter().zip(&hy).map(|(ci, hi)| ci * hi).sum();
        let spike_term = spike_product(alpha_y, r_at_y * r_at_y);
        let slack = (energy - spike_term) / (energy + spike_term).max(f64::MIN_POSITIVE);
        if slack < min_slack {
            min_slack = slack;
            witness = Some(CertificateWitness {
                edge_form: false,
                coefficients: c.clone(),
                slack,
            });
        }
        if slack < -1e-9 && violation.is_none() {
            violation = Some((slack, trial));
        }

        // Edge form: p = (B^2 - x^2) q^2, nonnegative on [-B, B].
        let q: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let expectation = gauss_quadrature_expectation(
            |x| {
                let h = hermite_eval_all(m.saturating_sub(1), x);
                let qx: f64 = q.iter().zip(&h).map(|(qi, hi)| qi * hi).sum();
                (b * b - x * x) * qx * qx
            },
            quad_nodes,
        );
        let q_at_y: f64 = q.iter().zip(&hy).map(|(qi, hi)| qi * hi).sum();
        let spike_term = spike_product(alpha_y, (b * b - y * y) * q_at_y * q_at_y);
        let scale = (expectation.abs() + spike_term.abs()).max(f64::MIN_POSITIVE);
        let slack = (expectation - spike_term) / scale;
        if slack < min_slack {
            min_slack = slack;
            witness = Some(CertificateWitness {
                edge_form: true,
                coefficients: q.clone(),
                slack,
            });
        }
        if slack < -1e-9 && violation.is_none() {
            violation = Some((slack, trial));
        }
    }
    if let Some((slack, trial)) = violation {
        return Err(MomentMatchError::CertificateViolation { slack, trial });
    }
    Ok(CertificateReport {
        trials,
        min_slack,
        witness: witness.expect("at least one trial"),
    })
}

/// `B^2 E[q^2] - 2 E[X^2 q^2]` for a polynomial `q` given by Hermite
/// coefficients; nonnegative for every `deg q <= m` once `B` is a sufficient
/// multiple of `sqrt(m)`.
pub fn gauss_positivity_margin_of(coefficients: &[f64], b: f64) -> f64 {
    assert!(!coefficients.is_empty());
    let deg = coefficients.len() - 1;
    let nodes = 2 * deg + 4;
    let e_q2: f64 = coefficients.iter().map(|c| c * c).sum();
    let e_x2q2 = gauss_quadrature_expectation(
        |x| {
            let h = hermite_eval_all(deg, x);
            let qx: f64 = coefficients.iter().zip(&h).map(|(c, hv)| c * hv).sum();
            x * x * qx * qx
        },
        nodes,
    );
    b * b * e_q2 - 2.0 * e_x2q2
}

/// Minimum of [`gauss_positivity_margin_of`] over `trials` random unit-norm
/// polynomials of degree `<= m` (standard normal Hermite coefficients,
/// normalized so `E[q^2] = 1`).
pub fn gauss_positivity_margin(m: usize, b: f64, trials: usize, seed: u64) -> f64 {
    assert!(m >= 1 && trials >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_margin = f64::INFINITY;
    for _ in 0..trials {
        let mut c: Vec<f64> = (0..=m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        for v in &mut c {
            *v /= norm;
        }
        min_margin = min_margin.min(gauss_positivity_margin_of(&c, b));
    }
    min_margin
}
