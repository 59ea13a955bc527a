//! A small dense simplex for L1 moment-feasibility problems.
//!
//! The one problem shape solved here:
//!
//! ```text
//! minimize   sum_i (s_i^+ + s_i^-)
//! subject to H w + s^+ - s^- = e,     w >= 0, s^+/- >= 0,
//! ```
//!
//! where `H` is a short, wide matrix of basis-function values on a candidate
//! grid and `e` is a target moment vector. The slack pairs are an immediate
//! basic feasible solution, so a single phase suffices; the optimum is the
//! minimal total L1 violation of the moment constraints, and an optimal basic
//! solution puts positive weight on at most `rows` grid columns.
//!
//! Pivoting is Dantzig's rule with smallest-index tie-breaks, switching to
//! Bland's rule after a stall threshold so termination is guaranteed. All
//! choices are deterministic. Callers are expected to feed row-equilibrated
//! data (entries of order one); tolerances are absolute.

use nalgebra::DMatrix;

/// One variable of the LP, identifying a column of the extended system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BasisVar {
    /// Grid column `j` of `H`.
    Col(usize),
    /// Slack `s_i^+` (column `+e_i`, objective cost 1).
    SlackPlus(usize),
    /// Slack `s_i^-` (column `-e_i`, objective cost 1).
    SlackMinus(usize),
}

/// Output of [`solve_l1`]: grid weights, the recomputed L1 violation of the
/// returned weights against the constraints, and the final basis (reusable
/// for warm re-solves at perturbed targets).
#[derive(Debug, Clone)]
pub(crate) struct L1Solution {
    pub weights: Vec<(usize, f64)>,
    /// Recomputed violation on the scaled system; the caller re-judges
    /// feasibility on the unscaled one, so this is diagnostic.
    #[cfg_attr(not(test), allow(dead_code))]
    pub violation: f64,
    pub basis: Vec<BasisVar>,
    #[allow(dead_code)]
    pub iterations: usize,
}

const RC_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-11;
const WEIGHT_CLAMP: f64 = 1e-10;

/// Column-major access helper for `H` (`rows x cols`, column stride `rows`).
#[inline]
fn col(h: &[f64], rows: usize, j: usize) -> &[f64] {
    &h[j * rows..(j + 1) * rows]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize the total slack for `H w + s^+ - s^- = e`.
pub(crate) fn solve_l1(h: &[f64], rows: usize, cols: usize, e: &[f64]) -> L1Solution {
    assert_eq!(h.len(), rows * cols, "H dimension mismatch");
    assert_eq!(e.len(), rows, "target dimension mismatch");

    // Initial basis: per row, whichever signed slack makes the basic value
    // nonnegative. The basis inverse is then diag(+-1).
    let mut basis: Vec<BasisVar> = (0..rows)
        .map(|i| {
            if e[i] >= 0.0 {
                BasisVar::SlackPlus(i)
            } else {
                BasisVar::SlackMinus(i)
            }
        })
        .collect();
    let mut binv = DMatrix::<f64>::zeros(rows, rows);
    for i in 0..rows {
        binv[(i, i)] = if e[i] >= 0.0 { 1.0 } else { -1.0 };
    }
    let mut xb: Vec<f64> = e.iter().map(|v| v.abs()).collect();

    let max_iters = 400 + 40 * (rows + cols);
    let bland_after = 200 + 10 * rows * rows;
    let mut iterations = 0usize;
    let mut pi = vec![0.0; rows];
    let mut dir = vec![0.0; rows];

    loop {
        if iterations >= max_iters {
            break;
        }
        // Duals: pi^T = c_B^T B^{-1}; c_B is 1 on slack basics, 0 on grid
        // columns.
        for i in 0..rows {
            let mut acc = 0.0;
            for (k, var) in basis.iter().enumerate() {
                if !matches!(var, BasisVar::Col(_)) {
                    acc += binv[(k, i)];
                }
            }
            pi[i] = acc;
        }

        // Price all columns. Global ordering for tie-breaks and Bland's rule:
        // grid columns first, then slack pairs.
        let bland = iterations >= bland_after;
        let mut enter: Option<(usize, BasisVar, f64)> = None;
        'price: {
            for j in 0..cols {
                let rc = -dot(&pi, col(h, rows, j));
                if rc < -RC_TOL {
                    if bland {
                        enter = Some((j, BasisVar::Col(j), rc));
                        break 'price;
                    }
                    if enter.map_or(true, |(_, _, best)| rc < best) {
                        enter = Some((j, BasisVar::Col(j), rc));
                    }
                }
            }
            for i in 0..rows {
                for (ord, var, rc) in [
                    (cols + 2 * i, BasisVar::SlackPlus(i), 1.0 - pi[i]),
                    (cols + 2 * i + 1, BasisVar::SlackMinus(i), 1.0 + pi[i]),
                ] {
                    if rc < -RC_TOL {
                        if bland {
                            enter = Some((ord, var, rc));
                            break 'price;
                        }
                        if enter.map_or(true, |(_, _, best)| rc < best) {
                            enter = Some((ord, var, rc));
                        }
                    }
                }
            }
        }
        let Some((_, entering, _)) = enter else {
            break; // optimal
        };

        // Direction d = B^{-1} A_enter.
        match entering {
            BasisVar::Col(j) => {
                let a = col(h, rows, j);
                for i in 0..rows {
                    let mut acc = 0.0;
                    for k in 0..rows {
                        acc += binv[(i, k)] * a[k];
                    }
                    dir[i] = acc;
                }
            }
            BasisVar::SlackPlus(r) => {
                for i in 0..rows {
                    dir[i] = binv[(i, r)];
                }
            }
            BasisVar::SlackMinus(r) => {
                for i in 0..rows {
                    dir[i] = -binv[(i, r)];
                }
            }
        }

        // Ratio test; ties resolved toward the smallest basic variable index
        // (grid columns order before slacks) for determinism.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            if dir[i] > PIVOT_TOL {
                let ratio = xb[i] / dir[i];
                let better = match leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && var_order(basis[i], cols) < var_order(basis[li], cols))
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((leave_idx, theta)) = leave else {
            // Unbounded descent cannot happen (objective >= 0); bail out and
            // let the caller judge the recomputed violation.
            break;
        };

        // Pivot: update basic values and the inverse (eta update).
        for i in 0..rows {
            if i != leave_idx {
                xb[i] -= theta * dir[i];
                if xb[i] < 0.0 {
                    xb[i] = 0.0;
                }
            }
        }
        xb[leave_idx] = theta;
        let piv = dir[leave_idx];
        for c in 0..rows {
            binv[(leave_idx, c)] /= piv;
        }
        for r in 0..rows {
            if r != leave_idx {
                let f = dir[r];
                if f != 0.0 {
                    for c in 0..rows {
                        binv[(r, c)] -= f * binv[(leave_idx, c)];
                    }
                }
            }
        }
        basis[leave_idx] = entering;
        iterations += 1;
    }

    let weights = basic_weights(h, rows, e, &basis).unwrap_or_else(|| {
        // Singular refactorization: fall back to the iteratively updated
        // values, which are still a valid (if less polished) solution.
        basis
            .iter()
            .zip(&xb)
            .filter_map(|(var, &v)| match var {
                BasisVar::Col(j) if v > WEIGHT_CLAMP => Some((*j, v)),
                _ => None,
            })
            .collect()
    });
    let violation = l1_violation(h, rows, e, &weights);
    L1Solution {
        weights,
        violation,
        basis,
        iterations,
    }
}

fn var_order(v: BasisVar, cols: usize) -> usize {
    match v {
        BasisVar::Col(j) => j,
        BasisVar::SlackPlus(i) => cols + 2 * i,
        BasisVar::SlackMinus(i) => cols + 2 * i + 1,
    }
}

/// Re-solve the square basis system `B x = e` by a fresh LU factorization and
/// return the grid-column weights, or `None` if the basis is numerically
/// singular or a weight is materially negative.
pub(crate) fn basic_weights(
    h: &[f64],
    rows: usize,
    e: &[f64],
    basis: &[BasisVar],
) -> Option<Vec<(usize, f64)>> {
    let b = DMatrix::from_fn(rows, rows, |r, c| match basis[c] {
        BasisVar::Col(j) => col(h, rows, j)[r],
        BasisVar::SlackPlus(i) => {
            if r == i {
                1.0
            } else {
                0.0
            }
        }
        BasisVar::SlackMinus(i) => {
            if r == i {
                -1.0
            } else {
                0.0
            }
        }
    });
    let rhs = DMatrix::from_column_slice(rows, 1, e);
    let sol = b.lu().solve(&rhs)?;
    let mut weights = Vec::new();
    for (k, var) in basis.iter().enumerate() {
        let v = sol[(k, 0)];
        if let BasisVar::Col(j) = var {
            if v < -WEIGHT_CLAMP {
                return None;
            }
            if v > WEIGHT_CLAMP {
                weights.push((*j, v));
            }
        }
    }
    weights.sort_by_key(|&(j, _)| j);
    Some(weights)
}

/// Total L1 violation `sum_i |(H w)_i - e_i|` of a sparse weight vector.
pub(crate) fn l1_violation(h: &[f64], rows: usize, e: &[f64], weights: &[(usize, f64)]) -> f64 {
    let mut resid: Vec<f64> = e.iter().map(|v| -v).collect();
    for &(j, w) in weights {
        let a = col(h, rows, j);
        for i in 0..rows {
            resid[i] += w * a[i];
        }
    }
    resid.iter().map(|r| r.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Build column-major data from a row-major literal.
    fn colmajor(rows: usize, cols: usize, rowmajor: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                h[c * rows + r] = rowmajor[r * cols + c];
            }
        }
        h
    }

    #[test]
    fn exact_point_mass_target() {
        // Columns are (1, t) for t in {-1, 0, 2}; target mean 0.5 with unit
        // mass has the two-atom solution 0.75 * delta_0 + 0.25 * delta_2.
        let h = colmajor(2, 3, &[1.0, 1.0, 1.0, -1.0, 0.0, 2.0]);
        let sol = solve_l1(&h, 2, 3, &[1.0, 0.5]);
        assert!(sol.violation <= 1e-12, "violation {}", sol.violation);
        let total: f64 = sol.weights.iter().map(|w| w.1).sum();
        assert!((total - 1.0).abs() <= 1e-12);
        let mean: f64 = sol
            .weights
            .iter()
            .map(|&(j, w)| w * [-1.0, 0.0, 2.0][j])
            .sum();
        assert!((mean - 0.5).abs() <= 1e-12);
        assert!(sol.weights.len() <= 2);
    }

    #[test]
    fn infeasible_target_reports_residual() {
        // Single unit-mass constraint plus an unreachable mean: columns
        // (1, t) with t in [-1, 1] cannot give mean 3; best effort leaves a
        // violation of 2.
        let h = colmajor(2, 2, &[1.0, 1.0, -1.0, 1.0]);
        let sol = solve_l1(&h, 2, 2, &[1.0, 3.0]);
        assert!((sol.violation - 2.0).abs() <= 1e-12, "violation {}", sol.violation);
    }

    #[test]
    fn warm_basis_reuse_tracks_perturbed_targets() {
        let h = colmajor(2, 3, &[1.0, 1.0, 1.0, -1.0, 0.0, 2.0]);
        let sol = solve_l1(&h, 2, 3, &[1.0, 0.5]);
        // Perturb the target mean; the same basis still covers it.
        let warm = basic_weights(&h, 2, &[1.0, 0.55], &sol.basis).expect("basis reusable");
        assert!(l1_violation(&h, 2, &[1.0, 0.55], &warm) <= 1e-12);
    }

    #[test]
    fn zero_target_gives_zero_weights() {
        let h = colmajor(1, 2, &[1.0, 1.0]);
        let sol = solve_l1(&h, 1, 2, &[0.0]);
        assert!(sol.violation <= 1e-15);
        assert!(sol.weights.is_empty());
    }
}
