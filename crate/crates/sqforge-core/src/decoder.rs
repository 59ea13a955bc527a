//! Inefficient (grid-search) list decoding of planted regressors.
//!
//! The decoder brute-forces a candidate grid of regressors and keeps those
//! passing two residual conditions evaluated on a core subset `T'` of
//! `ceil(alpha n / 2)` rows:
//!
//! 1. within `T'`, at most an `alpha / 20` fraction of residuals
//!    `r = y - x . beta` exceeds `sigma t` — the core really fits;
//! 2. for every direction `v` of a unit net and every shift
//!    `gamma' in {gamma, 2 gamma, 4 gamma, 8 gamma}`, at most an
//!    `alpha / 20` fraction of `T'` satisfies
//!    `|r - gamma' (v . x)| <= sigma t` — no shifted copy of the fit
//!    explains the core, which is what forces distinct survivors to be
//!    `gamma`-separated and caps the list size at `O(1/alpha)`.
//!
//! The core subset is existentially quantified in the underlying argument:
//! a candidate is legitimate if *some* subset of that size satisfies both
//! conditions. The witness used here is greedy: walk rows by increasing
//! |residual| and admit each row unless it would push some shifted
//! hyperplane's hug count past the per-plane budget
//! `floor((alpha/20) |T'|)`. Candidates near a true regressor then pass
//! outright (their clean rows are plentiful and hug nothing), while a
//! candidate offset by `gamma' v` finds its low-residual rows all hugging
//! one plane, gets budget-capped, and fails condition 1 on the wide-residual
//! fill — the same verdicts, decided robustly at finite sample sizes. Both
//! conditions are still checked verbatim on the final `T'`.
//!
//! Survivors are greedily packed at pairwise distance `gamma` in a
//! deterministic preference order (condition slack, then how tightly the
//! core fits, then grid index). Exhaustive search over a grid is exponential
//! in the dimension by nature; defaults are enforced only up to `d = 4`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Decoder failures (resource limits, not verdicts).
#[derive(Debug, Error)]
pub enum DecoderError {
    #[error("dataset too small: {rows} rows, need at least {needed} for the alpha n / 2 core")]
    DatasetTooSmall { rows: usize, needed: usize },
    #[error("candidate grid too coarse: {detail} (spacing {spacing:.3}, limit {limit:.3})")]
    GridTooCoarse {
        spacing: f64,
        limit: f64,
        detail: String,
    },
    #[error("invalid decoder input: {0}")]
    InvalidInput(String),
}

/// Shift multipliers applied to `gamma` in condition 2.
const GAMMA_LADDER: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

/// Thresholds of the residual membership test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecoderParams {
    /// Inlier fraction the decoder assumes.
    pub alpha: f64,
    /// Noise level of the regression.
    pub sigma: f64,
    /// Residual cutoff multiplier: core residuals should stay within `sigma t`.
    pub t: f64,
    /// Separation scale of the output list.
    pub gamma: f64,
}

impl DecoderParams {
    /// Defaults: `t = ceil(sqrt(2 ln(40 / alpha)))` (the smallest integer
    /// making the inlier tail mass below `alpha / 40`), and
    /// `gamma = 40 sigma t / alpha`.
    pub fn new(alpha: f64, sigma: f64) -> Result<Self, DecoderError> {
        Self::with_overrides(alpha, sigma, None, None)
    }

    /// Defaults with optional explicit `t` and `gamma`.
    pub fn with_overrides(
        alpha: f64,
        sigma: f64,
        t: Option<f64>,
        gamma: Option<f64>,
    ) -> Result<Self, DecoderError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(DecoderError::InvalidInput(format!(
                "alpha = {alpha} must lie in (0, 1)"
            )));
        }
        if !(sigma > 0.0) {
            return Err(DecoderError::InvalidInput(format!(
                "sigma = {sigma} must be positive"
            )));
        }
        let t = t.unwrap_or_else(|| (2.0 * (40.0 / alpha).ln()).sqrt().ceil());
        if !(t > 0.0) {
            return Err(DecoderError::InvalidInput(format!(
                "t = {t} must be positive"
            )));
        }
        let gamma = gamma.unwrap_or(40.0 * sigma * t / alpha);
        if !(gamma > 0.0) {
            return Err(DecoderError::InvalidInput(format!(
                "gamma = {gamma} must be positive"
            )));
        }
        Ok(Self {
            alpha,
            sigma,
            t,
            gamma,
        })
    }

    /// Membership failure threshold `alpha / 20`.
    pub fn fraction_limit(&self) -> f64 {
        self.alpha / 20.0
    }

    /// Core size `ceil(alpha n / 2)` for a dataset of `n` rows.
    pub fn core_size(&self, n: usize) -> usize {
        (self.alpha * n as f64 / 2.0).ceil() as usize
    }
}

/// Resolution of the candidate grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridResolution {
    /// Direction count on the circle (used for `d <= 2`).
    pub angular: usize,
    /// Integer-lattice radius for directions (used for `d in {3, 4}`).
    pub lattice_radius: usize,
    /// Magnitude steps: candidates use `|beta| = j / magnitudes`, `j = 1..=magnitudes`.
    pub magnitudes: usize,
}

impl GridResolution {
    /// Built-in defaults, available through dimension 4; higher dimensions
    /// have no default grid (the search is exponential in `d`).
    pub fn default_for(d: usize) -> Option<Self> {
        match d {
            1 | 2 => Some(Self {
                angular: 96,
                lattice_radius: 0,
                magnitudes: 32,
            }),
            3 => Some(Self {
                angular: 0,
                lattice_radius: 3,
                magnitudes: 16,
            }),
            4 => Some(Self {
                angular: 0,
                lattice_radius: 2,
                magnitudes: 16,
            }),
            _ => None,
        }
    }
}

/// Unit candidate directions for a grid resolution: antipodal points for
/// `d = 1`, a uniform circle net for `d = 2`, and gcd-reduced integer
/// lattice directions for `d in {3, 4}`.
pub fn candidate_directions(d: usize, res: &GridResolution) -> Result<Vec<Vec<f64>>, DecoderError> {
    match d {
        0 => Err(DecoderError::InvalidInput("dimension 0".into())),
        1 => Ok(vec![vec![1.0], vec![-1.0]]),
        2 => {
            if res.angular < 4 {
                return Err(DecoderError::InvalidInput(
                    "need at least 4 angular directions".into(),
                ));
            }
            Ok((0..res.angular)
                .map(|k| {
                    let theta = 2.0 * std::f64::consts::PI * k as f64 / res.angular as f64;
                    vec![theta.cos(), theta.sin()]
                })
                .collect())
        }
        3 | 4 => {
            let r = res.lattice_radius as i64;
            if r < 1 {
                return Err(DecoderError::InvalidInput(
                    "need lattice radius at least 1".into(),
                ));
            }
            let mut raw: Vec<Vec<i64>> = Vec::new();
            let mut point = vec![-r; d];
            'walk: loop {
                if point.iter().any(|&z| z != 0) {
                    let g = point.iter().fold(0i64, |acc, &z| gcd(acc, z.abs()));
                    let reduced: Vec<i64> = point.iter().map(|&z| z / g).collect();
                    if reduced == point {
                        raw.push(reduced);
                    }
                }
                for slot in (0..d).rev() {
                    point[slot] += 1;
                    if point[slot] <= r {
                        continue 'walk;
                    }
                    point[slot] = -r;
                }
                break;
            }
            Ok(raw
                .into_iter()
                .map(|z| {
                    let norm = z.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
                    z.iter().map(|&v| v as f64 / norm).collect()
                })
                .collect())
        }
        _ => Err(DecoderError::GridTooCoarse {
            spacing: f64::INFINITY,
            limit: 0.0,
            detail: format!("no default candidate grid beyond dimension 4 (got {d})"),
        }),
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Coarseness proxy of a direction net: the largest nearest-neighbor
/// distance. (For the two-point `d = 1` net this overestimates — the net is
/// exact there — but it is only ever compared against `gamma / 4`.)
pub fn net_spacing(directions: &[Vec<f64>]) -> f64 {
    if directions.len() < 2 {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for (i, u) in directions.iter().enumerate() {
        let mut nearest = f64::INFINITY;
        for (j, v) in directions.iter().enumerate() {
            if i == j {
                continue;
            }
            let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            nearest = nearest.min(d2.sqrt());
        }
        worst = worst.max(nearest);
    }
    worst
}

/// Outcome of the two residual conditions for one candidate regressor.
#[derive(Debug, Clone, Serialize)]
pub struct MembershipReport {
    pub pass: bool,
    /// Fraction of the core with `|r| > sigma t`.
    pub cond1_fraction: f64,
    /// Worst fraction of the core hugging one shifted hyperplane, over the
    /// direction net and the `gamma' in {gamma, .., 8 gamma}` ladder.
    pub cond2_fraction: f64,
    /// The `alpha / 20` threshold both fractions are compared to.
    pub fraction_limit: f64,
    /// Rows in the core `T'`.
    pub core_size: usize,
    /// Largest |residual| inside the core.
    pub core_max_residual: f64,
    /// Low-residual rows the greedy witness skipped to respect plane budgets.
    pub hug_skips: usize,
}

fn pool_size(n: usize, core: usize) -> usize {
    (2 * core).min(n)
}

fn ensure_core(params: &DecoderParams, n: usize) -> Result<usize, DecoderError> {
    if params.alpha * (n as f64) < 2.0 {
        return Err(DecoderError::DatasetTooSmall {
            rows: n,
            needed: (2.0 / params.alpha).ceil() as usize,
        });
    }
    Ok(params.core_size(n))
}

/// Greedy witness selection plus scoring of both conditions.
///
/// `pool` holds `(signed residual, dataset row)` sorted by |residual|
/// ascending, at least `core` entries; `pool_dots[v][pos]` is the dot of net
/// direction `v` with the covariates at pool position `pos`.
fn select_and_score(
    pool: &[(f64, usize)],
    pool_dots: &[Vec<f64>],
    core: usize,
    params: &DecoderParams,
) -> MembershipReport {
    let cutoff = params.sigma * params.t;
    let limit = params.fraction_limit();
    let planes = pool_dots.len() * GAMMA_LADDER.len();
    let budget = (limit * core as f64).floor() as u32;

    // Which shifted hyperplanes each pool row hugs.
    let mut row_planes: Vec<Vec<u32>> = vec![Vec::new(); pool.len()];
    for (vi, dot_row) in pool_dots.iter().enumerate() {
        for (li, ladder) in GAMMA_LADDER.iter().enumerate() {
            let shift = ladder * params.gamma;
            let plane = (vi * GAMMA_LADDER.len() + li) as u32;
            for (pos, &(r, _)) in pool.iter().enumerate() {
                if (r - shift * dot_row[pos]).abs() <= cutoff {
                    row_planes[pos].push(plane);
                }
            }
        }
    }

    // Admit rows by increasing |residual| while every touched plane stays
    // within budget; track skips and fill from them if the pool runs dry.
    let mut counts = vec![0u32; planes];
    let mut chosen: Vec<usize> = Vec::with_capacity(core);
    let mut skipped: Vec<usize> = Vec::new();
    for pos in 0..pool.len() {
        if chosen.len() == core {
            break;
        }
        if row_planes[pos].iter().all(|&p| counts[p as usize] < budget) {
            for &p in &row_planes[pos] {
                counts[p as usize] += 1;
            }
            chosen.push(pos);
        } else {
            skipped.push(pos);
        }
    }
    let hug_skips = skipped.len();
    let mut fill = skipped.into_iter();
    while chosen.len() < core {
        match fill.next() {
            Some(pos) => {
                for &p in &row_planes[pos] {
                    counts[p as usize] += 1;
                }
                chosen.push(pos);
            }
            None => break, // pool exhausted; score what we have
        }
    }

    let core_size = chosen.len();
    let mut over = 0usize;
    let mut core_max: f64 = 0.0;
    for &pos in &chosen {
        let r = pool[pos].0.abs();
        if r > cutoff {
            over += 1;
        }
        core_max = core_max.max(r);
    }
    let cond1 = over as f64 / core_size as f64;
    let cond2 = counts.iter().copied().max().unwrap_or(0) as f64 / core_size as f64;
    MembershipReport {
        pass: core_size == core && cond1 <= limit && cond2 <= limit,
        cond1_fraction: cond1,
        cond2_fraction: cond2,
        fraction_limit: limit,
        core_size,
        core_max_residual: core_max,
        hug_skips,
    }
}

/// Keep the `pool_len` smallest-|residual| entries, ordered ascending;
/// `entries` is `(signed residual, row)`.
fn front_pool(entries: &mut Vec<(f64, usize)>, pool_len: usize) {
    if pool_len < entries.len() {
        entries.select_nth_unstable_by(pool_len - 1, |a, b| a.0.abs().total_cmp(&b.0.abs()));
        entries.truncate(pool_len);
    }
    entries.sort_unstable_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
}

/// Evaluate the membership conditions for one candidate `beta` against a
/// direction net. `xs` is row-major `n x d`.
pub fn membership_score(
    xs: &[f64],
    ys: &[f64],
    d: usize,
    beta: &[f64],
    params: &DecoderParams,
    net: &[Vec<f64>],
) -> Result<MembershipReport, DecoderError> {
    let n = ys.len();
    if xs.len() != n * d {
        return Err(DecoderError::InvalidInput(format!(
            "covariates have {} entries, expected {}",
            xs.len(),
            n * d
        )));
    }
    if beta.len() != d {
        return Err(DecoderError::InvalidInput(format!(
            "candidate has length {}, dimension is {d}",
            beta.len()
        )));
    }
    let core = ensure_core(params, n)?;
    let mut pool: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let row = &xs[i * d..(i + 1) * d];
            let pred: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            (ys[i] - pred, i)
        })
        .collect();
    front_pool(&mut pool, pool_size(n, core));
    let pool_dots: Vec<Vec<f64>> = net
        .iter()
        .map(|v| {
            pool.iter()
                .map(|&(_, i)| {
                    let row = &xs[i * d..(i + 1) * d];
                    row.iter().zip(v).map(|(a, b)| a * b).sum()
                })
                .collect()
        })
        .collect();
    Ok(select_and_score(&pool, &pool_dots, core, params))
}

/// One scored candidate from a decode run.
#[derive(Debug, Clone, Serialize)]
pub struct ScoredCandidate {
    pub beta: Vec<f64>,
    pub report: MembershipReport,
}

/// Full decode output: the `gamma`-separated list plus every passing
/// candidate (for reporting).
#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub list: Vec<Vec<f64>>,
    pub passing: Vec<ScoredCandidate>,
    pub candidates_scored: usize,
}

/// Grid-search list decoding. Scores every candidate on the grid
/// (directions x magnitudes in [0, 1], plus the origin), keeps those passing
/// both membership conditions, and greedily packs them at pairwise distance
/// `gamma`, preferring candidates with smaller condition fractions and, on
/// ties, a tighter core fit.
pub fn list_decode(
    xs: &[f64],
    ys: &[f64],
    d: usize,
    params: &DecoderParams,
    resolution: Option<GridResolution>,
) -> Result<DecodeOutcome, DecoderError> {
    let n = ys.len();
    if xs.len() != n * d {
        return Err(DecoderError::InvalidInput(format!(
            "covariates have {} entries, expected {}",
            xs.len(),
            n * d
        )));
    }
    let core = ensure_core(params, n)?;
    let res = resolution
        .or_else(|| GridResolution::default_for(d))
        .ok_or_else(|| DecoderError::GridTooCoarse {
            spacing: f64::INFINITY,
            limit: params.gamma / 4.0,
            detail: format!("no default candidate grid beyond dimension 4 (got {d})"),
        })?;
    let directions = candidate_directions(d, &res)?;
    let spacing = net_spacing(&directions);
    let limit = params.gamma / 4.0;
    if spacing > limit {
        return Err(DecoderError::GridTooCoarse {
            spacing,
            limit,
            detail: "direction net nearest-neighbor spacing exceeds gamma / 4".into(),
        });
    }
    if res.magnitudes < 1 {
        return Err(DecoderError::InvalidInput(
            "need at least one magnitude step".into(),
        ));
    }

    // v . x for every net direction and row, shared by all candidates.
    let dots: Vec<Vec<f64>> = directions
        .par_iter()
        .map(|v| {
            (0..n)
                .map(|i| {
                    let row = &xs[i * d..(i + 1) * d];
                    row.iter().zip(v).map(|(a, b)| a * b).sum()
                })
                .collect()
        })
        .collect();

    // Candidate grid: the origin, then every direction at magnitudes j/M.
    let mut candidates: Vec<(Option<usize>, f64)> = vec![(None, 0.0)];
    for k in 0..directions.len() {
        for j in 1..=res.magnitudes {
            candidates.push((Some(k), j as f64 / res.magnitudes as f64));
        }
    }

    let scored: Vec<(usize, ScoredCandidate)> = candidates
        .par_iter()
        .enumerate()
        .map(|(idx, &(dir_idx, mag))| {
            let mut pool: Vec<(f64, usize)> = match dir_idx {
                None => ys.iter().copied().enumerate().map(|(i, y)| (y, i)).collect(),
                Some(k) => ys
                    .iter()
                    .zip(&dots[k])
                    .enumerate()
                    .map(|(i, (&y, &dot))| (y - mag * dot, i))
                    .collect(),
            };
            front_pool(&mut pool, pool_size(n, core));
            let pool_dots: Vec<Vec<f64>> = dots
                .iter()
                .map(|dot_row| pool.iter().map(|&(_, i)| dot_row[i]).collect())
                .collect();
            let report = select_and_score(&pool, &pool_dots, core, params);
            let beta = match dir_idx {
                None => vec![0.0; d],
                Some(k) => directions[k].iter().map(|v| mag * v).collect(),
            };
            (idx, ScoredCandidate { beta, report })
        })
        .collect();

    let candidates_scored = scored.len();
    let mut passing: Vec<(usize, ScoredCandidate)> = scored
        .into_iter()
        .filter(|(_, c)| c.report.pass)
        .collect();
    passing.sort_by(|(ia, a), (ib, b)| {
        let slack_a = a.report.cond1_fraction + a.report.cond2_fraction;
        let slack_b = b.report.cond1_fraction + b.report.cond2_fraction;
        slack_a
            .total_cmp(&slack_b)
            .then(
                a.report
                    .core_max_residual
                    .total_cmp(&b.report.core_max_residual),
            )
            .then(ia.cmp(ib))
    });

    let mut list: Vec<Vec<f64>> = Vec::new();
    for (_, cand) in &passing {
        let separated = list.iter().all(|kept: &Vec<f64>| {
            let d2: f64 = kept
                .iter()
                .zip(&cand.beta)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2.sqrt() >= params.gamma
        });
        if separated {
            list.push(cand.beta.clone());
        }
    }
    Ok(DecodeOutcome {
        list,
        passing: passing.into_iter().map(|(_, c)| c).collect(),
        candidates_scored,
    })
}
