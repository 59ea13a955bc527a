//! Instance parameters, the per-label mixture family, samplers, and dataset
//! file I/O.
//!
//! A planted instance in dimension `d` is built from a unit direction `v` and
//! the scalar family of [`crate::moment_match::SpikeMixture`]s: each row draws
//! a label `y ~ N(0, 1/alpha)`, then the covariate component along `v` from
//! the Ornstein-Uhlenbeck smoothing of the label's mixture (spike `rho y`
//! with probability `alpha_y`, else `rho T + sigma Z` with `T` from the
//! complement `F_y`), and exact standard normals in the `d - 1` orthogonal
//! directions. The planted regressor is `beta = rho v`. Null instances draw
//! the same label marginal with fully independent `N(0, I_d)` covariates.
//!
//! Sampling is reproducible and order-independent: row `i` consumes only the
//! `i`-th stream of a counter-based generator seeded by the dataset seed, so
//! datasets are bit-identical across thread counts.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moment_match::{
    inlier_weight, ComplementGrid, DiscreteDistribution, MomentMatchError, SpikeMixture,
    DEFAULT_GRID_POINTS, LP_TOLERANCE,
};
use crate::simplex::BasisVar;

/// Errors raised while building, sampling, or (de)serializing instances.
#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("direction packing exhausted after {tries} tries ({accepted} of {requested} directions at dot bound {dot_bound:.4})")]
    PackingExhausted {
        accepted: usize,
        requested: usize,
        tries: usize,
        dot_bound: f64,
    },
    #[error(transparent)]
    MomentMatch(#[from] MomentMatchError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parameters of one instance family. The noise level is tied to the
/// smoothing: `sigma^2 + rho^2 = 1` (within 1e-12), so the planted covariate
/// components have exactly unit second moment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceParams {
    /// Inlier fraction, in (0, 1).
    pub alpha: f64,
    /// Signal correlation of the smoothing channel, in [0, 1).
    pub rho: f64,
    /// Regression noise level, `sqrt(1 - rho^2)`.
    pub sigma: f64,
    /// Matching half-degree: Hermite moments `1..=2m` of the label mixture vanish.
    pub m: usize,
    /// Complement support bound.
    #[serde(rename = "B")]
    pub b: f64,
    /// Ambient dimension.
    pub d: usize,
    /// Direction-packing exponent: pairwise dots stay below `3 d^(c - 1/2)`.
    pub c: f64,
}

impl InstanceParams {
    /// Build with the derived noise level and the default support bound
    /// `4 sqrt(m)`.
    pub fn new(alpha: f64, rho: f64, m: usize, d: usize, c: f64) -> Result<Self, InstanceError> {
        let sigma = (1.0 - rho * rho).sqrt();
        Self::from_parts(alpha, rho, sigma, m, crate::moment_match::default_support_bound(m), d, c)
    }

    /// Build with an explicit support bound.
    pub fn with_support_bound(
        alpha: f64,
        rho: f64,
        m: usize,
        b: f64,
        d: usize,
        c: f64,
    ) -> Result<Self, InstanceError> {
        let sigma = (1.0 - rho * rho).sqrt();
        Self::from_parts(alpha, rho, sigma, m, b, d, c)
    }

    /// Validate a fully explicit parameter set.
    pub fn from_parts(
        alpha: f64,
        rho: f64,
        sigma: f64,
        m: usize,
        b: f64,
        d: usize,
        c: f64,
    ) -> Result<Self, InstanceError> {
        let p = Self {
            alpha,
            rho,
            sigma,
            m,
            b,
            d,
            c,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), InstanceError> {
        let bad = |msg: String| Err(InstanceError::InvalidParameters(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return bad(format!("rho = {} must lie in [0, 1)", self.rho));
        }
        if !(self.sigma > 0.0) {
            return bad(format!("sigma = {} must be positive", self.sigma));
        }
        let defect = (self.sigma * self.sigma + self.rho * self.rho - 1.0).abs();
        if defect > 1e-12 {
            return bad(format!(
                "sigma^2 + rho^2 deviates from 1 by {defect:.3e}"
            ));
        }
        if self.m < 1 {
            return bad("m must be at least 1".into());
        }
        if !(self.b > 0.0) {
            return bad(format!("support bound {} must be positive", self.b));
        }
        if self.d < 1 {
            return bad("dimension must be at least 1".into());
        }
        if !(self.c > 0.0 && self.c < 0.5) {
            return bad(format!("c = {} must lie in (0, 1/2)", self.c));
        }
        Ok(())
    }

    /// The planted regressor for a unit direction: `beta = rho v`.
    pub fn planted_regressor(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| self.rho * x).collect()
    }

    /// Pairwise dot bound for direction packing: `min(3 d^(c - 1/2), 0.99)`.
    /// The cap keeps the bound meaningful in small dimensions, where the raw
    /// formula exceeds 1 and would accept arbitrary collisions.
    pub fn packing_dot_bound(&self) -> f64 {
        (3.0 * (self.d as f64).powf(self.c - 0.5)).min(0.99)
    }
}

/// A set of nearly orthogonal unit directions.
#[derive(Debug, Clone)]
pub struct DirectionSet {
    directions: Vec<Vec<f64>>,
    dot_bound: f64,
}

impl DirectionSet {
    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// The pairwise |dot| bound every accepted pair satisfies.
    pub fn dot_bound(&self) -> f64 {
        self.dot_bound
    }

    /// Largest pairwise |dot| actually present.
    pub fn max_abs_dot(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, u) in self.directions.iter().enumerate() {
            for v in &self.directions[i + 1..] {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                worst = worst.max(dot.abs());
            }
        }
        worst
    }
}

/// Greedily pack `count` random unit directions in dimension `d` whose
/// pairwise |dot| stays below `min(3 d^(c - 1/2), 0.99)`. Rejected draws count
/// against `max_tries`; exhaustion reports how far packing got.
pub fn make_direction_set(
    d: usize,
    c: f64,
    count: usize,
    seed: u64,
    max_tries: usize,
) -> Result<DirectionSet, InstanceError> {
    if d < 1 {
        return Err(InstanceError::InvalidParameters(
            "dimension must be at least 1".into(),
        ));
    }
    if !(c > 0.0 && c < 0.5) {
        return Err(InstanceError::InvalidParameters(format!(
            "c = {c} must lie in (0, 1/2)"
        )));
    }
    let dot_bound = (3.0 * (d as f64).powf(c - 0.5)).min(0.99);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut tries = 0usize;
    while directions.len() < count {
        if tries >= max_tries {
            return Err(InstanceError::PackingExhausted {
                accepted: directions.len(),
                requested: count,
                tries,
                dot_bound,
            });
        }
        tries += 1;
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        for x in &mut v {
            *x /= norm;
        }
        let clashes = directions.iter().any(|u| {
            let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            dot.abs() > dot_bound
        });
        if !clashes {
            directions.push(v);
        }
    }
    Ok(DirectionSet {
        directions,
        dot_bound,
    })
}

/// The smoothed conditional law of the planted covariate component given a
/// label: the Ornstein-Uhlenbeck pushforward of the label's spike mixture.
#[derive(Debug, Clone)]
pub struct ConditionalModel {
    mixture: SpikeMixture,
    rho: f64,
}

impl ConditionalModel {
    /// Wrap a validated mixture with a smoothing level.
    pub fn new(mixture: SpikeMixture, rho: f64) -> Result<Self, InstanceError> {
        if !(0.0..1.0).contains(&rho) {
            return Err(InstanceError::InvalidParameters(format!(
                "rho = {rho} must lie in [0, 1)"
            )));
        }
        Ok(Self { mixture, rho })
    }

    /// Assemble from raw parts, re-validating the vanishing-moment invariant.
    pub fn from_parts(
        y: f64,
        alpha_y: f64,
        complement: DiscreteDistribution,
        m: usize,
        rho: f64,
    ) -> Result<Self, InstanceError> {
        let mixture = SpikeMixture::new(y, alpha_y, complement, m)?;
        Self::new(mixture, rho)
    }

    pub fn mixture(&self) -> &SpikeMixture {
        &self.mixture
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn label(&self) -> f64 {
        self.mixture.label()
    }

    /// Hermite coefficients of the smoothed law: entry `i` is `rho^i` times
    /// the mixture's `i`-th coefficient, so entries `1..=2m` vanish with the
    /// mixture's.
    pub fn smoothed_coefficients(&self, kmax: usize) -> crate::hermite::HermiteSeries {
        crate::hermite::ou_pushforward(&self.mixture.hermite_moments(kmax), self.rho)
    }

    /// Density of the smoothed conditional at `x`.
    pub fn density(&self, x: f64) -> f64 {
        conditional_density(self, x)
    }
}

/// Density of the smoothed conditional law at `x`: a Gaussian bump of
/// variance `1 - rho^2` at `rho y` with mass `alpha_y`, plus one at each
/// `rho t_j` with mass `(1 - alpha_y) w_j`.
pub fn conditional_density(model: &ConditionalModel, x: f64) -> f64 {
    let rho = model.rho();
    let var = 1.0 - rho * rho;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
    let bump = |center: f64| {
        let z = x - rho * center;
        norm * (-z * z / (2.0 * var)).exp()
    };
    let mix = model.mixture();
    let mut density = mix.spike_mass() * bump(mix.label());
    let comp = mix.complement();
    for (&t, &w) in comp.atoms().iter().zip(comp.weights()) {
        density += (1.0 - mix.spike_mass()) * w * bump(t);
    }
    density
}

/// Build the conditional model for one label, off a family cache.
pub fn build_conditional(
    params: &InstanceParams,
    cache: &FamilyCache,
    y: f64,
) -> Result<ConditionalModel, InstanceError> {
    cache.check_params(params)?;
    let mixture = cache.mixture_at(y)?;
    ConditionalModel::new(mixture, params.rho)
}

/// Reuse radius around a cached label node. A cached complement is served
/// as-is only when it still meets the LP violation tolerance at the queried
/// label; beyond that the query re-solves exactly (warm-started from the
/// node's basis), so the radius bounds lookup work, never accuracy.
pub const CACHE_REUSE_RADIUS: f64 = 1e-3;

struct CachedNode {
    y: f64,
    dist: DiscreteDistribution,
    basis: Vec<BasisVar>,
    violation: f64,
}

/// Precomputed complement family for one `(alpha, m, B)` triple: solved
/// mixtures on a uniform label grid of stride `0.05 / sqrt(alpha)` covering
/// `|y| <= 8 / sqrt(alpha)`, each storing its LP basis so off-grid labels can
/// be re-solved exactly at the cost of one small linear solve.
///
/// Queries take `&self`, so a built cache can be shared across sampler
/// threads.
pub struct FamilyCache {
    alpha: f64,
    m: usize,
    grid: ComplementGrid,
    y_min: f64,
    stride: f64,
    nodes: Vec<CachedNode>,
}

impl FamilyCache {
    /// Solve the LP at every grid node. Any genuinely infeasible node aborts
    /// the build with the offending residual.
    pub fn build(alpha: f64, m: usize, b: f64) -> Result<Self, InstanceError> {
        Self::build_with_grid(alpha, m, b, DEFAULT_GRID_POINTS)
    }

    /// [`FamilyCache::build`] with an explicit LP grid resolution.
    pub fn build_with_grid(
        alpha: f64,
        m: usize,
        b: f64,
        grid_points: usize,
    ) -> Result<Self, InstanceError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(InstanceError::InvalidParameters(format!(
                "alpha = {alpha} must lie in (0, 1)"
            )));
        }
        let grid = ComplementGrid::new(m, b, grid_points);
        let scale = alpha.sqrt();
        let stride = 0.05 / scale;
        let half_span = 8.0 / scale;
        let count = (2.0 * half_span / stride).round() as usize + 1;
        let y_min = -half_span;

        let nodes: Vec<CachedNode> = (0..count)
            .into_par_iter()
            .map(|i| {
                let y = y_min + stride * i as f64;
                let alpha_y = inlier_weight(y, alpha);
                let (support, violation, basis) = grid.solve(y, alpha_y);
                if violation > LP_TOLERANCE {
                    return Err(MomentMatchError::Infeasible {
                        residual: violation,
                    });
                }
                let dist = support_to_dist(support, b)?;
                Ok(CachedNode {
                    y,
                    dist,
                    basis,
                    violation,
                })
            })
            .collect::<Result<_, MomentMatchError>>()?;

        Ok(Self {
            alpha,
            m,
            grid,
            y_min,
            stride,
            nodes,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn matching_half_degree(&self) -> usize {
        self.m
    }

    pub fn support_bound(&self) -> f64 {
        self.grid.b
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Label grid nodes, ascending.
    pub fn node_labels(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.y).collect()
    }

    /// Worst LP violation across the solved grid nodes.
    pub fn max_node_violation(&self) -> f64 {
        self.nodes.iter().map(|n| n.violation).fold(0.0, f64::max)
    }

    fn check_params(&self, params: &InstanceParams) -> Result<(), InstanceError> {
        if params.alpha != self.alpha || params.m != self.m || params.b != self.grid.b {
            return Err(InstanceError::InvalidParameters(format!(
                "cache built for (alpha, m, B) = ({}, {}, {}), asked for ({}, {}, {})",
                self.alpha, self.m, self.grid.b, params.alpha, params.m, params.b
            )));
        }
        Ok(())
    }

    /// The complement distribution for an exact label value.
    ///
    /// Lookup policy: find the nearest grid node; serve its solution verbatim
    /// only if that solution already meets the LP tolerance at `y` itself
    /// (within [`CACHE_REUSE_RADIUS`] of the node); otherwise re-solve at `y`,
    /// warm-starting from the node's basis and falling back to a full solve —
    /// with grid and support escalation — when the basis no longer applies.
    /// Labels beyond the grid edge solve directly.
    pub fn complement_at(&self, y: f64) -> Result<DiscreteDistribution, MomentMatchError> {
        let alpha_y = inlier_weight(y, self.alpha);
        let b = self.grid.b;
        if let Some(node) = self.nearest_node(y) {
            if (y - node.y).abs() <= CACHE_REUSE_RADIUS {
                let support: Vec<(f64, f64)> = node
                    .dist
                    .atoms()
                    .iter()
                    .zip(node.dist.weights())
                    .map(|(&t, &w)| (t, w))
                    .collect();
                if self.grid.unscaled_violation(y, alpha_y, &support) <= LP_TOLERANCE {
                    return Ok(node.dist.clone());
                }
            }
            if let Some((support, _violation)) = self.grid.warm_solve(y, alpha_y, &node.basis) {
                return support_to_dist(support, b);
            }
        }
        let (support, violation, _) = self.grid.solve(y, alpha_y);
        if violation <= LP_TOLERANCE {
            return support_to_dist(support, b);
        }
        // A cold solve on the cache's own grid can stall a hair above the
        // tolerance at extreme labels; retry with the full escalation ladder.
        crate::moment_match::solve_complement_weighted(y, alpha_y, self.m, b, self.grid.grid.len())
    }

    /// The full spike mixture for an exact label value.
    pub fn mixture_at(&self, y: f64) -> Result<SpikeMixture, MomentMatchError> {
        let alpha_y = inlier_weight(y, self.alpha);
        SpikeMixture::new(y, alpha_y, self.complement_at(y)?, self.m)
    }

    fn nearest_node(&self, y: f64) -> Option<&CachedNode> {
        if self.nodes.is_empty() {
            return None;
        }
        let idx = ((y - self.y_min) / self.stride).round();
        if idx < 0.0 || idx >= self.nodes.len() as f64 {
            return None;
        }
        Some(&self.nodes[idx as usize])
    }

    /// Serializable per-node records: label, spike mass, complement support,
    /// and the mixture's vanishing-moment residuals.
    pub fn family_records(&self) -> Vec<FamilyRecord> {
        self.nodes
            .iter()
            .map(|node| {
                let alpha_y = inlier_weight(node.y, self.alpha);
                let residuals = SpikeMixture::new(node.y, alpha_y, node.dist.clone(), self.m)
                    .map(|mix| mix.hermite_residuals())
                    .unwrap_or_default();
                FamilyRecord {
                    y: node.y,
                    alpha_y,
                    atoms: node.dist.atoms().to_vec(),
                    weights: node.dist.weights().to_vec(),
                    residuals,
                }
            })
            .collect()
    }
}

fn support_to_dist(
    support: Vec<(f64, f64)>,
    b: f64,
) -> Result<DiscreteDistribution, MomentMatchError> {
    let atoms: Vec<f64> = support.iter().map(|s| s.0).collect();
    let mut weights: Vec<f64> = support.iter().map(|s| s.1).collect();
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 && (total - 1.0).abs() <= 1e-10 {
        for w in &mut weights {
            *w /= total;
        }
    }
    DiscreteDistribution::new(atoms, weights, b)
}

/// One solved family node in serialized form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyRecord {
    pub y: f64,
    pub alpha_y: f64,
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Dataset header, serialized as single-line JSON on the `#manifest` line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub alpha: f64,
    pub rho: f64,
    pub sigma: f64,
    pub m: usize,
    #[serde(rename = "B")]
    pub b: f64,
    pub d: usize,
    pub c: f64,
    pub seed: u64,
    pub planted: bool,
    pub direction_id: String,
    /// Planted regressor, when the generator chose to record it.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta: Option<Vec<f64>>,
}

impl DatasetManifest {
    pub fn params(&self) -> Result<InstanceParams, InstanceError> {
        InstanceParams::from_parts(
            self.alpha, self.rho, self.sigma, self.m, self.b, self.d, self.c,
        )
    }
}

/// Per-row origin marker carried by datasets generated with provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Inlier,
    Outlier,
}

/// An in-memory labeled dataset: `n` rows of `d` covariates plus a label.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub manifest: DatasetManifest,
    /// Row-major `n x d` covariates.
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Per-row origin, when generated with provenance (planted data only).
    pub provenance: Option<Vec<RowKind>>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.manifest.d
    }

    /// Covariates and label of row `i`.
    pub fn row(&self, i: usize) -> (&[f64], f64) {
        let d = self.manifest.d;
        (&self.xs[i * d..(i + 1) * d], self.ys[i])
    }

    /// Write in the line-oriented text format:
    /// a `#manifest` JSON header, `n` rows of `d + 1` floats at 17
    /// significant digits, and an optional `#provenance` marker line.
    /// The rendering round-trips every `f64` bit-exactly.
    pub fn write_to(&self, path: &Path) -> Result<(), InstanceError> {
        let file = fs::File::create(path)?;
        let mut out = BufWriter::new(file);
        writeln!(
            out,
            "#manifest {}",
            serde_json::to_string(&self.manifest).expect("manifest serializes")
        )?;
        let d = self.manifest.d;
        let mut line = String::new();
        for (i, &y) in self.ys.iter().enumerate() {
            line.clear();
            for &x in &self.xs[i * d..(i + 1) * d] {
                write!(line, "{x:.16e} ").expect("string write");
            }
            write!(line, "{y:.16e}").expect("string write");
            writeln!(out, "{line}")?;
        }
        if let Some(kinds) = &self.provenance {
            let marks: String = kinds
                .iter()
                .map(|k| match k {
                    RowKind::Inlier => 'i',
                    RowKind::Outlier => 'o',
                })
                .collect();
            writeln!(out, "#provenance {marks}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parse the text format written by [`Self::write_to`]. Errors carry the
    /// 1-based offending line number.
    pub fn read_from(path: &Path) -> Result<Self, InstanceError> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or(InstanceError::Parse {
            line: 1,
            message: "empty file".into(),
        })?;
        let manifest_json = first.strip_prefix("#manifest ").ok_or(InstanceError::Parse {
            line: 1,
            message: "expected '#manifest {json}' header".into(),
        })?;
        let manifest: DatasetManifest =
            serde_json::from_str(manifest_json).map_err(|e| InstanceError::Parse {
                line: 1,
                message: format!("bad manifest JSON: {e}"),
            })?;
        manifest.params()?;
        let d = manifest.d;

        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut provenance: Option<Vec<RowKind>> = None;
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(marks) = line.strip_prefix("#provenance ") {
                let kinds: Result<Vec<RowKind>, InstanceError> = marks
                    .chars()
                    .map(|ch| match ch {
                        'i' => Ok(RowKind::Inlier),
                        'o' => Ok(RowKind::Outlier),
                        other => Err(InstanceError::Parse {
                            line: line_no,
                            message: format!("unknown provenance mark '{other}'"),
                        }),
                    })
                    .collect();
                let kinds = kinds?;
                if kinds.len() != ys.len() {
                    return Err(InstanceError::Parse {
                        line: line_no,
                        message: format!(
                            "provenance length {} does not match {} rows",
                            kinds.len(),
                            ys.len()
                        ),
                    });
                }
                provenance = Some(kinds);
                continue;
            }
            let mut values = Vec::with_capacity(d + 1);
            for tok in line.split_ascii_whitespace() {
                let v: f64 = tok.parse().map_err(|_| InstanceError::Parse {
                    line: line_no,
                    message: format!("'{tok}' is not a float"),
                })?;
                values.push(v);
            }
            if values.len() != d + 1 {
                return Err(InstanceError::Parse {
                    line: line_no,
                    message: format!("expected {} floats, found {}", d + 1, values.len()),
                });
            }
            ys.push(values.pop().expect("nonempty"));
            xs.extend_from_slice(&values);
        }
        Ok(Self {
            manifest,
            xs,
            ys,
            provenance,
        })
    }
}

/// An orthogonal reflection mapping `e_1` to a given unit vector, applied in
/// `O(d)` per row: `H = I - 2 u u^T / |u|^2` with `u = e_1 - v`.
struct HouseholderFrame {
    u: Vec<f64>,
    inv_half_norm2: f64,
    trivial: bool,
}

impl HouseholderFrame {
    fn new(v: &[f64]) -> Self {
        let mut u = v.to_vec();
        for x in &mut u {
            *x = -*x;
        }
        u[0] += 1.0;
        let norm2: f64 = u.iter().map(|x| x * x).sum();
        if norm2 < 1e-24 {
            return Self {
                u,
                inv_half_norm2: 0.0,
                trivial: true,
            };
        }
        Self {
            inv_half_norm2: 2.0 / norm2,
            u,
            trivial: false,
        }
    }

    /// Map frame coordinates `(first, perp_2, ..., perp_d)` to ambient ones.
    fn apply(&self, first: f64, perps: &[f64], out: &mut [f64]) {
        out[0] = first;
        out[1..].copy_from_slice(perps);
        if self.trivial {
            return;
        }
        let proj: f64 = self.u.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
        let scale = proj * self.inv_half_norm2;
        for (o, &ui) in out.iter_mut().zip(&self.u) {
            *o -= scale * ui;
        }
    }
}

fn check_unit_direction(v: &[f64], d: usize) -> Result<(), InstanceError> {
    if v.len() != d {
        return Err(InstanceError::InvalidParameters(format!(
            "direction has length {}, dimension is {d}",
            v.len()
        )));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(InstanceError::InvalidParameters(format!(
            "direction norm {norm} is not 1"
        )));
    }
    Ok(())
}

/// Draw a planted dataset of `n` rows along the unit direction `v`.
///
/// Per-row randomness comes from stream `i` of a ChaCha generator seeded with
/// `seed`; within a row the draw order is fixed: the label normal, the
/// inlier/outlier uniform, for outliers the atom-selection uniform, the
/// along-`v` noise normal, then `d - 1` orthogonal normals. Rows are
/// therefore independent of the evaluation order and of thread count.
pub fn sample_planted(
    params: &InstanceParams,
    v: &[f64],
    n: usize,
    seed: u64,
    keep_provenance: bool,
    cache: &FamilyCache,
    direction_id: &str,
) -> Result<LabeledDataset, InstanceError> {
    check_unit_direction(v, params.d)?;
    cache.check_params(params)?;
    if n == 0 {
        return Err(InstanceError::InvalidParameters(
            "need at least one row".into(),
        ));
    }
    let d = params.d;
    let frame = HouseholderFrame::new(v);
    let inv_sqrt_alpha = 1.0 / params.alpha.sqrt();

    let mut xs = vec![0.0; n * d];
    let mut ys = vec![0.0; n];
    let mut kinds = vec![RowKind::Inlier; n];

    xs.par_chunks_mut(d)
        .zip(ys.par_iter_mut())
        .zip(kinds.par_iter_mut())
        .enumerate()
        .try_for_each(|(i, ((xrow, y_out), kind))| -> Result<(), InstanceError> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let y = rng.sample::<f64, _>(StandardNormal) * inv_sqrt_alpha;
            let alpha_y = inlier_weight(y, params.alpha);
            let coin: f64 = rng.random();
            let (center, k) = if coin < alpha_y {
                (y, RowKind::Inlier)
            } else {
                let dist = cache.complement_at(y)?;
                let pick: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = *dist.atoms().last().expect("nonempty support");
                for (&t, &w) in dist.atoms().iter().zip(dist.weights()) {
                    acc += w;
                    if pick < acc {
                        chosen = t;
                        break;
                    }
                }
                (chosen, RowKind::Outlier)
            };
            let noise: f64 = rng.sample(StandardNormal);
            let along = params.rho * center + params.sigma * noise;
            let mut perps = vec![0.0; d - 1];
            for p in &mut perps {
                *p = rng.sample(StandardNormal);
            }
            frame.apply(along, &perps, xrow);
            *y_out = y;
            *kind = k;
            Ok(())
        })?;

    let manifest = DatasetManifest {
        alpha: params.alpha,
        rho: params.rho,
        sigma: params.sigma,
        m: params.m,
        b: params.b,
        d,
        c: params.c,
        seed,
        planted: true,
        direction_id: direction_id.to_string(),
        beta: Some(params.planted_regressor(v)),
    };
    Ok(LabeledDataset {
        manifest,
        xs,
        ys,
        provenance: keep_provenance.then_some(kinds),
    })
}

/// Draw a null dataset: labels from the same `N(0, 1/alpha)` marginal,
/// covariates exactly `N(0, I_d)`, independent of the labels. Streams and
/// draw order mirror [`sample_planted`] (label first, then covariates).
pub fn sample_null(
    params: &InstanceParams,
    n: usize,
    seed: u64,
) -> Result<LabeledDataset, InstanceError> {
    if n == 0 {
        return Err(InstanceError::InvalidParameters(
            "need at least one row".into(),
        ));
    }
    let d = params.d;
    let inv_sqrt_alpha = 1.0 / params.alpha.sqrt();
    let mut xs = vec![0.0; n * d];
    let mut ys = vec![0.0; n];
    xs.par_chunks_mut(d)
        .zip(ys.par_iter_mut())
        .enumerate()
        .for_each(|(i, (xrow, y_out))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            *y_out = rng.sample::<f64, _>(StandardNormal) * inv_sqrt_alpha;
            for x in xrow.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
        });
    let manifest = DatasetManifest {
        alpha: params.alpha,
        rho: params.rho,
        sigma: params.sigma,
        m: params.m,
        b: params.b,
        d,
        c: params.c,
        seed,
        planted: false,
        direction_id: "none".to_string(),
        beta: None,
    };
    Ok(LabeledDataset {
        manifest,
        xs,
        ys,
        provenance: None,
    })
}
