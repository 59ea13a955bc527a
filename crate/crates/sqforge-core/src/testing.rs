//! Reduction from list-decodable regression to two-arm hypothesis testing.
//!
//! A single regression dataset is split into two halves ("arms"); the second
//! arm's covariates are re-expressed through a public random rotation `A`.
//! If the source was planted with regressor `beta`, arm 1 carries `beta` and
//! arm 2 carries `A beta` — two planted problems with *consistent* hidden
//! regressors. If the source was null, both arms are null. A tester runs a
//! list decoder on each arm and declares "planted" exactly when some pair of
//! outputs `(c1, c2)` matches through the rotation:
//!
//! * both norms lie in `[3 rho / 4, 5 rho / 4]`, and
//! * `|c1 - A^T c2| <= rho / 2`.
//!
//! Under the null, independent decoder outputs almost never align through a
//! Haar-random rotation, so the verdict separates the hypotheses whenever
//! the decoder has any signal. [`run_trials`] drives repeated trials with
//! alternating ground truth and reports a confusion matrix.

use crate::decoder::DecoderError;
use crate::instance::{sample_null, sample_planted, FamilyCache, InstanceError, InstanceParams};
// The empirical face of the indistinguishability claim lives with the
// auditing code; re-exported here because testing is where it gets used.
pub use crate::verify::{low_degree_probe, probe_directions};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

/// Ground truth or verdict of one testing trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    /// Labels independent of covariates.
    Null,
    /// A hidden regressor is planted (consistently across both arms).
    Planted,
}

/// Failures of the reduction or the trial driver.
#[derive(Debug, Error)]
pub enum TestingError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error("all {trials} trials failed to decode; last error: {last}")]
    AllTrialsFailed { trials: usize, last: String },
}

/// Everything an arm decoder may see about its arm.
pub struct ArmContext<'a> {
    /// 0 for the unrotated arm, 1 for the rotated arm.
    pub arm: usize,
    /// The public rotation relating arm-2 covariates to arm-1 covariates.
    pub rotation: &'a DMatrix<f64>,
    /// Planted regressor norm the tester expects.
    pub rho: f64,
    /// Arm-specific seed for any internal randomness.
    pub seed: u64,
    /// The arm's own hidden regressor, when the caller knows it (simulation
    /// only — the grid decoder never reads this, oracle decoders do).
    pub truth: Option<Vec<f64>>,
}

/// A list decoder usable as one arm of the testing reduction.
pub trait ArmDecoder: Sync {
    fn decode(
        &self,
        xs: &[f64],
        ys: &[f64],
        d: usize,
        ctx: &ArmContext,
    ) -> Result<Vec<Vec<f64>>, DecoderError>;
}

/// The grid-search decoder from [`crate::decoder`], ignoring side
/// information.
pub struct GridArmDecoder {
    pub params: crate::decoder::DecoderParams,
    pub resolution: Option<crate::decoder::GridResolution>,
}

impl ArmDecoder for GridArmDecoder {
    fn decode(
        &self,
        xs: &[f64],
        ys: &[f64],
        d: usize,
        _ctx: &ArmContext,
    ) -> Result<Vec<Vec<f64>>, DecoderError> {
        Ok(crate::decoder::list_decode(xs, ys, d, &self.params, self.resolution)?.list)
    }
}

/// An idealized decoder: returns exactly the hidden regressor when one
/// exists, and `null_list` seeded random norm-`rho` vectors otherwise
/// (modeling a decoder that always fills its list). Measures the reduction
/// itself, with the decoding step assumed perfect.
pub struct OracleArmDecoder {
    /// List length produced on null arms.
    pub null_list: usize,
}

impl ArmDecoder for OracleArmDecoder {
    fn decode(
        &self,
        _xs: &[f64],
        _ys: &[f64],
        d: usize,
        ctx: &ArmContext,
    ) -> Result<Vec<Vec<f64>>, DecoderError> {
        match &ctx.truth {
            Some(beta) => Ok(vec![beta.clone()]),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
                Ok((0..self.null_list)
                    .map(|_| scaled_random_direction(d, ctx.rho, &mut rng))
                    .collect())
            }
        }
    }
}

/// A decoder that never outputs anything; its verdict is always null.
pub struct EmptyArmDecoder;

impl ArmDecoder for EmptyArmDecoder {
    fn decode(
        &self,
        _xs: &[f64],
        _ys: &[f64],
        _d: usize,
        _ctx: &ArmContext,
    ) -> Result<Vec<Vec<f64>>, DecoderError> {
        Ok(Vec::new())
    }
}

fn scaled_random_direction(d: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| scale * x / norm).collect();
        }
    }
}

/// One round of splitmix64: a cheap, well-mixed way to derive independent
/// stream seeds from a master seed and a salt.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed
        .wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Haar-distributed random orthogonal matrix: QR of a Gaussian matrix with
/// the sign convention `diag(R) > 0`.
pub fn random_rotation(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Pair-matching constants of the verdict rule.
pub const PAIR_NORM_LOW: f64 = 0.75;
pub const PAIR_NORM_HIGH: f64 = 1.25;
pub const PAIR_MATCH: f64 = 0.5;

/// Output of one reduction run.
#[derive(Debug, Clone)]
pub struct ReductionOutcome {
    pub verdict: Hypothesis,
    /// Decoder output lists for the two arms.
    pub lists: [Vec<Vec<f64>>; 2],
    /// Smallest `|c1 - A^T c2|` over norm-admissible pairs, if any.
    pub best_pair_gap: Option<f64>,
}

/// Split a regression dataset into a two-arm testing instance, decode both
/// arms, and apply the pair-matching verdict. `truth` is the source
/// dataset's planted regressor when the caller knows it (passed through to
/// oracle decoders; arm 2 receives its rotated image).
pub fn regression_to_testing(
    xs: &[f64],
    ys: &[f64],
    d: usize,
    rho: f64,
    decoder: &dyn ArmDecoder,
    seed: u64,
    truth: Option<&[f64]>,
) -> Result<ReductionOutcome, TestingError> {
    let n = ys.len();
    if xs.len() != n * d {
        return Err(DecoderError::InvalidInput(format!(
            "covariates have {} entries, expected {}",
            xs.len(),
            n * d
        ))
        .into());
    }
    if n < 2 {
        return Err(DecoderError::DatasetTooSmall { rows: n, needed: 2 }.into());
    }
    let half = n / 2;
    let rotation = random_rotation(d, mix_seed(seed, 0xA0A0));

    let arm1_xs = &xs[..half * d];
    let arm1_ys = &ys[..half];
    let mut arm2_xs = vec![0.0; (n - half) * d];
    for (row_out, row_in) in arm2_xs
        .chunks_exact_mut(d)
        .zip(xs[half * d..].chunks_exact(d))
    {
        for (j, out) in row_out.iter_mut().enumerate() {
            *out = (0..d).map(|k| rotation[(j, k)] * row_in[k]).sum();
        }
    }
    let arm2_ys = &ys[half..];

    let arm_truth = |arm: usize| -> Option<Vec<f64>> {
        truth.map(|beta| {
            if arm == 0 {
                beta.to_vec()
            } else {
                (0..d)
                    .map(|j| (0..d).map(|k| rotation[(j, k)] * beta[k]).sum())
                    .collect()
            }
        })
    };

    let ctx1 = ArmContext {
        arm: 0,
        rotation: &rotation,
        rho,
        seed: mix_seed(seed, 1),
        truth: arm_truth(0),
    };
    let ctx2 = ArmContext {
        arm: 1,
        rotation: &rotation,
        rho,
        seed: mix_seed(seed, 2),
        truth: arm_truth(1),
    };
    let list1 = decoder.decode(arm1_xs, arm1_ys, d, &ctx1)?;
    let list2 = decoder.decode(&arm2_xs, arm2_ys, d, &ctx2)?;

    let norm_ok = |c: &[f64]| {
        let norm: f64 = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        norm >= PAIR_NORM_LOW * rho && norm <= PAIR_NORM_HIGH * rho
    };
    let mut best_gap: Option<f64> = None;
    for c1 in list1.iter().filter(|c| norm_ok(c)) {
        for c2 in list2.iter().filter(|c| norm_ok(c)) {
            // Map the arm-2 candidate back: A^T c2.
            let gap: f64 = (0..d)
                .map(|j| {
                    let back: f64 = (0..d).map(|k| rotation[(k, j)] * c2[k]).sum();
                    (c1[j] - back) * (c1[j] - back)
                })
                .sum::<f64>()
                .sqrt();
            best_gap = Some(best_gap.map_or(gap, |g: f64| g.min(gap)));
        }
    }
    let verdict = match best_gap {
        Some(gap) if gap <= PAIR_MATCH * rho => Hypothesis::Planted,
        _ => Hypothesis::Null,
    };
    Ok(ReductionOutcome {
        verdict,
        lists: [list1, list2],
        best_pair_gap: best_gap,
    })
}

/// Configuration of a repeated-trials run.
#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub params: InstanceParams,
    /// Rows per arm (each trial samples `2 * rows_per_arm` rows).
    pub rows_per_arm: usize,
    pub trials: usize,
    pub seed: u64,
}

/// One trial's record.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub index: usize,
    pub truth: Hypothesis,
    /// `None` when the decoder errored on this trial.
    pub verdict: Option<Hypothesis>,
    pub best_pair_gap: Option<f64>,
    pub list_sizes: [usize; 2],
    pub error: Option<String>,
}

/// Aggregate over all trials.
#[derive(Debug, Clone, Serialize)]
pub struct TrialReport {
    pub records: Vec<TrialRecord>,
    /// `confusion[truth][verdict]` with null = 0, planted = 1; errored
    /// trials are excluded.
    pub confusion: [[usize; 2]; 2],
    pub decided: usize,
    pub correct: usize,
    /// `correct / decided`.
    pub accuracy: f64,
}

/// Run alternating null/planted trials (even indices null, odd planted),
/// each with fresh data and a fresh public rotation, and tally verdicts.
/// Individual decode failures are recorded, not fatal — unless every trial
/// fails.
pub fn run_trials(
    config: &TrialConfig,
    decoder: &dyn ArmDecoder,
    cache: &FamilyCache,
) -> Result<TrialReport, TestingError> {
    let p = &config.params;
    if config.trials == 0 {
        return Err(InstanceError::InvalidParameters("need at least one trial".into()).into());
    }
    let mut records = Vec::with_capacity(config.trials);
    let mut confusion = [[0usize; 2]; 2];
    let mut last_error = String::new();
    for index in 0..config.trials {
        let truth = if index % 2 == 0 {
            Hypothesis::Null
        } else {
            Hypothesis::Planted
        };
        let data_seed = mix_seed(config.seed, 2 * index as u64);
        let reduction_seed = mix_seed(config.seed, 2 * index as u64 + 1);
        let n = 2 * config.rows_per_arm;
        let (dataset, beta) = match truth {
            Hypothesis::Null => (sample_null(p, n, data_seed)?, None),
            Hypothesis::Planted => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(data_seed, 0xD1));
                let v = scaled_random_direction(p.d, 1.0, &mut rng);
                let ds = sample_planted(p, &v, n, data_seed, false, cache, "trial")?;
                let beta = p.planted_regressor(&v);
                (ds, Some(beta))
            }
        };
        match regression_to_testing(
            &dataset.xs,
            &dataset.ys,
            p.d,
            p.rho,
            decoder,
            reduction_seed,
            beta.as_deref(),
        ) {
            Ok(outcome) => {
                let t = (truth == Hypothesis::Planted) as usize;
                let v = (outcome.verdict == Hypothesis::Planted) as usize;
                confusion[t][v] += 1;
                records.push(TrialRecord {
                    index,
                    truth,
                    verdict: Some(outcome.verdict),
                    best_pair_gap: outcome.best_pair_gap,
                    list_sizes: [outcome.lists[0].len(), outcome.lists[1].len()],
                    error: None,
                });
            }
            Err(TestingError::Decoder(err)) => {
                last_error = err.to_string();
                records.push(TrialRecord {
                    index,
                    truth,
                    verdict: None,
                    best_pair_gap: None,
                    list_sizes: [0, 0],
                    error: Some(last_error.clone()),
                });
            }
            Err(other) => return Err(other),
        }
    }
    let decided = confusion.iter().flatten().sum();
    if decided == 0 {
        return Err(TestingError::AllTrialsFailed {
            trials: config.trials,
            last: last_error,
        });
    }
    let correct = confusion[0][0] + confusion[1][1];
    Ok(TrialReport {
        records,
        confusion,
        decided,
        correct,
        accuracy: correct as f64 / decided as f64,
    })
}
