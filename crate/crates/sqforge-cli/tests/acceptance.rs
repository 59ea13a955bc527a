//! Acceptance gate: ten numbered criteria (A1..A10) certifying the full
//! pipeline — moment-matched family construction, dual certificates, the
//! analytic lemma suite, chi-square oracle agreement, sampler statistics,
//! detectability above the matched order, direction packing, list decoding
//! under adversarial contamination, the testing reduction, and byte-exact
//! CLI reproducibility.
//!
//! Each criterion prints exactly one `A<n> PASS`/`A<n> FAIL` line on raw
//! stderr (bypassing libtest capture, so the lines always reach the log);
//! the single test fails if any criterion fails.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use sqforge_core::decoder::{list_decode, DecoderParams, GridResolution};
use sqforge_core::hermite::{gauss_quadrature_expectation, hermite_eval_all, hermite_tail_sup};
use sqforge_core::instance::{
    make_direction_set, sample_planted, ConditionalModel, FamilyCache, InstanceParams,
    LabeledDataset, RowKind,
};
use sqforge_core::moment_match::{
    default_m, default_support_bound, dual_certificate_check, sup_ratio_value,
    gauss_positivity_margin, SpikeMixture, MIXTURE_TOLERANCE,
};
use sqforge_core::testing::{
    mix_seed, run_trials, GridArmDecoder, OracleArmDecoder, TrialConfig,
};
use sqforge_core::verify::{chi2_of_conditional, low_degree_probe, sample_moment_audit};

/// Write a line to stderr directly, so it shows up even under capture.
fn report(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

// ---------------------------------------------------------------- shared state

/// One solved moment-matching regime: the label grid and its mixtures.
struct Regime {
    alpha: f64,
    m: usize,
    labels: Vec<f64>,
    mixtures: Vec<SpikeMixture>,
}

/// Families solved by A1, reused by A2 (certificates) and A3 (sup ratio).
static FAMILIES: OnceLock<Vec<Regime>> = OnceLock::new();

/// Dataset built by A5, reused by A6 (same data, higher-order statistic).
struct AuditData {
    params: InstanceParams,
    cache: FamilyCache,
    v: Vec<f64>,
    ds: LabeledDataset,
}

static AUDIT_DATA: OnceLock<AuditData> = OnceLock::new();

/// Family cache for the decoder regime (alpha 0.3, m 1), shared by A8 and A9.
static DECODER_CACHE: OnceLock<FamilyCache> = OnceLock::new();

fn decoder_cache() -> Result<&'static FamilyCache, String> {
    if DECODER_CACHE.get().is_none() {
        let cache = FamilyCache::build(0.3, 1, 4.0)
            .map_err(|e| format!("family cache (alpha 0.3) failed: {e}"))?;
        let _ = DECODER_CACHE.set(cache);
    }
    Ok(DECODER_CACHE.get().unwrap())
}

// ------------------------------------------------------------------- criteria

/// A1: across three inlier rates, solve the complement at every node of a
/// 41-point label grid; mixtures must zero their matched moments to 1e-7
/// with at most 2m+1 atoms inside the support bound, all within 60 s.
fn a1() -> Result<String, String> {
    let t0 = Instant::now();
    let mut regimes = Vec::new();
    for &alpha in &[0.25f64, 0.1, 0.01] {
        let m = default_m(alpha);
        let b = default_support_bound(m);
        let span = 4.0 / alpha.sqrt();
        let labels: Vec<f64> = (0..41).map(|i| -span + 2.0 * span * i as f64 / 40.0).collect();
        let mut mixtures = Vec::with_capacity(labels.len());
        for &y in &labels {
            let mix = SpikeMixture::solve(y, alpha, m, b, 2001)
                .map_err(|e| format!("solve failed at alpha={alpha}, y={y:.3}: {e}"))?;
            let worst = mix
                .hermite_residuals()
                .into_iter()
                .map(f64::abs)
                .fold(0.0f64, f64::max);
            if worst > MIXTURE_TOLERANCE {
                return Err(format!(
                    "residual {worst:.3e} > {MIXTURE_TOLERANCE:.0e} at alpha={alpha}, y={y:.3}"
                ));
            }
            let comp = mix.complement();
            if comp.atoms().len() > 2 * m + 1 {
                return Err(format!(
                    "{} atoms > {} at alpha={alpha}, y={y:.3}",
                    comp.atoms().len(),
                    2 * m + 1
                ));
            }
            if let Some(stray) = comp.atoms().iter().find(|t| t.abs() > b + 1e-9) {
                return Err(format!(
                    "atom {stray:.6} outside [-{b:.3}, {b:.3}] at alpha={alpha}, y={y:.3}"
                ));
            }
            mixtures.push(mix);
        }
        regimes.push(Regime {
            alpha,
            m,
            labels,
            mixtures,
        });
    }
    let elapsed = t0.elapsed();
    if elapsed > Duration::from_secs(60) {
        return Err(format!("took {elapsed:.2?}, budget 60 s"));
    }
    let detail = format!(
        "3 regimes x 41 labels solved (m = {:?}) in {elapsed:.2?}",
        regimes.iter().map(|r| r.m).collect::<Vec<_>>()
    );
    let _ = FAMILIES.set(regimes);
    Ok(detail)
}

/// A2: at every solved node, 1000 random polynomials of each certificate
/// form keep the duality slack above -1e-9.
fn a2() -> Result<String, String> {
    let regimes = FAMILIES.get().ok_or("prerequisite family solve (A1) unavailable")?;
    let mut min_slack = f64::INFINITY;
    let mut nodes = 0usize;
    for regime in regimes {
        for (i, mix) in regime.mixtures.iter().enumerate() {
            let rep = dual_certificate_check(mix, 1000, mix_seed(20, nodes as u64)).map_err(
                |e| {
                    format!(
                        "certificate failed at alpha={}, y={:.3}: {e}",
                        regime.alpha, regime.labels[i]
                    )
                },
            )?;
            min_slack = min_slack.min(rep.min_slack);
            nodes += 1;
        }
    }
    if min_slack < -1e-9 {
        return Err(format!("min slack {min_slack:.3e} < -1e-9"));
    }
    Ok(format!(
        "{nodes} nodes x 1000 trials per form, min slack {min_slack:.3e}"
    ))
}

/// A3: spike-to-envelope sup ratio stays <= 1/2 on every A1 grid label;
/// random degree-m squares keep positive Gaussian mass on [-B, B]; the
/// weighted tail sup of h_k^2 decays like k^(-1/6) with one shared constant.
fn a3() -> Result<String, String> {
    let regimes = FAMILIES.get().ok_or("prerequisite family solve (A1) unavailable")?;
    let mut worst_ratio = 0.0f64;
    for regime in regimes {
        for &y in &regime.labels {
            let r = sup_ratio_value(y, regime.alpha, regime.m);
            if r > 0.5 {
                return Err(format!(
                    "sup ratio {r:.4} > 0.5 at alpha={}, y={y:.3}",
                    regime.alpha
                ));
            }
            worst_ratio = worst_ratio.max(r);
        }
    }

    let mut min_margin = f64::INFINITY;
    for m in 1..=5usize {
        let margin = gauss_positivity_margin(m, default_support_bound(m), 1000, 33 + m as u64);
        if margin < -1e-9 {
            return Err(format!("positivity margin {margin:.3e} < -1e-9 at m={m}"));
        }
        min_margin = min_margin.min(margin);
    }

    // Empirically the scaled sup peaks at 0.7371 (k = 2) and decreases
    // thereafter; 0.75 is the frozen shared constant.
    let mut tail_max = 0.0f64;
    for k in 1..=200usize {
        let scaled = hermite_tail_sup(k, 50_000) * (k as f64).powf(1.0 / 6.0);
        if scaled > 0.75 {
            return Err(format!("tail sup x k^(1/6) = {scaled:.4} > 0.75 at k={k}"));
        }
        tail_max = tail_max.max(scaled);
    }
    Ok(format!(
        "sup ratio <= {worst_ratio:.4}, positivity margin >= {min_margin:.3e}, tail constant {tail_max:.4} <= 0.75"
    ))
}

/// A4: the coefficient-space chi-square agrees with direct density-ratio
/// quadrature to 1e-6 relative on 50 seeded random configurations, and a
/// rho = 0 model has chi-square 0 to 1e-12.
fn a4() -> Result<String, String> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(44);
    let phi = |z: f64| (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut worst_rel = 0.0f64;
    for case in 0..50usize {
        let m = 1 + case % 2;
        let alpha: f64 = match m {
            1 => 0.05 + 0.25 * rng.random::<f64>(),
            _ => 0.02 + 0.08 * rng.random::<f64>(),
        };
        let rho = 0.4 + 0.5 * rng.random::<f64>();
        let y = (2.0 * rng.random::<f64>() - 1.0) * 3.0 / alpha.sqrt();
        let b = default_support_bound(m);
        let mix = SpikeMixture::solve(y, alpha, m, b, 2001)
            .map_err(|e| format!("case {case} solve failed (alpha={alpha:.3}, y={y:.3}): {e}"))?;
        let model = ConditionalModel::new(mix, rho)
            .map_err(|e| format!("case {case} model failed: {e}"))?;
        let series = chi2_of_conditional(&model, 800);
        let direct = gauss_quadrature_expectation(
            |z| {
                let ratio = model.density(z) / phi(z);
                (ratio - 1.0) * (ratio - 1.0)
            },
            300,
        );
        let rel = (series - direct).abs() / direct.abs().max(series.abs()).max(f64::MIN_POSITIVE);
        if rel > 1e-6 {
            return Err(format!(
                "case {case} (alpha={alpha:.3}, rho={rho:.3}, y={y:.3}): series {series:.6e} vs quadrature {direct:.6e}, rel {rel:.2e}"
            ));
        }
        worst_rel = worst_rel.max(rel);
    }

    let mix = SpikeMixture::solve(0.7, 0.1, 1, 4.0, 2001).map_err(|e| e.to_string())?;
    let model = ConditionalModel::new(mix, 0.0).map_err(|e| e.to_string())?;
    let at_zero = chi2_of_conditional(&model, 64);
    if at_zero.abs() > 1e-12 {
        return Err(format!("chi-square {at_zero:.3e} at rho=0 exceeds 1e-12"));
    }
    Ok(format!(
        "50 configurations, worst relative gap {worst_rel:.2e}; rho=0 gives {at_zero:.1e}"
    ))
}

/// A5: a 200k-row planted sample at alpha 0.1 (m = 2, d = 8) has the right
/// inlier rate, all matched joint moments within 5 standard errors of zero,
/// and the correct label marginal, inside 30 s.
fn a5() -> Result<String, String> {
    let t0 = Instant::now();
    let alpha = 0.1f64;
    let m = 2usize;
    let b = default_support_bound(m);
    let params = InstanceParams::with_support_bound(alpha, 0.5, m, b, 8, 0.3)
        .map_err(|e| e.to_string())?;
    let cache = FamilyCache::build(alpha, m, b).map_err(|e| e.to_string())?;
    let dirs = make_direction_set(8, 0.3, 1, 4242, 100_000).map_err(|e| e.to_string())?;
    let v = dirs.directions()[0].clone();
    let ds = sample_planted(&params, &v, 200_000, 2, true, &cache, "audit-0")
        .map_err(|e| e.to_string())?;

    let inliers = ds
        .provenance
        .as_ref()
        .ok_or("provenance missing")?
        .iter()
        .filter(|p| matches!(p, RowKind::Inlier))
        .count();
    let rate = inliers as f64 / ds.len() as f64;
    if (rate - alpha).abs() > 0.005 {
        return Err(format!("inlier rate {rate:.5} deviates from {alpha} by > 0.005"));
    }

    let rows = sample_moment_audit(&ds, &v, 2 * m).map_err(|e| e.to_string())?;
    let mut audit_z = 0.0f64;
    for row in &rows {
        if row.flagged {
            return Err(format!(
                "joint moment (order {}, label power {}) has z = {:+.2}",
                row.order, row.label_power, row.z
            ));
        }
        audit_z = audit_z.max(row.z.abs());
    }

    // Label marginal: sqrt(alpha) * y should match N(0,1) moments 1..4.
    let sa = alpha.sqrt();
    let n = ds.len() as f64;
    let mut ymom_z = 0.0f64;
    for p in 1..=4usize {
        let target = [0.0, 1.0, 0.0, 3.0][p - 1];
        let (mut s, mut s2) = (0.0f64, 0.0f64);
        for i in 0..ds.len() {
            let zp = (sa * ds.ys[i]).powi(p as i32);
            s += zp;
            s2 += zp * zp;
        }
        let mean = s / n;
        let var = (s2 / n - mean * mean).max(0.0);
        let z = (mean - target) / (var / n).sqrt().max(1e-300);
        if z.abs() > 5.0 {
            return Err(format!("label moment {p} off target: z = {z:+.2}"));
        }
        ymom_z = ymom_z.max(z.abs());
    }

    let elapsed = t0.elapsed();
    if elapsed > Duration::from_secs(30) {
        return Err(format!("took {elapsed:.2?}, budget 30 s"));
    }
    let detail = format!(
        "rate {rate:.5}, joint-moment |z| <= {audit_z:.2}, label-moment |z| <= {ymom_z:.2} in {elapsed:.2?}"
    );
    let _ = AUDIT_DATA.set(AuditData { params, cache, v, ds });
    Ok(detail)
}

/// A6: on the same dataset the degree-(2m+2) likelihood-ratio statistic
/// along the planted direction detects at more than 5 null standard
/// deviations (it estimates the chi-square mass above the matched order),
/// while random-direction moment probes at order <= 2m stay below 5.
fn a6() -> Result<String, String> {
    let data = AUDIT_DATA.get().ok_or("prerequisite audit sample (A5) unavailable")?;
    let (params, cache, v, ds) = (&data.params, &data.cache, &data.v, &data.ds);
    let m = params.m;
    let order = 2 * m + 2;
    let d = params.d;

    // Analytic null variance: the statistic sums rho^k mu_k(y) h_k(v.x) over
    // 2m < k <= 2m+2, so under the null its variance is the chi-square mass
    // sum_k rho^(2k) E_y[mu_k(y)^2], evaluated by label-space quadrature.
    let span = 8.0 / params.alpha.sqrt();
    let steps = 3200usize;
    let mut mass = 0.0f64;
    for i in 0..=steps {
        let y = -span + 2.0 * span * i as f64 / steps as f64;
        let wq = if i == 0 || i == steps { 0.5 } else { 1.0 };
        let dens = (params.alpha / (2.0 * std::f64::consts::PI)).sqrt()
            * (-0.5 * params.alpha * y * y).exp();
        let mus = cache
            .mixture_at(y)
            .map_err(|e| format!("quadrature mixture at y={y:.3}: {e}"))?
            .hermite_moments(order);
        for k in (2 * m + 1)..=order {
            let mu = params.rho.powi(k as i32) * mus.coeff(k);
            mass += wq * dens * mu * mu * (2.0 * span / steps as f64);
        }
    }
    if mass <= 0.0 {
        return Err("chi-square mass above the matched order is not positive".into());
    }

    let n = ds.len();
    let mut total = 0.0f64;
    for i in 0..n {
        let mus = cache
            .mixture_at(ds.ys[i])
            .map_err(|e| format!("mixture at row {i}: {e}"))?
            .hermite_moments(order);
        let xv: f64 = ds.xs[i * d..(i + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum();
        let hs = hermite_eval_all(order, xv);
        for k in (2 * m + 1)..=order {
            total += params.rho.powi(k as i32) * mus.coeff(k) * hs[k];
        }
    }
    let mean = total / n as f64;
    let z = mean / (mass / n as f64).sqrt();
    if z <= 5.0 {
        return Err(format!(
            "degree-{order} statistic z = {z:+.2} (needs > 5; mass {mass:.3e})"
        ));
    }

    let probe_z = low_degree_probe(ds, 2 * m, 16, 12345).map_err(|e| e.to_string())?;
    if probe_z > 5.0 {
        return Err(format!("an order <= {} probe reached z = {probe_z:.2}", 2 * m));
    }
    Ok(format!(
        "degree-{order} statistic z = {z:+.2} > 5; 16 probes at order <= {} max |z| = {probe_z:.2}",
        2 * m
    ))
}

/// A7: 50 packed directions in dimension 1000 stay below the 3 d^(-1/5)
/// coherence bound, with the empirical maximum near 5/sqrt(d).
fn a7() -> Result<String, String> {
    let d = 1000usize;
    let set = make_direction_set(d, 0.3, 50, 7, 100_000).map_err(|e| e.to_string())?;
    let max_dot = set.max_abs_dot();
    let bound = 3.0 * (d as f64).powf(-0.2);
    if max_dot > bound {
        return Err(format!("max |dot| {max_dot:.4} exceeds bound {bound:.4}"));
    }
    let root = (d as f64).sqrt();
    let (lo, hi) = (2.5 / root, 5.5 / root);
    if !(lo..=hi).contains(&max_dot) {
        return Err(format!(
            "max |dot| {max_dot:.4} outside the expected window [{lo:.4}, {hi:.4}]"
        ));
    }
    Ok(format!("50 directions, max |dot| {max_dot:.4} <= {bound:.4}, near 5/sqrt(d) = {:.4}", 5.0 / root))
}

/// A8: over ten seeds, 2000-row planted instances (40% of rows following a
/// second regressor) decode to a short list containing the truth within the
/// decoder's separation gamma, in under 120 s.
fn a8() -> Result<String, String> {
    let t0 = Instant::now();
    let alpha = 0.3f64;
    let sigma = 0.05f64;
    let rho = (1.0 - sigma * sigma).sqrt();
    let params = InstanceParams::from_parts(alpha, rho, sigma, 1, 4.0, 2, 0.3)
        .map_err(|e| e.to_string())?;
    let cache = decoder_cache()?;
    let dec = DecoderParams::new(alpha, sigma).map_err(|e| e.to_string())?;
    let list_cap = (4.0 / alpha).ceil() as usize;
    let mut passes = 0usize;
    let mut worst_best = 0.0f64;
    for seed in 0..10u64 {
        let dirs = make_direction_set(2, 0.3, 2, 1000 + seed, 100_000).map_err(|e| e.to_string())?;
        let v1 = dirs.directions()[0].clone();
        let v2 = dirs.directions()[1].clone();
        let main = sample_planted(&params, &v1, 1200, 2 * seed + 1, false, cache, "main")
            .map_err(|e| e.to_string())?;
        let adversary = sample_planted(&params, &v2, 800, 2 * seed + 2, false, cache, "adv")
            .map_err(|e| e.to_string())?;
        let mut xs = main.xs.clone();
        xs.extend_from_slice(&adversary.xs);
        let mut ys = main.ys.clone();
        ys.extend_from_slice(&adversary.ys);
        let beta: Vec<f64> = v1.iter().map(|c| c * rho).collect();
        let out = list_decode(&xs, &ys, 2, &dec, None).map_err(|e| e.to_string())?;
        let best = out
            .list
            .iter()
            .map(|cand| {
                cand.iter()
                    .zip(&beta)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        if !out.list.is_empty() && out.list.len() <= list_cap && best <= dec.gamma {
            passes += 1;
            worst_best = worst_best.max(best);
        }
    }
    let elapsed = t0.elapsed();
    if passes < 9 {
        return Err(format!("only {passes}/10 seeds recovered within gamma = {:.2}", dec.gamma));
    }
    if elapsed > Duration::from_secs(120) {
        return Err(format!("took {elapsed:.2?}, budget 120 s"));
    }
    Ok(format!(
        "{passes}/10 seeds, worst recovered distance {worst_best:.4} (gamma {:.2}) in {elapsed:.2?}",
        dec.gamma
    ))
}

/// A9: the reduction decides perfectly with an oracle arm decoder in d = 64,
/// and at >= 90% accuracy with the real grid decoder in d = 2.
fn a9() -> Result<String, String> {
    let params = InstanceParams::new(0.1, 0.5, 1, 64, 0.3).map_err(|e| e.to_string())?;
    let cache = FamilyCache::build(params.alpha, params.m, params.b).map_err(|e| e.to_string())?;
    let config = TrialConfig {
        params,
        rows_per_arm: 200,
        trials: 100,
        seed: 7,
    };
    let oracle = run_trials(&config, &OracleArmDecoder { null_list: 5 }, &cache)
        .map_err(|e| e.to_string())?;
    if oracle.decided != 100 || (oracle.accuracy - 1.0).abs() > 1e-12 {
        return Err(format!(
            "oracle arm decided {}/100 at accuracy {:.3} (needs 1.000)",
            oracle.decided, oracle.accuracy
        ));
    }

    let sigma = 0.05f64;
    let rho = (1.0 - sigma * sigma).sqrt();
    let grid_params = InstanceParams::from_parts(0.3, rho, sigma, 1, 4.0, 2, 0.3)
        .map_err(|e| e.to_string())?;
    let grid_cache = decoder_cache()?;
    let grid_config = TrialConfig {
        params: grid_params,
        rows_per_arm: 10_000,
        trials: 20,
        seed: 2024,
    };
    let decoder = GridArmDecoder {
        params: DecoderParams::new(0.3, sigma).map_err(|e| e.to_string())?,
        resolution: Some(GridResolution {
            angular: 48,
            lattice_radius: 0,
            magnitudes: 16,
        }),
    };
    let grid = run_trials(&grid_config, &decoder, grid_cache).map_err(|e| e.to_string())?;
    if grid.accuracy < 0.9 {
        return Err(format!(
            "grid arm accuracy {:.3} < 0.9 ({} of {} decided)",
            grid.accuracy, grid.correct, grid.decided
        ));
    }
    Ok(format!(
        "oracle 100/100 correct; grid decoder accuracy {:.3} over 20 trials",
        grid.accuracy
    ))
}

// ------------------------------------------------------------- reproducibility

fn run_cli(args: &[&str]) -> Result<Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sqforge"))
        .args(args)
        .output()
        .map_err(|e| format!("failed to launch the binary: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "`sqforge {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out)
}

fn manifest_of(path: &Path) -> String {
    format!("{}.run.json", path.display())
}

/// Clobber each artifact, replay its run manifest, and demand byte equality.
fn rerun_and_compare(label: &str, artifacts: &[PathBuf], manifest: &str) -> Result<(), String> {
    let mut snapshots = Vec::new();
    for path in artifacts {
        let bytes = std::fs::read(path)
            .map_err(|e| format!("{label}: cannot read {}: {e}", path.display()))?;
        snapshots.push(bytes);
        std::fs::write(path, b"clobbered\n")
            .map_err(|e| format!("{label}: cannot clobber {}: {e}", path.display()))?;
    }
    run_cli(&["rerun", "--manifest", manifest])?;
    for (path, snapshot) in artifacts.iter().zip(&snapshots) {
        let regenerated = std::fs::read(path)
            .map_err(|e| format!("{label}: {} missing after rerun: {e}", path.display()))?;
        if &regenerated != snapshot {
            return Err(format!(
                "{label}: {} differs after rerun ({} vs {} bytes)",
                path.display(),
                regenerated.len(),
                snapshot.len()
            ));
        }
    }
    Ok(())
}

/// A10: every artifact-producing subcommand regenerates its outputs
/// byte-identically when replayed from the recorded run manifest.
fn a10() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name);
    let s = |path: &PathBuf| path.to_str().unwrap().to_owned();

    let dataset = p("audit.ds");
    run_cli(&[
        "generate", "--alpha", "0.25", "--d", "2", "--n", "400", "--seed", "5", "--planted",
        "--provenance", "--out", &s(&dataset),
    ])?;

    let report = p("report.csv");
    let family = p("family.ndjson");
    run_cli(&[
        "verify", "--in", &s(&dataset), "--y-grid", "5", "--cert-trials", "10", "--probes", "2",
        "--report", &s(&report), "--family-out", &s(&family),
    ])?;

    let list = p("list.txt");
    run_cli(&["decode", "--in", &s(&dataset), "--out", &s(&list)])?;

    let trials = p("trials.csv");
    run_cli(&[
        "test", "--alpha", "0.1", "--d", "6", "--n", "60", "--trials", "4", "--decoder",
        "oracle", "--out", &s(&trials),
    ])?;

    rerun_and_compare("generate", &[dataset.clone()], &manifest_of(&dataset))?;
    rerun_and_compare("verify", &[report.clone(), family.clone()], &manifest_of(&report))?;
    rerun_and_compare("decode", &[list.clone()], &manifest_of(&list))?;
    rerun_and_compare("test", &[trials.clone()], &manifest_of(&trials))?;
    Ok("generate, verify, decode, and test outputs all regenerate byte-identically".into())
}

// ----------------------------------------------------------------------- gate

#[test]
fn acceptance_gate() {
    let criteria: [(&str, fn() -> Result<String, String>); 10] = [
        ("A1", a1),
        ("A2", a2),
        ("A3", a3),
        ("A4", a4),
        ("A5", a5),
        ("A6", a6),
        ("A7", a7),
        ("A8", a8),
        ("A9", a9),
        ("A10", a10),
    ];
    let t0 = Instant::now();
    let mut failures = Vec::new();
    for (id, criterion) in criteria {
        let t = Instant::now();
        match criterion() {
            Ok(detail) => report(&format!("{id} PASS [{:.2?}] {detail}", t.elapsed())),
            Err(why) => {
                report(&format!("{id} FAIL [{:.2?}] {why}", t.elapsed()));
                failures.push(format!("{id}: {why}"));
            }
        }
    }
    report(&format!(
        "acceptance: {}/10 criteria passed in {:.2?}",
        10 - failures.len(),
        t0.elapsed()
    ));
    assert!(failures.is_empty(), "failed criteria:\n{}", failures.join("\n"));
}
