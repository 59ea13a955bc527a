//! `verify`: audit a family construction and, optionally, a sampled dataset.
//!
//! The family audit re-solves the mixture on a uniform label grid over
//! `|y| <= 4 / sqrt(alpha)` and checks, per label: the vanishing-moment
//! residuals (within 1e-7), the sup-ratio diagnostic (below 1/2), and the
//! truncated chi-square against its analytic pointwise bound plus truncation
//! budget. Random dual certificates `E[p] >= alpha_y p(y)` are then sampled
//! at every label, and the report aggregates the expected chi-square over
//! the label marginal. With `--in`, the dataset's empirical Hermite moments
//! along the recorded direction (and along random probes) are z-tested
//! against the construction's vanishing claims. Any violated invariant exits
//! with code 3 and names the first offending row.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use sqforge_core::instance::{FamilyCache, InstanceParams, LabeledDataset};
use sqforge_core::moment_match::{
    default_m, default_support_bound, dual_certificate_check, MomentMatchError, MIXTURE_TOLERANCE,
};
use sqforge_core::testing::mix_seed;
use sqforge_core::verify::{
    build_correlation_report, low_degree_probe, max_abs_z, sample_moment_audit, CorrelationReport,
    MOMENT_AUDIT_Z_LIMIT,
};

use crate::{read_dataset, write_run_manifest, Failure, RunManifest};

/// Sup-ratio ceiling; above this the spike-complement split loses its slack.
const SUP_RATIO_LIMIT: f64 = 0.5;
/// Dual certificates may sit this far below zero before counting as violated.
const CERT_SLACK_FLOOR: f64 = -1e-9;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Dataset to audit; its manifest supplies the construction parameters
    /// (the construction flags below are then ignored).
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Inlier fraction, in (0, 1).
    #[arg(long, required_unless_present = "input")]
    pub alpha: Option<f64>,
    /// Signal correlation; the noise level is sqrt(1 - rho^2).
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Matching half-degree (default: floor(0.3 / sqrt(alpha)), at least 1).
    #[arg(long)]
    pub m: Option<usize>,
    /// Complement support bound (default: 4 sqrt(m)).
    #[arg(long, value_name = "B")]
    pub support_bound: Option<f64>,
    /// Ambient dimension (construction mode; only recorded, not audited).
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Direction-packing exponent, in (0, 1/2).
    #[arg(long, default_value_t = 0.3)]
    pub c: f64,
    /// Chi-square truncation degree (0 = automatic per label).
    #[arg(long, default_value_t = 0)]
    pub kmax: usize,
    /// Labels on the audit grid over |y| <= 4 / sqrt(alpha).
    #[arg(long, default_value_t = 41)]
    pub y_grid: usize,
    /// Random dual certificates sampled per label.
    #[arg(long, default_value_t = 200)]
    pub cert_trials: usize,
    /// Random unit directions probed in the dataset moment audit.
    #[arg(long, default_value_t = 8)]
    pub probes: usize,
    /// Seed for certificate sampling and probe directions.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the per-label table as CSV.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write the solved family nodes as newline-delimited JSON.
    #[arg(long)]
    pub family_out: Option<PathBuf>,
}

pub fn run(args: &VerifyArgs, argv: &[String]) -> Result<(), Failure> {
    let started = Instant::now();
    if args.y_grid < 2 {
        return Err(Failure::new(1, "--y-grid needs at least two labels"));
    }
    if args.cert_trials < 1 {
        return Err(Failure::new(1, "--cert-trials needs at least one trial"));
    }

    let dataset = match &args.input {
        Some(path) => Some(read_dataset(path)?),
        None => None,
    };
    let params = match &dataset {
        Some(ds) => ds.manifest.params()?,
        None => {
            let alpha = args.alpha.expect("clap enforces --alpha without --in");
            let m = args.m.unwrap_or_else(|| default_m(alpha));
            let b = args.support_bound.unwrap_or_else(|| default_support_bound(m));
            InstanceParams::with_support_bound(alpha, args.rho, m, b, args.d, args.c)?
        }
    };

    let cache = FamilyCache::build(params.alpha, params.m, params.b)?;
    let report = build_correlation_report(&params, &cache, args.kmax, args.y_grid)?;
    print_table(&params, &report);

    // Per-label invariants, in grid order so the first failure is the
    // lowest audited label.
    for row in &report.rows {
        if row.max_residual > MIXTURE_TOLERANCE {
            return Err(Failure::new(
                3,
                format!(
                    "verification failed at y = {:.4}: mixture residual {:.3e} exceeds {MIXTURE_TOLERANCE:.1e}",
                    row.y, row.max_residual
                ),
            ));
        }
        if row.sup_ratio > SUP_RATIO_LIMIT {
            return Err(Failure::new(
                3,
                format!(
                    "verification failed at y = {:.4}: sup ratio {:.4} exceeds {SUP_RATIO_LIMIT}",
                    row.y, row.sup_ratio
                ),
            ));
        }
        let ceiling = row.pointwise_bound + row.truncation_budget;
        if row.chi2 > ceiling {
            return Err(Failure::new(
                3,
                format!(
                    "verification failed at y = {:.4}: chi-square {:.6e} exceeds its bound {:.6e}",
                    row.y, row.chi2, ceiling
                ),
            ));
        }
    }

    let mut min_slack = f64::INFINITY;
    for (i, row) in report.rows.iter().enumerate() {
        let mixture = cache.mixture_at(row.y)?;
        let cert = dual_certificate_check(&mixture, args.cert_trials, mix_seed(args.seed, i as u64))
            .map_err(|err| match err {
                MomentMatchError::CertificateViolation { .. } => Failure::new(
                    3,
                    format!("verification failed at y = {:.4}: {err}", row.y),
                ),
                other => other.into(),
            })?;
        min_slack = min_slack.min(cert.min_slack);
    }
    println!(
        "dual certificates: {} labels x {} trials, min slack {:.3e} (floor {CERT_SLACK_FLOOR:.1e})",
        report.rows.len(),
        args.cert_trials,
        min_slack
    );

    if let Some(ds) = &dataset {
        audit_dataset(ds, &params, args)?;
    }

    if let Some(path) = &args.report {
        write_csv(path, &report)?;
    }
    if let Some(path) = &args.family_out {
        let mut out = String::new();
        for record in cache.family_records() {
            let line = serde_json::to_string(&record)
                .map_err(|e| Failure::new(1, format!("family record serialization: {e}")))?;
            out.push_str(&line);
            out.push('\n');
        }
        fs::write(path, out)?;
    }

    if let Some(primary) = args.report.as_ref().or(args.family_out.as_ref()) {
        let mut manifest = RunManifest::new("verify", argv, args.seed);
        manifest.inputs = args
            .input
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        manifest.outputs = args
            .report
            .iter()
            .chain(args.family_out.iter())
            .map(|p| p.display().to_string())
            .collect();
        manifest.duration_seconds = started.elapsed().as_secs_f64();
        write_run_manifest(primary, &manifest)?;
    }

    eprintln!("verified in {:.2}s", started.elapsed().as_secs_f64());
    println!("verdict: PASS");
    Ok(())
}

fn print_table(params: &InstanceParams, report: &CorrelationReport) {
    println!(
        "family audit: alpha = {}, rho = {}, m = {}, B = {}, {} labels",
        params.alpha,
        params.rho,
        params.m,
        params.b,
        report.rows.len()
    );
    println!(
        "{:>10} {:>10} {:>6} {:>11} {:>13} {:>11} {:>13} {:>9}",
        "y", "alpha_y", "atoms", "residual", "chi2", "trunc_bud", "chi2_bound", "sup_ratio"
    );
    for row in &report.rows {
        println!(
            "{:>10.4} {:>10.4e} {:>6} {:>11.3e} {:>13.6e} {:>11.3e} {:>13.6e} {:>9.4}",
            row.y,
            row.alpha_y,
            row.atom_count,
            row.max_residual,
            row.chi2,
            row.truncation_budget,
            row.pointwise_bound,
            row.sup_ratio
        );
    }
    println!(
        "expected chi-square: {:.6e} (truncation {}, global budget {:.3e})",
        report.expected_chi2, report.expected_chi2_truncation, report.global_budget
    );
    println!(
        "max sup ratio: {:.4} (limit {SUP_RATIO_LIMIT}); max mixture residual: {:.3e} (limit {MIXTURE_TOLERANCE:.1e})",
        report.max_sup_ratio, report.max_residual
    );
}

fn audit_dataset(
    ds: &LabeledDataset,
    params: &InstanceParams,
    args: &VerifyArgs,
) -> Result<(), Failure> {
    let max_order = 2 * params.m;
    if let Some(beta) = &ds.manifest.beta {
        let norm: f64 = beta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            let v: Vec<f64> = beta.iter().map(|x| x / norm).collect();
            let rows = sample_moment_audit(ds, &v, max_order)?;
            if let Some(bad) = rows.iter().find(|r| r.flagged) {
                return Err(Failure::new(
                    3,
                    format!(
                        "verification failed: planted-direction moment (order {}, label power {}) has z = {:.2}, limit {MOMENT_AUDIT_Z_LIMIT}",
                        bad.order, bad.label_power, bad.z
                    ),
                ));
            }
            println!(
                "planted-direction audit: {} statistics up to order {max_order}, max |z| = {:.2}",
                rows.len(),
                max_abs_z(&rows)
            );
        }
    }
    if args.probes > 0 {
        let worst = low_degree_probe(ds, max_order, args.probes, mix_seed(args.seed, 0x9B5E))?;
        if worst > MOMENT_AUDIT_Z_LIMIT {
            return Err(Failure::new(
                3,
                format!(
                    "verification failed: a random probe direction reached |z| = {worst:.2} at order <= {max_order}, limit {MOMENT_AUDIT_Z_LIMIT}"
                ),
            ));
        }
        println!(
            "random-probe audit: {} directions up to order {max_order}, max |z| = {worst:.2}",
            args.probes
        );
    }
    Ok(())
}

fn write_csv(path: &PathBuf, report: &CorrelationReport) -> Result<(), Failure> {
    let file = fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(
        out,
        "y,alpha_y,atom_count,max_residual,chi2,truncation_budget,pointwise_bound,sup_ratio"
    )?;
    for row in &report.rows {
        writeln!(
            out,
            "{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            row.y,
            row.alpha_y,
            row.atom_count,
            row.max_residual,
            row.chi2,
            row.truncation_budget,
            row.pointwise_bound,
            row.sup_ratio
        )?;
    }
    out.flush()?;
    Ok(())
}
