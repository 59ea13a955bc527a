//! `test`: repeated null-vs-planted testing trials through a decoder.
//!
//! Each trial samples a fresh dataset (even indices null, odd planted),
//! splits it into two arms, rotates the second arm's covariates by a public
//! random rotation, decodes both arms, and declares "planted" exactly when
//! some cross-arm pair of list entries matches through the rotation. The
//! oracle decoder replaces the grid search with the planted truth (hiding it
//! on null data behind random lists), which isolates the reduction logic
//! from decoder resolution limits.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use sqforge_core::decoder::{DecoderParams, GridResolution};
use sqforge_core::instance::{FamilyCache, InstanceParams};
use sqforge_core::moment_match::{default_m, default_support_bound};
use sqforge_core::testing::{
    run_trials, ArmDecoder, GridArmDecoder, Hypothesis, OracleArmDecoder, TrialConfig, TrialReport,
};

use crate::{write_run_manifest, Failure, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecoderKind {
    /// The grid list-decoder, run per arm on the rotated coordinates.
    Grid,
    /// An oracle returning the arm's planted truth (random lists on null).
    Oracle,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Inlier fraction, in (0, 1).
    #[arg(long)]
    pub alpha: f64,
    /// Signal correlation; the noise level is sqrt(1 - rho^2).
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Matching half-degree (default: floor(0.3 / sqrt(alpha)), at least 1).
    #[arg(long)]
    pub m: Option<usize>,
    /// Complement support bound (default: 4 sqrt(m)).
    #[arg(long, value_name = "B")]
    pub support_bound: Option<f64>,
    /// Ambient dimension.
    #[arg(long)]
    pub d: usize,
    /// Direction-packing exponent, in (0, 1/2).
    #[arg(long, default_value_t = 0.3)]
    pub c: f64,
    /// Rows per arm; each trial samples 2n rows and splits them.
    #[arg(long)]
    pub n: usize,
    /// Number of trials (alternating null / planted truths).
    #[arg(long)]
    pub trials: usize,
    /// Decoder run on each arm.
    #[arg(long, value_enum, default_value_t = DecoderKind::Grid)]
    pub decoder: DecoderKind,
    /// List length the oracle fabricates when an arm has no planted truth.
    #[arg(long, default_value_t = 5)]
    pub null_list: usize,
    /// Residual cutoff multiplier override (grid decoder).
    #[arg(long)]
    pub t: Option<f64>,
    /// List separation override (grid decoder).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Candidate directions on the circle (grid decoder, d <= 2).
    #[arg(long)]
    pub angular: Option<usize>,
    /// Integer-lattice radius for the direction net (grid decoder, d in {3, 4}).
    #[arg(long)]
    pub lattice_radius: Option<usize>,
    /// Magnitude steps per direction (grid decoder).
    #[arg(long)]
    pub magnitudes: Option<usize>,
    /// Seed for data, rotations, and oracle lists.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the per-trial log as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &TestArgs, argv: &[String]) -> Result<(), Failure> {
    let started = Instant::now();
    let m = args.m.unwrap_or_else(|| default_m(args.alpha));
    let b = args.support_bound.unwrap_or_else(|| default_support_bound(m));
    let params = InstanceParams::with_support_bound(args.alpha, args.rho, m, b, args.d, args.c)?;
    let cache = FamilyCache::build(args.alpha, m, b)?;
    let config = TrialConfig {
        params: params.clone(),
        rows_per_arm: args.n,
        trials: args.trials,
        seed: args.seed,
    };

    let report = match args.decoder {
        DecoderKind::Grid => {
            let decoder_params =
                DecoderParams::with_overrides(args.alpha, params.sigma, args.t, args.gamma)?;
            let resolution = match (args.angular, args.lattice_radius, args.magnitudes) {
                (None, None, None) => None,
                (angular, lattice, magnitudes) => Some(GridResolution {
                    angular: angular.unwrap_or(0),
                    lattice_radius: lattice.unwrap_or(0),
                    magnitudes: magnitudes.unwrap_or(16),
                }),
            };
            let decoder = GridArmDecoder {
                params: decoder_params,
                resolution,
            };
            run_trials(&config, &decoder as &dyn ArmDecoder, &cache)?
        }
        DecoderKind::Oracle => {
            let decoder = OracleArmDecoder {
                null_list: args.null_list,
            };
            run_trials(&config, &decoder as &dyn ArmDecoder, &cache)?
        }
    };

    println!(
        "trials {} decided {} correct {} accuracy {:.3}",
        args.trials, report.decided, report.correct, report.accuracy
    );
    println!(
        "confusion: null->null {} null->planted {} planted->null {} planted->planted {}",
        report.confusion[0][0], report.confusion[0][1], report.confusion[1][0], report.confusion[1][1]
    );
    let errored = report.records.iter().filter(|r| r.error.is_some()).count();
    if errored > 0 {
        println!("decoder errors on {errored} of {} trials", args.trials);
    }

    if let Some(out) = &args.out {
        write_csv(out, &report)?;
        let mut manifest = RunManifest::new("test", argv, args.seed);
        manifest.outputs = vec![out.display().to_string()];
        manifest.duration_seconds = started.elapsed().as_secs_f64();
        write_run_manifest(out, &manifest)?;
    }

    eprintln!("ran {} trials in {:.2}s", args.trials, started.elapsed().as_secs_f64());
    Ok(())
}

fn hypothesis_name(h: Hypothesis) -> &'static str {
    match h {
        Hypothesis::Null => "null",
        Hypothesis::Planted => "planted",
    }
}

fn write_csv(path: &PathBuf, report: &TrialReport) -> Result<(), Failure> {
    let file = fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "trial,truth,verdict,best_pair_gap,list_a,list_b,error")?;
    for record in &report.records {
        let verdict = record.verdict.map(hypothesis_name).unwrap_or("");
        let gap = record
            .best_pair_gap
            .map(|g| format!("{g:.16e}"))
            .unwrap_or_default();
        let error = record
            .error
            .as_deref()
            .unwrap_or("")
            .replace(',', ";")
            .replace('\n', " ");
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            record.index,
            hypothesis_name(record.truth),
            verdict,
            gap,
            record.list_sizes[0],
            record.list_sizes[1],
            error
        )?;
    }
    out.flush()?;
    Ok(())
}
