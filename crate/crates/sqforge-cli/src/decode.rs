//! `decode`: run the grid list-decoder on a dataset file.
//!
//! Candidates live on a direction net crossed with a magnitude ladder in the
//! unit ball; each is scored by the two core-residual membership conditions
//! and survivors are packed at pairwise separation `gamma`. The run is fully
//! deterministic, so no seed is taken. When the dataset manifest records the
//! planted regressor, the minimum list distance to it is printed for
//! convenience.

use std::fs;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::Serialize;
use sqforge_core::decoder::{list_decode, DecoderParams, GridResolution};

use crate::{read_dataset, write_run_manifest, Failure, RunManifest};

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Dataset to decode.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// Assumed inlier fraction (default: the manifest's alpha).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Assumed noise level (default: the manifest's sigma).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Residual cutoff multiplier override (default: smallest integer with
    /// Gaussian tail mass below alpha / 40).
    #[arg(long)]
    pub t: Option<f64>,
    /// List separation override (default: 40 sigma t / alpha).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Candidate directions on the circle (dimensions 1 and 2).
    #[arg(long)]
    pub angular: Option<usize>,
    /// Integer-lattice radius for the direction net (dimensions 3 and 4).
    #[arg(long)]
    pub lattice_radius: Option<usize>,
    /// Magnitude steps per direction (candidates at |beta| = j / magnitudes).
    #[arg(long)]
    pub magnitudes: Option<usize>,
    /// Write the decoded list here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Header of the list file, serialized on the `#decode` line.
#[derive(Debug, Serialize)]
struct DecodeSummary {
    alpha: f64,
    sigma: f64,
    t: f64,
    gamma: f64,
    d: usize,
    rows: usize,
    candidates_scored: usize,
    passing: usize,
    list_size: usize,
}

pub fn run(args: &DecodeArgs, argv: &[String]) -> Result<(), Failure> {
    let started = Instant::now();
    let dataset = read_dataset(&args.input)?;
    let alpha = args.alpha.unwrap_or(dataset.manifest.alpha);
    let sigma = args.sigma.unwrap_or(dataset.manifest.sigma);
    let params = DecoderParams::with_overrides(alpha, sigma, args.t, args.gamma)?;
    let resolution = match (args.angular, args.lattice_radius, args.magnitudes) {
        (None, None, None) => None,
        (angular, lattice, magnitudes) => Some(GridResolution {
            angular: angular.unwrap_or(0),
            lattice_radius: lattice.unwrap_or(0),
            magnitudes: magnitudes.unwrap_or(16),
        }),
    };

    let d = dataset.dim();
    let outcome = list_decode(&dataset.xs, &dataset.ys, d, &params, resolution)?;
    println!(
        "scored {} candidates: {} pass membership, list holds {} at separation gamma = {:.4}",
        outcome.candidates_scored,
        outcome.passing.len(),
        outcome.list.len(),
        params.gamma
    );
    for (i, beta) in outcome.list.iter().enumerate() {
        let norm: f64 = beta.iter().map(|x| x * x).sum::<f64>().sqrt();
        println!("  [{i}] |beta| = {norm:.4}");
    }
    if let Some(beta) = &dataset.manifest.beta {
        let best = outcome
            .list
            .iter()
            .map(|entry| distance(entry, beta))
            .fold(f64::INFINITY, f64::min);
        if best.is_finite() {
            println!("min distance to the planted regressor: {best:.6}");
        } else {
            println!("empty list; planted regressor not recovered");
        }
    }

    if let Some(out) = &args.out {
        let summary = DecodeSummary {
            alpha: params.alpha,
            sigma: params.sigma,
            t: params.t,
            gamma: params.gamma,
            d,
            rows: dataset.len(),
            candidates_scored: outcome.candidates_scored,
            passing: outcome.passing.len(),
            list_size: outcome.list.len(),
        };
        let mut text = format!(
            "#decode {}\n",
            serde_json::to_string(&summary)
                .map_err(|e| Failure::new(1, format!("summary serialization: {e}")))?
        );
        for entry in &outcome.list {
            let mut line = String::new();
            for (j, x) in entry.iter().enumerate() {
                if j > 0 {
                    line.push(' ');
                }
                write!(line, "{x:.16e}").expect("string write");
            }
            text.push_str(&line);
            text.push('\n');
        }
        fs::write(out, text)?;

        let mut manifest = RunManifest::new("decode", argv, dataset.manifest.seed);
        manifest.inputs = vec![args.input.display().to_string()];
        manifest.outputs = vec![out.display().to_string()];
        manifest.duration_seconds = started.elapsed().as_secs_f64();
        write_run_manifest(out, &manifest)?;
    }

    eprintln!("decoded in {:.2}s", started.elapsed().as_secs_f64());
    Ok(())
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
