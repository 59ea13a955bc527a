//! Property tests for the structural invariants of the construction.
//!
//! Each property quantifies a contract the rest of the library leans on:
//! the spike mass stays inside `(0, sqrt(alpha)]`, solved mixtures really
//! zero their first `2m` Hermite moments at any label, support reduction
//! cannot move the observable moments, the decoder's default thresholds
//! follow their closed forms, public rotations are orthogonal for every
//! dimension and seed, and the dataset text format is a bijection on bits.

use proptest::prelude::*;
use sqforge_core::decoder::DecoderParams;
use sqforge_core::instance::{DatasetManifest, InstanceParams, LabeledDataset};
use sqforge_core::moment_match::{
    caratheodory_reduce, default_support_bound, inlier_weight, DiscreteDistribution, SpikeMixture,
};
use sqforge_core::testing::random_rotation;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn spike_mass_is_bounded_symmetric_and_peaked(
        alpha in 0.01f64..0.9,
        y in -30.0f64..30.0,
    ) {
        let w = inlier_weight(y, alpha);
        prop_assert!(w > 0.0);
        prop_assert!(w <= alpha.sqrt() * (1.0 + 1e-15));
        prop_assert!(w <= inlier_weight(0.0, alpha) + 1e-15);
        let mirrored = inlier_weight(-y, alpha);
        prop_assert!((w - mirrored).abs() <= 1e-15 * w.max(mirrored));
    }

    #[test]
    fn decoder_defaults_follow_their_closed_forms(
        alpha in 0.01f64..0.5,
        sigma in 0.01f64..1.0,
        n in 100usize..100_000,
    ) {
        let params = DecoderParams::new(alpha, sigma).unwrap();
        let t_floor = (2.0 * (40.0 / alpha).ln()).sqrt();
        prop_assert!(params.t >= t_floor);
        prop_assert!(params.t < t_floor + 1.0);
        prop_assert_eq!(params.t, params.t.ceil());
        prop_assert_eq!(params.gamma, 40.0 * sigma * params.t / alpha);
        prop_assert_eq!(params.fraction_limit(), alpha / 20.0);
        prop_assert_eq!(
            params.core_size(n),
            (alpha * n as f64 / 2.0).ceil() as usize
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solved_mixtures_zero_their_moments(
        y in -8.0f64..8.0,
        frac in 0.0f64..1.0,
        m in 1usize..=3,
    ) {
        // Stay inside the supported envelope: matching degree 1 holds out to
        // alpha = 0.3, degrees 2 and 3 to alpha = 0.1 (feasibility can only
        // improve as the spike lightens, i.e. as alpha shrinks).
        let alpha_max = if m == 1 { 0.3 } else { 0.1 };
        let alpha = 0.02 + frac * (alpha_max - 0.02);
        let b = default_support_bound(m);
        let mix = SpikeMixture::solve(y, alpha, m, b, 801).unwrap();
        for (i, r) in mix.hermite_residuals().into_iter().enumerate() {
            prop_assert!(
                r.abs() <= 1e-7,
                "moment {} residual {:.3e}", i + 1, r
            );
        }
        let comp = mix.complement();
        prop_assert!(comp.len() <= 2 * m + 1);
        let bound = comp.support_bound();
        for &t in comp.atoms() {
            prop_assert!(t.abs() <= bound + 1e-9);
        }
        let total: f64 = comp.weights().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn support_reduction_preserves_observable_moments(
        m in 1usize..=3,
        raw_atoms in prop::collection::vec(-4.0f64..4.0, 8..=20),
        raw_weights in prop::collection::vec(0.01f64..1.0, 20),
    ) {
        let mut atoms = raw_atoms;
        atoms.sort_by(f64::total_cmp);
        atoms.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        prop_assume!(atoms.len() > 2 * m + 1);

        let k = atoms.len();
        let total: f64 = raw_weights[..k].iter().sum();
        let mut weights: Vec<f64> = raw_weights[..k].iter().map(|w| w / total).collect();
        let partial: f64 = weights[..k - 1].iter().sum();
        weights[k - 1] = 1.0 - partial;
        let dist = DiscreteDistribution::new(atoms, weights, 4.0).unwrap();

        let reduced = caratheodory_reduce(&dist, m).unwrap();
        prop_assert!(reduced.len() <= 2 * m + 1);
        let before = dist.hermite_moments(2 * m);
        let after = reduced.hermite_moments(2 * m);
        for i in 0..=2 * m {
            prop_assert!(
                (before.coeff(i) - after.coeff(i)).abs() <= 1e-8,
                "moment {} moved {:.3e} -> {:.3e}", i, before.coeff(i), after.coeff(i)
            );
        }
        let total: f64 = reduced.weights().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn public_rotations_are_orthogonal(
        d in 1usize..=8,
        seed in any::<u64>(),
    ) {
        let q = random_rotation(d, seed);
        let gram = q.transpose() * &q;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!(
                    (gram[(i, j)] - target).abs() <= 1e-10,
                    "gram[{i}, {j}] = {}", gram[(i, j)]
                );
            }
        }
    }
}

fn finite(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        0.0
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dataset_text_format_is_bit_exact(
        d in 1usize..=3,
        rows in prop::collection::vec(prop::collection::vec(any::<f64>(), 4), 1..=8),
        seed in any::<u64>(),
    ) {
        let params = InstanceParams::new(0.25, 0.5, 1, d, 0.3).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for row in &rows {
            for j in 0..d {
                xs.push(finite(row[j]));
            }
            ys.push(finite(row[3]));
        }
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
            direction_id: "prop".to_string(),
            beta: None,
        };
        let ds = LabeledDataset {
            manifest,
            xs,
            ys,
            provenance: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prop.ds");
        ds.write_to(&path).unwrap();
        let back = LabeledDataset::read_from(&path).unwrap();
        prop_assert_eq!(back.xs.len(), ds.xs.len());
        for (a, b) in back.xs.iter().zip(&ds.xs) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in back.ys.iter().zip(&ds.ys) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(back.manifest.seed, seed);
    }
}
