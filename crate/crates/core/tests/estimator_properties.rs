//! Distributional and determinism properties of the transport estimators,
//! checked by Monte Carlo against a synthetic space with known truth.

use textshift::corpus::Role;
use textshift::estimator::{
    bootstrap_ci, bootstrap_replicates, hajek_mean, ht_mean, normal_ci, CiSpec, EstimatorKind,
};
use textshift::stats::standard_normal_cdf;
use textshift::synth;

/// Two-sided Kolmogorov-Smirnov distance to the standard normal.
fn ks_to_normal(zs: &mut [f64]) -> f64 {
    zs.sort_by(|a, b| a.total_cmp(b));
    let n = zs.len() as f64;
    let mut d = 0.0f64;
    for (i, z) in zs.iter().enumerate() {
        let phi = standard_normal_cdf(*z);
        d = d.max((phi - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - phi).abs());
    }
    d
}

#[test]
fn studentized_ht_estimates_are_standard_normal() {
    let space = synth::canonical_shifted();
    let truth = space.truth().unwrap();
    let reps = 10_000usize;
    let n = 1_000;
    let mut zs = Vec::with_capacity(reps);
    for rep in 0..reps {
        let corpus = space
            .sample_corpus(Role::Source, n, 40_000 + rep as u64)
            .unwrap();
        let weights = space.true_weights(&corpus).unwrap();
        let responses = corpus.responses().unwrap();
        let est = ht_mean(&weights, &responses).unwrap();
        zs.push((est.estimate - truth.mu_t) / est.variance.sqrt());
    }
    let d = ks_to_normal(&mut zs);
    let critical = 1.628 / (reps as f64).sqrt();
    assert!(d < critical, "KS distance {d} exceeds {critical}");
}

#[test]
fn both_estimators_converge_to_the_target_mean() {
    let space = synth::canonical_shifted();
    let truth = space.truth().unwrap();
    let corpus = space.sample_corpus(Role::Source, 50_000, 9).unwrap();
    let weights = space.true_weights(&corpus).unwrap();
    let responses = corpus.responses().unwrap();
    let ht = ht_mean(&weights, &responses).unwrap();
    let hajek = hajek_mean(&weights, &responses).unwrap();
    for est in [&ht, &hajek] {
        let gap = (est.estimate - truth.mu_t).abs();
        let se = est.variance.sqrt();
        assert!(gap < 4.0 * se, "estimate off truth by {gap} with se {se}");
    }
}

#[test]
fn bootstrap_replicate_streams_are_prefix_stable() {
    let space = synth::canonical_shifted();
    let corpus = space.sample_corpus(Role::Source, 200, 3).unwrap();
    let weights = space.true_weights(&corpus).unwrap();
    let responses = corpus.responses().unwrap();
    let short = bootstrap_replicates(weights.raw(), &responses, EstimatorKind::Hajek, 10, 7);
    let long = bootstrap_replicates(weights.raw(), &responses, EstimatorKind::Hajek, 40, 7);
    assert_eq!(short.as_slice(), &long[..10]);
    let reseeded = bootstrap_replicates(weights.raw(), &responses, EstimatorKind::Hajek, 10, 8);
    assert_ne!(short, reseeded);
}

#[test]
fn intervals_nest_as_alpha_shrinks() {
    let space = synth::canonical_shifted();
    let corpus = space.sample_corpus(Role::Source, 500, 4).unwrap();
    let weights = space.true_weights(&corpus).unwrap();
    let responses = corpus.responses().unwrap();
    let est = hajek_mean(&weights, &responses).unwrap();

    let spec = |alpha: f64| CiSpec {
        alpha,
        bootstrap_b: 400,
        seed: 11,
    };
    let tight = normal_ci(&est, &spec(0.10)).unwrap();
    let wide = normal_ci(&est, &spec(0.01)).unwrap();
    assert!(wide.0 < tight.0 && tight.1 < wide.1);
    assert!(tight.0 < est.estimate && est.estimate < tight.1);

    let boot_tight = bootstrap_ci(&weights, &responses, EstimatorKind::Hajek, &spec(0.10)).unwrap();
    let boot_wide = bootstrap_ci(&weights, &responses, EstimatorKind::Hajek, &spec(0.01)).unwrap();
    assert!(boot_wide.0 <= boot_tight.0 && boot_tight.1 <= boot_wide.1);
}
