//! Classifier posterior recovery improves with training size.

use textshift::attributes::FeatureSpec;
use textshift::corpus::Role;
use textshift::density_ratio::train_ratio_classifier;
use textshift::stats::pearson;
use textshift::synth;

#[test]
fn posterior_correlation_rises_with_training_size() {
    let space = synth::token_space(8, 5).unwrap();
    let truth = space.truth().unwrap();
    let probe = space.sample_corpus(Role::Source, 2_000, 99).unwrap();
    let true_posterior: Vec<f64> = probe
        .docs()
        .iter()
        .map(|doc| {
            let i = space.texts().iter().position(|x| *x == doc.text).unwrap();
            truth.true_ratio[i] / (1.0 + truth.true_ratio[i])
        })
        .collect();

    let mut means = Vec::new();
    for (size_idx, n) in [100usize, 1_000, 10_000].into_iter().enumerate() {
        let mut total = 0.0;
        let seeds = 20u64;
        for s in 0..seeds {
            let base = 1_000 * (size_idx as u64 + 1) + 2 * s;
            let r = space.sample_corpus(Role::Source, n, base).unwrap();
            let t = space.sample_corpus(Role::Target, n, base + 1).unwrap();
            let model = train_ratio_classifier(&r, &t, &FeatureSpec::External, None).unwrap();
            let estimated = model.posteriors(&probe).unwrap();
            total += pearson(&estimated, &true_posterior);
        }
        means.push(total / seeds as f64);
    }

    assert!(
        means[0] < means[1] && means[1] < means[2],
        "correlations not increasing: {means:?}"
    );
    assert!(means[2] >= 0.99, "large-sample correlation {}", means[2]);
}
