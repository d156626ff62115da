//! Importance-weighted means, natural effects, closed-form variance, and
//! normal or bootstrap confidence intervals.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::density_ratio::WeightSet;
use crate::error::{Error, Result};
use crate::stats::{derive_rng, quantile, standard_normal_quantile};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    HorvitzThompson,
    Hajek,
}

/// A weighted mean estimate with its closed-form variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportedMean {
    pub estimate: f64,
    pub variance: f64,
    pub n: usize,
    pub estimator_kind: EstimatorKind,
}

/// Confidence-interval settings: level, bootstrap resamples, RNG seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiSpec {
    pub alpha: f64,
    pub bootstrap_b: usize,
    pub seed: u64,
}

impl Default for CiSpec {
    fn default() -> Self {
        CiSpec {
            alpha: 0.05,
            bootstrap_b: 100,
            seed: 0,
        }
    }
}

impl CiSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha", format!("{} is outside (0, 1)", self.alpha)));
        }
        if self.bootstrap_b == 0 {
            return Err(Error::invalid("bootstrap_b", "must be positive"));
        }
        Ok(())
    }
}

/// Difference of within-group transported means for one binary attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub attribute: String,
    pub tau: f64,
    pub mu1: TransportedMean,
    pub mu0: TransportedMean,
    pub normal_ci: (f64, f64),
    pub bootstrap_ci: Option<(f64, f64)>,
    pub n1: usize,
    pub n0: usize,
}

/// Responses in weight order, with doc-id alignment enforced.
pub fn aligned_responses(weights: &WeightSet, corpus: &Corpus) -> Result<Vec<f64>> {
    if weights.len() != corpus.len() {
        return Err(Error::LengthMismatch {
            weights: weights.len(),
            responses: corpus.len(),
        });
    }
    let mut out = Vec::with_capacity(corpus.len());
    for (id, doc) in weights.doc_ids().iter().zip(corpus.docs()) {
        if *id != doc.id {
            return Err(Error::invalid(
                "alignment",
                format!("weights are for document '{id}' where the corpus has '{}'", doc.id),
            ));
        }
        out.push(doc.response.ok_or_else(|| Error::MissingResponse {
            id: doc.id.clone(),
        })?);
    }
    Ok(out)
}

fn check_lengths(weights: usize, responses: usize) -> Result<()> {
    if weights == 0 {
        return Err(Error::invalid("weights", "no observations"));
    }
    if weights != responses {
        return Err(Error::LengthMismatch { weights, responses });
    }
    Ok(())
}

fn check_finite(responses: &[f64]) -> Result<()> {
    if let Some(i) = responses.iter().position(|y| !y.is_finite()) {
        return Err(Error::NonFiniteResponse {
            id: format!("index {i}"),
        });
    }
    Ok(())
}

/// (1/n²) Σ (w_i·y_i − μ̂)², the plug-in variance of a weighted mean.
pub fn variance_estimate(weights: &[f64], responses: &[f64], mu: f64) -> f64 {
    let n = weights.len() as f64;
    let sum: f64 = weights
        .iter()
        .zip(responses)
        .map(|(w, y)| {
            let d = w * y - mu;
            d * d
        })
        .sum();
    sum / (n * n)
}

/// Horvitz-Thompson mean (1/n) Σ w_i·y_i over the raw weights.
pub fn ht_mean(weights: &WeightSet, responses: &[f64]) -> Result<TransportedMean> {
    check_lengths(weights.len(), responses.len())?;
    check_finite(responses)?;
    let raw = weights.raw();
    let n = raw.len() as f64;
    let estimate = raw.iter().zip(responses).map(|(w, y)| w * y).sum::<f64>() / n;
    Ok(TransportedMean {
        estimate,
        variance: variance_estimate(raw, responses, estimate),
        n: raw.len(),
        estimator_kind: EstimatorKind::HorvitzThompson,
    })
}

/// Hajek mean Σ w_i·y_i / Σ w_i, i.e. the stabilized-weight average; the
/// toolkit default.
pub fn hajek_mean(weights: &WeightSet, responses: &[f64]) -> Result<TransportedMean> {
    check_lengths(weights.len(), responses.len())?;
    check_finite(responses)?;
    hajek_over(weights.stabilized(), responses)
}

fn hajek_over(weights: &[f64], responses: &[f64]) -> Result<TransportedMean> {
    let sum_w: f64 = weights.iter().sum();
    let estimate = weights
        .iter()
        .zip(responses)
        .map(|(w, y)| w * y)
        .sum::<f64>()
        / sum_w;
    let n = weights.len() as f64;
    let mean_w = sum_w / n;
    let gamma: Vec<f64> = weights.iter().map(|w| w / mean_w).collect();
    Ok(TransportedMean {
        estimate,
        variance: variance_estimate(&gamma, responses, estimate),
        n: weights.len(),
        estimator_kind: EstimatorKind::Hajek,
    })
}

/// Plain sample mean as a unit-weight Hajek estimate.
pub fn unweighted_mean(responses: &[f64]) -> Result<TransportedMean> {
    if responses.is_empty() {
        return Err(Error::invalid("responses", "no observations"));
    }
    check_finite(responses)?;
    hajek_over(&vec![1.0; responses.len()], responses)
}

/// estimate ± z_{1−α/2}·sqrt(variance).
pub fn normal_ci(mean: &TransportedMean, spec: &CiSpec) -> Result<(f64, f64)> {
    spec.validate()?;
    let z = standard_normal_quantile(1.0 - spec.alpha / 2.0);
    let half = z * mean.variance.sqrt();
    Ok((mean.estimate - half, mean.estimate + half))
}

/// One statistic value per resample of (weight, response) pairs. Resample
/// r draws from an RNG derived from (seed, r), so the sequence does not
/// depend on execution order or on B.
pub fn bootstrap_replicates(
    weights: &[f64],
    responses: &[f64],
    kind: EstimatorKind,
    b: usize,
    seed: u64,
) -> Vec<f64> {
    let n = weights.len();
    let mut replicates = Vec::with_capacity(b);
    for r in 0..b {
        let mut rng = derive_rng(seed, r as u64);
        let mut sum_wy = 0.0;
        let mut sum_w = 0.0;
        for _ in 0..n {
            let i = rng.random_range(0..n);
            sum_wy += weights[i] * responses[i];
            sum_w += weights[i];
        }
        replicates.push(match kind {
            EstimatorKind::HorvitzThompson => sum_wy / n as f64,
            EstimatorKind::Hajek => sum_wy / sum_w,
        });
    }
    replicates
}

/// Percentile bootstrap interval at level 1−α.
pub fn bootstrap_ci(
    weights: &WeightSet,
    responses: &[f64],
    kind: EstimatorKind,
    spec: &CiSpec,
) -> Result<(f64, f64)> {
    spec.validate()?;
    check_lengths(weights.len(), responses.len())?;
    check_finite(responses)?;
    let replicates =
        bootstrap_replicates(weights.raw(), responses, kind, spec.bootstrap_b, spec.seed);
    Ok(percentile_interval(&replicates, spec.alpha))
}

fn percentile_interval(replicates: &[f64], alpha: f64) -> (f64, f64) {
    (
        quantile(replicates, alpha / 2.0),
        quantile(replicates, 1.0 - alpha / 2.0),
    )
}

/// Transported natural effect of a binary attribute: within-group Hajek
/// means (weights renormalized per group), differenced, with an
/// independent-groups variance and within-group bootstrap.
pub fn natural_effect(
    corpus: &Corpus,
    weights: &WeightSet,
    attribute: &str,
    spec: &CiSpec,
) -> Result<EffectEstimate> {
    spec.validate()?;
    let responses = aligned_responses(weights, corpus)?;
    let mut group1: Vec<usize> = Vec::new();
    let mut group0: Vec<usize> = Vec::new();
    for (i, doc) in corpus.docs().iter().enumerate() {
        match doc.attribute(attribute) {
            Some(1) => group1.push(i),
            Some(_) => group0.push(i),
            None => {
                return Err(Error::MissingAttribute {
                    id: doc.id.clone(),
                    attribute: attribute.to_string(),
                })
            }
        }
    }
    for (group, members) in [(1u8, &group1), (0u8, &group0)] {
        if members.is_empty() {
            return Err(Error::EmptyAttributeGroup {
                attribute: attribute.to_string(),
                group,
            });
        }
    }

    let raw = weights.raw();
    let pick = |idx: &[usize]| -> (Vec<f64>, Vec<f64>) {
        (
            idx.iter().map(|&i| raw[i]).collect(),
            idx.iter().map(|&i| responses[i]).collect(),
        )
    };
    let (w1, y1) = pick(&group1);
    let (w0, y0) = pick(&group0);
    let mu1 = hajek_over(&w1, &y1)?;
    let mu0 = hajek_over(&w0, &y0)?;
    let tau = mu1.estimate - mu0.estimate;
    let variance = mu1.variance + mu0.variance;
    let z = standard_normal_quantile(1.0 - spec.alpha / 2.0);
    let half = z * variance.sqrt();

    let mut taus = Vec::with_capacity(spec.bootstrap_b);
    for r in 0..spec.bootstrap_b {
        let b1 = hajek_resample(&w1, &y1, spec.seed, 2 * r as u64);
        let b0 = hajek_resample(&w0, &y0, spec.seed, 2 * r as u64 + 1);
        taus.push(b1 - b0);
    }

    Ok(EffectEstimate {
        attribute: attribute.to_string(),
        tau,
        mu1,
        mu0,
        normal_ci: (tau - half, tau + half),
        bootstrap_ci: Some(percentile_interval(&taus, spec.alpha)),
        n1: group1.len(),
        n0: group0.len(),
    })
}

fn hajek_resample(weights: &[f64], responses: &[f64], seed: u64, stream: u64) -> f64 {
    let n = weights.len();
    let mut rng = derive_rng(seed, stream);
    let mut sum_wy = 0.0;
    let mut sum_w = 0.0;
    for _ in 0..n {
        let i = rng.random_range(0..n);
        sum_wy += weights[i] * responses[i];
        sum_w += weights[i];
    }
    sum_wy / sum_w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Role};
    use crate::density_ratio::WeightMethod;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn weight_set(raw: &[f64]) -> WeightSet {
        let ids = (0..raw.len()).map(|i| format!("d{i}")).collect();
        WeightSet::new(ids, raw.to_vec(), WeightMethod::Exact).unwrap()
    }

    #[test]
    fn ht_mean_hand_values() {
        let m = ht_mean(&weight_set(&[1.0, 1.0]), &[3.0, 5.0]).unwrap();
        assert_abs_diff_eq!(m.estimate, 4.0, epsilon = 1e-12);
        assert_eq!(m.estimator_kind, EstimatorKind::HorvitzThompson);

        let m = ht_mean(&weight_set(&[2.0, 0.5]), &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(m.estimate, 1.25, epsilon = 1e-12);
    }

    #[test]
    fn hajek_mean_hand_values() {
        let m = hajek_mean(&weight_set(&[2.0, 1.0, 1.0]), &[4.0, 2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(m.estimate, 2.5, epsilon = 1e-12);
        assert_eq!(m.estimator_kind, EstimatorKind::Hajek);
    }

    #[test]
    fn equal_weights_reduce_to_the_sample_mean() {
        let m = hajek_mean(&weight_set(&[7.0; 4]), &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(m.estimate, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn constant_responses_are_returned_exactly() {
        let m = hajek_mean(&weight_set(&[0.1, 5.0, 2.0]), &[3.0, 3.0, 3.0]).unwrap();
        assert_abs_diff_eq!(m.estimate, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn variance_hand_value() {
        assert_abs_diff_eq!(
            variance_estimate(&[1.0, 1.0], &[3.0, 5.0], 4.0),
            0.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            variance_estimate(&[1.0, 1.0, 1.0], &[2.0, 2.0, 2.0], 2.0),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn normal_ci_hand_values() {
        let m = TransportedMean {
            estimate: 0.0,
            variance: 1.0,
            n: 10,
            estimator_kind: EstimatorKind::Hajek,
        };
        let spec = CiSpec::default();
        let (lo, hi) = normal_ci(&m, &spec).unwrap();
        assert_abs_diff_eq!(lo, -1.959964, epsilon = 1e-6);
        assert_abs_diff_eq!(hi, 1.959964, epsilon = 1e-6);

        let spec_32 = CiSpec { alpha: 0.32, ..spec };
        let (lo, hi) = normal_ci(&m, &spec_32).unwrap();
        assert_abs_diff_eq!(hi, 0.994458, epsilon = 1e-6);
        assert_abs_diff_eq!(lo, -0.994458, epsilon = 1e-6);

        let degenerate = TransportedMean {
            variance: 0.0,
            ..m
        };
        assert_eq!(normal_ci(&degenerate, &spec).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn ci_nesting() {
        let m = TransportedMean {
            estimate: 2.0,
            variance: 0.3,
            n: 50,
            estimator_kind: EstimatorKind::Hajek,
        };
        let tight = normal_ci(&m, &CiSpec { alpha: 0.05, ..CiSpec::default() }).unwrap();
        let wide = normal_ci(&m, &CiSpec { alpha: 0.01, ..CiSpec::default() }).unwrap();
        assert!(wide.0 < tight.0 && tight.1 < wide.1);
    }

    #[test]
    fn bootstrap_is_deterministic_and_prefix_stable() {
        let w = [2.0, 1.0, 0.5, 1.5, 1.0];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let a = bootstrap_replicates(&w, &y, EstimatorKind::Hajek, 100, 9);
        let b = bootstrap_replicates(&w, &y, EstimatorKind::Hajek, 100, 9);
        assert_eq!(a, b);
        let prefix = bootstrap_replicates(&w, &y, EstimatorKind::Hajek, 40, 9);
        assert_eq!(&a[..40], prefix.as_slice());
        let other = bootstrap_replicates(&w, &y, EstimatorKind::Hajek, 100, 10);
        assert_ne!(a, other);
    }

    #[test]
    fn bootstrap_ci_is_degenerate_for_constant_responses() {
        let set = weight_set(&[2.0, 1.0, 3.0, 0.5]);
        let y = [7.0; 4];
        let (lo, hi) = bootstrap_ci(&set, &y, EstimatorKind::Hajek, &CiSpec::default()).unwrap();
        assert_abs_diff_eq!(lo, 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 7.0, epsilon = 1e-12);
    }

    fn effect_corpus(y1: &[f64], y0: &[f64]) -> (Corpus, WeightSet) {
        let mut docs = Vec::new();
        for (i, &y) in y1.iter().enumerate() {
            let mut d = Document::new(format!("g1-{i}"), "text").with_response(y);
            d.attributes = Some([("a".to_string(), 1u8)].into_iter().collect());
            docs.push(d);
        }
        for (i, &y) in y0.iter().enumerate() {
            let mut d = Document::new(format!("g0-{i}"), "text").with_response(y);
            d.attributes = Some([("a".to_string(), 0u8)].into_iter().collect());
            docs.push(d);
        }
        let corpus = Corpus::new("c", Role::Source, docs).unwrap();
        let ids = corpus.docs().iter().map(|d| d.id.clone()).collect();
        let weights =
            WeightSet::new(ids, vec![1.0; corpus.len()], WeightMethod::Exact).unwrap();
        (corpus, weights)
    }

    #[test]
    fn unit_weight_effect_is_the_group_mean_difference() {
        let (corpus, weights) = effect_corpus(&[2.0, 4.0], &[1.0, 1.0]);
        let e = natural_effect(&corpus, &weights, "a", &CiSpec::default()).unwrap();
        assert_abs_diff_eq!(e.tau, 2.0, epsilon = 1e-12);
        assert_eq!((e.n1, e.n0), (2, 2));
        assert!(e.normal_ci.0 <= e.tau && e.tau <= e.normal_ci.1);
        assert_abs_diff_eq!(e.tau, e.mu1.estimate - e.mu0.estimate, epsilon = 1e-15);
    }

    #[test]
    fn negating_responses_negates_the_effect_exactly() {
        let (corpus, weights) = effect_corpus(&[2.5, 4.0, 3.0], &[1.0, 2.0]);
        let e = natural_effect(&corpus, &weights, "a", &CiSpec::default()).unwrap();
        let negated_docs: Vec<Document> = corpus
            .docs()
            .iter()
            .map(|d| {
                let mut d = d.clone();
                d.response = Some(-d.response.unwrap());
                d
            })
            .collect();
        let negated = Corpus::new("c", Role::Source, negated_docs).unwrap();
        let en = natural_effect(&negated, &weights, "a", &CiSpec::default()).unwrap();
        assert_eq!(en.tau, -e.tau);
    }

    #[test]
    fn effect_errors_name_the_problem() {
        let (corpus, weights) = effect_corpus(&[2.0], &[1.0]);
        let err = natural_effect(&corpus, &weights, "missing", &CiSpec::default()).unwrap_err();
        assert!(matches!(err, Error::MissingAttribute { ref attribute, .. } if attribute == "missing"));

        let mut docs: Vec<Document> = corpus.docs().to_vec();
        for d in &mut docs {
            d.attributes = Some([("a".to_string(), 1u8)].into_iter().collect());
        }
        let single = Corpus::new("c", Role::Source, docs).unwrap();
        let err = natural_effect(&single, &weights, "a", &CiSpec::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyAttributeGroup { group: 0, .. }));
    }

    #[test]
    fn alignment_errors() {
        let corpus = Corpus::new(
            "c",
            Role::Source,
            vec![
                Document::new("x", "t").with_response(1.0),
                Document::new("y", "t").with_response(2.0),
            ],
        )
        .unwrap();
        let weights = weight_set(&[1.0, 1.0]);
        let err = aligned_responses(&weights, &corpus).unwrap_err();
        assert!(err.to_string().contains("d0"));

        let short = weight_set(&[1.0]);
        assert!(matches!(
            aligned_responses(&short, &corpus),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn rejects_non_finite_responses() {
        let set = weight_set(&[1.0, 1.0]);
        assert!(ht_mean(&set, &[1.0, f64::NAN]).is_err());
        assert!(hajek_mean(&set, &[f64::INFINITY, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn hajek_stays_within_response_range(
            pairs in proptest::collection::vec((1e-3f64..1e3, -100.0f64..100.0), 1..40)
        ) {
            let (w, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = hajek_mean(&weight_set(&w), &y).unwrap();
            let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m.estimate >= lo - 1e-9 && m.estimate <= hi + 1e-9);
        }

        #[test]
        fn hajek_ignores_weight_scale(
            pairs in proptest::collection::vec((1e-3f64..1e3, -10.0f64..10.0), 2..30),
            c in 1e-6f64..1e6,
        ) {
            let (w, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
            let a = hajek_mean(&weight_set(&w), &y).unwrap();
            let b = hajek_mean(&weight_set(&scaled), &y).unwrap();
            prop_assert!((a.estimate - b.estimate).abs() <= 1e-12 * a.estimate.abs().max(1.0));
        }

        #[test]
        fn variance_is_nonnegative(
            pairs in proptest::collection::vec((1e-3f64..1e3, -10.0f64..10.0), 1..30),
            mu in -20.0f64..20.0,
        ) {
            let (w, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert!(variance_estimate(&w, &y, mu) >= 0.0);
        }
    }
}
