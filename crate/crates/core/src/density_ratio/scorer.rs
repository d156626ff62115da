//! Text scoring on top of any sentence-probability model, and the weight
//! and diagnostic computations built from scored texts.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::density_ratio::{WeightMethod, WeightSet};
use crate::error::{Error, Result};
use crate::stats::{logsumexp, median, quantile};
use crate::text::split_sentences;

/// Exponents are clamped so a weight never rounds to zero or infinity.
const MAX_LOG_RATIO: f64 = 700.0;

/// Anything that can assign a log-probability to one sentence.
pub trait SentenceScorer {
    fn sentence_logprob(&self, sentence: &str) -> Result<f64>;

    /// Scores many texts; implementations may override to batch or
    /// parallelize, but must keep results in input order.
    fn text_logprobs(&self, texts: &[&str]) -> Result<Vec<f64>> {
        texts.iter().map(|t| text_logprob(self, t)).collect()
    }
}

/// Text probability = arithmetic mean of its sentence probabilities,
/// computed in log space: logsumexp(sentence logprobs) − ln k.
pub fn text_logprob<S: SentenceScorer + ?Sized>(scorer: &S, text: &str) -> Result<f64> {
    let sentences = split_sentences(text);
    if sentences.is_empty() {
        return Err(Error::EmptyText);
    }
    let mut lps = Vec::with_capacity(sentences.len());
    for sentence in &sentences {
        lps.push(scorer.sentence_logprob(sentence)?);
    }
    Ok(logsumexp(&lps) - (lps.len() as f64).ln())
}

/// Importance weights exp(logP_T − logP_R) for every document.
pub fn lm_weights<R, T>(scorer_r: &R, scorer_t: &T, docs: &Corpus) -> Result<WeightSet>
where
    R: SentenceScorer + ?Sized,
    T: SentenceScorer + ?Sized,
{
    let texts: Vec<&str> = docs.docs().iter().map(|d| d.text.as_str()).collect();
    let lp_r = scorer_r.text_logprobs(&texts)?;
    let lp_t = scorer_t.text_logprobs(&texts)?;
    let mut ids = Vec::with_capacity(docs.len());
    let mut raw = Vec::with_capacity(docs.len());
    for (doc, (&r, &t)) in docs.docs().iter().zip(lp_r.iter().zip(&lp_t)) {
        if !r.is_finite() || !t.is_finite() {
            return Err(Error::DocScore {
                id: doc.id.clone(),
                message: format!("non-finite log-probability (source {r}, target {t})"),
            });
        }
        ids.push(doc.id.clone());
        raw.push((t - r).clamp(-MAX_LOG_RATIO, MAX_LOG_RATIO).exp());
    }
    WeightSet::new(ids, raw, WeightMethod::Lm)
}

/// Prompt-targeting check: on source texts, a source-targeted model should
/// out-score a target-targeted one, so the median ratio exceeds 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTargeting {
    pub median_ratio: f64,
    pub q25: f64,
    pub q75: f64,
    pub passed: bool,
}

/// Computes per-document P̂_source(X)/P̂_target(X) over source texts and
/// flags failure when the median is not above 1.
pub fn validate_prompt_targeting<R, T>(
    scorer_r: &R,
    scorer_t: &T,
    source_docs: &Corpus,
) -> Result<PromptTargeting>
where
    R: SentenceScorer + ?Sized,
    T: SentenceScorer + ?Sized,
{
    let texts: Vec<&str> = source_docs.docs().iter().map(|d| d.text.as_str()).collect();
    let lp_r = scorer_r.text_logprobs(&texts)?;
    let lp_t = scorer_t.text_logprobs(&texts)?;
    let ratios: Vec<f64> = lp_r
        .iter()
        .zip(&lp_t)
        .map(|(&r, &t)| (r - t).clamp(-MAX_LOG_RATIO, MAX_LOG_RATIO).exp())
        .collect();
    let median_ratio = median(&ratios);
    Ok(PromptTargeting {
        median_ratio,
        q25: quantile(&ratios, 0.25),
        q75: quantile(&ratios, 0.75),
        passed: median_ratio > 1.0,
    })
}

/// The same summary derived from already-computed lm weights on source
/// texts: the ratio P̂_R/P̂_T is the inverse of each raw weight.
pub fn targeting_from_weights(weights: &WeightSet) -> PromptTargeting {
    let ratios: Vec<f64> = weights.raw().iter().map(|w| 1.0 / w).collect();
    let median_ratio = median(&ratios);
    PromptTargeting {
        median_ratio,
        q25: quantile(&ratios, 0.25),
        q75: quantile(&ratios, 0.75),
        passed: median_ratio > 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Role};
    use crate::density_ratio::fit_ngram_lm;
    use approx::assert_abs_diff_eq;
    use std::collections::HashMap;

    struct TableScorer(HashMap<String, f64>);

    impl TableScorer {
        fn new(entries: &[(&str, f64)]) -> Self {
            TableScorer(
                entries
                    .iter()
                    .map(|(s, p)| (s.to_string(), p.ln()))
                    .collect(),
            )
        }
    }

    impl SentenceScorer for TableScorer {
        fn sentence_logprob(&self, sentence: &str) -> Result<f64> {
            self.0
                .get(sentence)
                .copied()
                .ok_or_else(|| Error::DocScore {
                    id: sentence.to_string(),
                    message: "unscored sentence".to_string(),
                })
        }
    }

    fn corpus_of(texts: &[&str]) -> Corpus {
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{i}"), *t))
            .collect();
        Corpus::new("c", Role::Source, docs).unwrap()
    }

    #[test]
    fn text_probability_averages_sentence_probabilities() {
        let scorer = TableScorer::new(&[("First.", 0.02), ("Second.", 0.04)]);
        let lp = text_logprob(&scorer, "First. Second.").unwrap();
        assert_abs_diff_eq!(lp, 0.03f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn single_sentence_passes_through() {
        let scorer = TableScorer::new(&[("just one sentence no punctuation", 0.125)]);
        let lp = text_logprob(&scorer, "just one sentence no punctuation").unwrap();
        assert_abs_diff_eq!(lp, 0.125f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn empty_text_errors() {
        let scorer = TableScorer::new(&[]);
        assert!(matches!(text_logprob(&scorer, ""), Err(Error::EmptyText)));
        assert!(matches!(text_logprob(&scorer, "   "), Err(Error::EmptyText)));
    }

    #[test]
    fn identical_scorers_give_unit_weights() {
        let corpus = corpus_of(&["alpha beta", "gamma"]);
        let scorer = TableScorer::new(&[("alpha beta", 0.01), ("gamma", 0.2)]);
        let weights = lm_weights(&scorer, &scorer, &corpus).unwrap();
        assert!(weights.raw().iter().all(|&w| w == 1.0));
        assert!(weights.stabilized().iter().all(|&w| w == 1.0));
        assert_eq!(weights.method(), WeightMethod::Lm);
    }

    #[test]
    fn log_ratio_of_ln4_gives_weight_four() {
        let corpus = corpus_of(&["doc text"]);
        let r = TableScorer::new(&[("doc text", 0.05)]);
        let t = TableScorer::new(&[("doc text", 0.20)]);
        let weights = lm_weights(&r, &t, &corpus).unwrap();
        assert_abs_diff_eq!(weights.raw()[0], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn extreme_log_ratios_stay_finite_and_positive() {
        struct Fixed(f64);
        impl SentenceScorer for Fixed {
            fn sentence_logprob(&self, _: &str) -> Result<f64> {
                Ok(self.0)
            }
        }
        let corpus = corpus_of(&["anything"]);
        let weights = lm_weights(&Fixed(-2000.0), &Fixed(0.0), &corpus).unwrap();
        assert!(weights.raw()[0].is_finite() && weights.raw()[0] > 0.0);
        let weights = lm_weights(&Fixed(0.0), &Fixed(-2000.0), &corpus).unwrap();
        assert!(weights.raw()[0].is_finite() && weights.raw()[0] > 0.0);
    }

    #[test]
    fn non_finite_logprob_names_the_document() {
        struct Bad;
        impl SentenceScorer for Bad {
            fn sentence_logprob(&self, _: &str) -> Result<f64> {
                Ok(f64::NAN)
            }
        }
        let corpus = corpus_of(&["text"]);
        let err = lm_weights(&Bad, &Bad, &corpus).unwrap_err();
        assert!(matches!(err, Error::DocScore { ref id, .. } if id == "d0"));
    }

    #[test]
    fn identical_models_fail_prompt_targeting_at_exactly_one() {
        let corpus = corpus_of(&["a b a", "b a"]);
        let lm = fit_ngram_lm(&corpus, 1, 0.5).unwrap();
        let check = validate_prompt_targeting(&lm, &lm, &corpus).unwrap();
        assert_eq!(check.median_ratio, 1.0);
        assert!(!check.passed);
        assert_eq!(check.q25, 1.0);
        assert_eq!(check.q75, 1.0);
    }

    #[test]
    fn distinct_models_on_their_own_texts_pass_targeting() {
        let source = corpus_of(&["apple orchard rows", "apple cider press", "orchard apple crates"]);
        let other = corpus_of(&["steel mill furnace", "molten steel pour", "furnace slag heap"]);
        let lm_r = fit_ngram_lm(&source, 1, 0.1).unwrap();
        let lm_t = fit_ngram_lm(&other, 1, 0.1).unwrap();
        let check = validate_prompt_targeting(&lm_r, &lm_t, &source).unwrap();
        assert!(check.median_ratio > 1.0);
        assert!(check.passed);
        assert!(check.q25 <= check.median_ratio && check.median_ratio <= check.q75);
    }

    #[test]
    fn weight_derived_targeting_matches_direct_validation() {
        let texts = ["va", "vb", "vc", "vd", "ve"];
        let corpus = corpus_of(&texts);
        let r = TableScorer::new(&[("va", 0.1), ("vb", 0.2), ("vc", 0.3), ("vd", 0.2), ("ve", 0.2)]);
        let t = TableScorer::new(&[("va", 0.3), ("vb", 0.1), ("vc", 0.1), ("vd", 0.4), ("ve", 0.1)]);
        let direct = validate_prompt_targeting(&r, &t, &corpus).unwrap();
        let derived = targeting_from_weights(&lm_weights(&r, &t, &corpus).unwrap());
        assert_abs_diff_eq!(direct.median_ratio, derived.median_ratio, epsilon = 1e-12);
        assert_abs_diff_eq!(direct.q25, derived.q25, epsilon = 1e-12);
        assert_abs_diff_eq!(direct.q75, derived.q75, epsilon = 1e-12);
        assert_eq!(direct.passed, derived.passed);
    }

    #[test]
    fn scorer_errors_propagate() {
        let corpus = corpus_of(&["unknown sentence"]);
        let empty = TableScorer::new(&[]);
        assert!(lm_weights(&empty, &empty, &corpus).is_err());
        assert!(validate_prompt_targeting(&empty, &empty, &corpus).is_err());
    }
}
