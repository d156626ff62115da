//! Additive-smoothed n-gram language model, the builtin offline stand-in
//! for a prompted external model.

use std::collections::HashMap;

use crate::corpus::Corpus;
use crate::density_ratio::SentenceScorer;
use crate::error::{Error, Result};
use crate::text::{split_sentences, tokenize};

/// Sentence-start padding; never predicted and not part of the vocabulary.
const BOS: u32 = u32::MAX;

/// N-gram model with additive smoothing. Unknown tokens map to a reserved
/// unknown symbol; unseen contexts back off to the uniform distribution.
#[derive(Debug, Clone)]
pub struct NgramLm {
    order: usize,
    alpha: f64,
    vocab: HashMap<String, u32>,
    unk_id: u32,
    counts: HashMap<Vec<u32>, HashMap<u32, u64>>,
    totals: HashMap<Vec<u32>, u64>,
}

/// Fits an order-1..=3 model on the corpus, counting per sentence with
/// start padding.
pub fn fit_ngram_lm(corpus: &Corpus, order: usize, alpha: f64) -> Result<NgramLm> {
    if !(1..=3).contains(&order) {
        return Err(Error::invalid("ngram order", format!("{order} is outside 1..=3")));
    }
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::invalid("smoothing alpha", format!("{alpha} is not positive")));
    }
    let mut vocab: HashMap<String, u32> = HashMap::new();
    for doc in corpus.docs() {
        for token in tokenize(&doc.text) {
            let next = vocab.len() as u32;
            vocab.entry(token).or_insert(next);
        }
    }
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let unk_id = vocab.len() as u32;
    vocab.insert("<unk>".to_string(), unk_id);

    let mut counts: HashMap<Vec<u32>, HashMap<u32, u64>> = HashMap::new();
    let mut totals: HashMap<Vec<u32>, u64> = HashMap::new();
    for doc in corpus.docs() {
        for sentence in split_sentences(&doc.text) {
            let ids: Vec<u32> = tokenize(sentence)
                .iter()
                .map(|t| vocab[t])
                .collect();
            for i in 0..ids.len() {
                let ctx = context_at(&ids, i, order);
                *counts.entry(ctx.clone()).or_default().entry(ids[i]).or_insert(0) += 1;
                *totals.entry(ctx).or_insert(0) += 1;
            }
        }
    }
    Ok(NgramLm {
        order,
        alpha,
        vocab,
        unk_id,
        counts,
        totals,
    })
}

fn context_at(ids: &[u32], i: usize, order: usize) -> Vec<u32> {
    let mut ctx = Vec::with_capacity(order - 1);
    for back in (1..order).rev() {
        ctx.push(if i >= back { ids[i - back] } else { BOS });
    }
    ctx
}

impl NgramLm {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Vocabulary size including the unknown symbol.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn id_of(&self, token: &str) -> u32 {
        self.vocab.get(token).copied().unwrap_or(self.unk_id)
    }

    fn prob_ids(&self, ctx: &[u32], token: u32) -> f64 {
        let v = self.vocab.len() as f64;
        let total = self.totals.get(ctx).copied().unwrap_or(0) as f64;
        let count = self
            .counts
            .get(ctx)
            .and_then(|m| m.get(&token))
            .copied()
            .unwrap_or(0) as f64;
        (count + self.alpha) / (total + self.alpha * v)
    }

    /// P(token | context), padding or truncating the context to order−1
    /// items; unknown tokens map to the unknown symbol.
    pub fn conditional_prob(&self, context: &[&str], token: &str) -> f64 {
        let mut ctx = Vec::with_capacity(self.order - 1);
        for back in (1..self.order).rev() {
            ctx.push(if context.len() >= back {
                self.id_of(context[context.len() - back])
            } else {
                BOS
            });
        }
        self.prob_ids(&ctx, self.id_of(token))
    }
}

impl SentenceScorer for NgramLm {
    fn sentence_logprob(&self, sentence: &str) -> Result<f64> {
        let ids: Vec<u32> = tokenize(sentence)
            .iter()
            .map(|t| self.id_of(t))
            .collect();
        if ids.is_empty() {
            return Err(Error::EmptyText);
        }
        let mut lp = 0.0;
        for i in 0..ids.len() {
            let ctx = context_at(&ids, i, self.order);
            lp += self.prob_ids(&ctx, ids[i]).ln();
        }
        Ok(lp)
    }
}
