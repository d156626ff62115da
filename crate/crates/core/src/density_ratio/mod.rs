//! Per-document importance weights dP_T/dP_R, estimated by a binary
//! classifier over text features or by the ratio of language-model text
//! probabilities. Weights only exist when the target distribution is
//! absolutely continuous with respect to the source; a collapsing effective
//! sample size is the practical symptom of a violation.

mod classifier;
mod ngram;
mod provider;
mod scorer;

pub use classifier::{clf_weights, raw_weight_from_posterior, train_ratio_classifier, RatioClassifier};
pub use ngram::{fit_ngram_lm, NgramLm};
pub use provider::{HttpLmProvider, LmProviderConfig};
pub use scorer::{
    lm_weights, targeting_from_weights, text_logprob, validate_prompt_targeting, PromptTargeting,
    SentenceScorer,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{median, quantile};

/// How a weight set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMethod {
    Clf,
    Lm,
    Exact,
}

impl std::fmt::Display for WeightMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            WeightMethod::Clf => "clf",
            WeightMethod::Lm => "lm",
            WeightMethod::Exact => "exact",
        };
        f.write_str(s)
    }
}

/// Summary statistics of the stabilized weights, plus bookkeeping for
/// posterior clipping and truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightDiagnostics {
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub effective_sample_size: f64,
    pub clipped: usize,
    pub truncated_at: Option<f64>,
}

/// Importance weights for one corpus, in document order. `raw` estimates
/// dP_T/dP_R(X_i); `stabilized` divides by the mean raw weight so the
/// weights average to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    doc_ids: Vec<String>,
    raw: Vec<f64>,
    stabilized: Vec<f64>,
    method: WeightMethod,
    diagnostics: WeightDiagnostics,
}

/// (Σw)² / Σw²; equals n when all weights are equal.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let sum: f64 = weights.iter().sum();
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    sum * sum / sum_sq
}

impl WeightSet {
    pub fn new(doc_ids: Vec<String>, raw: Vec<f64>, method: WeightMethod) -> Result<WeightSet> {
        if doc_ids.is_empty() {
            return Err(Error::invalid("weights", "weight set must be nonempty"));
        }
        if doc_ids.len() != raw.len() {
            return Err(Error::invalid(
                "weights",
                format!("{} doc ids but {} weights", doc_ids.len(), raw.len()),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for id in &doc_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId { id: id.clone() });
            }
        }
        for (id, &w) in doc_ids.iter().zip(&raw) {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidWeight {
                    id: id.clone(),
                    value: w,
                });
            }
        }
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        let stabilized: Vec<f64> = raw.iter().map(|w| w / mean).collect();
        let diagnostics = diagnostics_for(&stabilized, 0, None);
        Ok(WeightSet {
            doc_ids,
            raw,
            stabilized,
            method,
            diagnostics,
        })
    }

    /// Records how many classifier posteriors hit the clipping bounds.
    pub fn with_clipped(mut self, clipped: usize) -> WeightSet {
        self.diagnostics.clipped = clipped;
        self
    }

    /// Caps raw weights at their q-th quantile and restabilizes.
    pub fn truncated(&self, q: f64) -> Result<WeightSet> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::invalid(
                "truncate quantile",
                format!("{q} is outside (0, 1]"),
            ));
        }
        let cap = quantile(&self.raw, q);
        let raw: Vec<f64> = self.raw.iter().map(|&w| w.min(cap)).collect();
        let mut set = WeightSet::new(self.doc_ids.clone(), raw, self.method)?;
        set.diagnostics.clipped = self.diagnostics.clipped;
        set.diagnostics.truncated_at = Some(q);
        Ok(set)
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn stabilized(&self) -> &[f64] {
        &self.stabilized
    }

    pub fn method(&self) -> WeightMethod {
        self.method
    }

    pub fn diagnostics(&self) -> &WeightDiagnostics {
        &self.diagnostics
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Writes `doc_id,raw,stabilized` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        writer
            .write_record(["doc_id", "raw", "stabilized"])
            .and_then(|_| {
                for i in 0..self.len() {
                    writer.write_record([
                        self.doc_ids[i].as_str(),
                        &format!("{}", self.raw[i]),
                        &format!("{}", self.stabilized[i]),
                    ])?;
                }
                writer.flush()?;
                Ok(())
            })
            .map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: 0,
                message: e.to_string(),
            })
    }

    /// Reads weights written by `write_csv`. The weights are taken as given,
    /// so the method is reported as `exact`.
    pub fn read_csv(path: &Path) -> Result<WeightSet> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| parse_err(0, e.to_string()))?;
        let headers = reader
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        let expected = ["doc_id", "raw", "stabilized"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(parse_err(
                1,
                format!("header must be doc_id,raw,stabilized, got {headers:?}"),
            ));
        }
        let mut ids = Vec::new();
        let mut raw = Vec::new();
        let mut stored = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| parse_err(line, e.to_string()))?;
            if record.len() != 3 {
                return Err(parse_err(line, format!("expected 3 fields, got {}", record.len())));
            }
            ids.push(record[0].to_string());
            raw.push(
                record[1]
                    .parse::<f64>()
                    .map_err(|e| parse_err(line, format!("raw weight: {e}")))?,
            );
            stored.push(
                record[2]
                    .parse::<f64>()
                    .map_err(|e| parse_err(line, format!("stabilized weight: {e}")))?,
            );
        }
        let set = WeightSet::new(ids, raw, WeightMethod::Exact)?;
        for (i, (&got, &expect)) in stored.iter().zip(&set.stabilized).enumerate() {
            if (got - expect).abs() > 1e-9 * expect.abs().max(1.0) {
                return Err(parse_err(
                    i + 2,
                    format!("stabilized weight {got} does not match raw column (expected {expect})"),
                ));
            }
        }
        Ok(set)
    }
}

fn diagnostics_for(stabilized: &[f64], clipped: usize, truncated_at: Option<f64>) -> WeightDiagnostics {
    let min = stabilized.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = stabilized.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    WeightDiagnostics {
        min,
        max,
        median: median(stabilized),
        effective_sample_size: effective_sample_size(stabilized),
        clipped,
        truncated_at,
    }
}
