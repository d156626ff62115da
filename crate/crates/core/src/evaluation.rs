//! The validation protocol: split, estimate weights, transport, compare
//! against the unweighted source mean, the target mean, and a naive
//! pseudo-labeling baseline, and report weight diagnostics.

use serde::{Deserialize, Serialize};

use crate::attributes::{FeatureMap, FeatureSpec, Lexicon};
use crate::corpus::{split_corpus, Corpus, Document, SplitSpec};
use crate::density_ratio::{
    clf_weights, fit_ngram_lm, lm_weights, train_ratio_classifier, SentenceScorer,
    WeightDiagnostics, WeightMethod, WeightSet,
};
use crate::error::{Error, Result};
use crate::estimator::{
    aligned_responses, bootstrap_replicates, hajek_mean, normal_ci, unweighted_mean, CiSpec,
    EstimatorKind, TransportedMean,
};
use crate::stats::{derive_seed, fingerprint_bytes, sample_sd, sample_variance};

/// Weight sets whose effective sample size falls below this share of n get
/// a red flag: the target is likely not absolutely continuous in practice.
pub const LOW_ESS_FRACTION: f64 = 0.05;

const EXCERPT_CHARS: usize = 200;

/// Ridge-regularized linear regression over a feature spec; the response
/// predictor behind the naive baseline.
#[derive(Debug, Clone)]
pub struct NaiveModel {
    intercept: f64,
    beta: Vec<f64>,
    map: FeatureMap,
}

const NAIVE_RIDGE: f64 = 1e-6;

impl NaiveModel {
    /// Least squares with ridge penalty 1e-6 (intercept unpenalized) on the
    /// training corpus responses.
    pub fn fit(train: &Corpus, spec: &FeatureSpec, lexicon: Option<&Lexicon>) -> Result<NaiveModel> {
        let map = FeatureMap::fit(spec, train.docs(), lexicon)?;
        let y = train.responses()?;
        let rows = map.apply(train)?;
        let d = map.width() + 1;
        let mut xtx = vec![0.0; d * d];
        let mut xty = vec![0.0; d];
        for (row, &yi) in rows.iter().zip(&y) {
            let z = |j: usize| if j == 0 { 1.0 } else { row[j - 1] };
            for j in 0..d {
                xty[j] += z(j) * yi;
                for k in j..d {
                    xtx[j * d + k] += z(j) * z(k);
                }
            }
        }
        for j in 1..d {
            xtx[j * d + j] += NAIVE_RIDGE;
        }
        for j in 0..d {
            for k in 0..j {
                xtx[j * d + k] = xtx[k * d + j];
            }
        }
        let coef = crate::stats::solve_spd(&xtx, &xty, d).ok_or(Error::SingularDesign)?;
        Ok(NaiveModel {
            intercept: coef[0],
            beta: coef[1..].to_vec(),
            map,
        })
    }

    pub fn predict_doc(&self, doc: &Document) -> Result<f64> {
        let row = self.map.apply_doc(doc)?;
        Ok(self.intercept + self.beta.iter().zip(&row).map(|(b, x)| b * x).sum::<f64>())
    }

    /// Pseudo-labels for every document, in corpus order.
    pub fn predict(&self, corpus: &Corpus) -> Result<Vec<f64>> {
        corpus.docs().iter().map(|d| self.predict_doc(d)).collect()
    }
}

/// The naive baseline value with its bootstrap spread.
#[derive(Debug, Clone)]
pub struct NaiveEstimate {
    pub estimate: f64,
    pub variance: f64,
    pub normal_ci: (f64, f64),
    pub bootstrap_ci: (f64, f64),
    pub n: usize,
    pub replicates: Vec<f64>,
}

/// Fits the naive model on source responses, averages its pseudo-labels on
/// the target, and bootstraps over target resamples.
pub fn naive_estimate(
    train_r: &Corpus,
    target_docs: &Corpus,
    spec: &FeatureSpec,
    lexicon: Option<&Lexicon>,
    ci: &CiSpec,
) -> Result<NaiveEstimate> {
    ci.validate()?;
    let model = NaiveModel::fit(train_r, spec, lexicon)?;
    let preds = model.predict(target_docs)?;
    let estimate = preds.iter().sum::<f64>() / preds.len() as f64;
    let unit = vec![1.0; preds.len()];
    let replicates =
        bootstrap_replicates(&unit, &preds, EstimatorKind::Hajek, ci.bootstrap_b, ci.seed);
    let variance = if replicates.len() > 1 {
        sample_variance(&replicates)
    } else {
        0.0
    };
    let z = crate::stats::standard_normal_quantile(1.0 - ci.alpha / 2.0);
    let half = z * variance.sqrt();
    let bootstrap_ci = (
        crate::stats::quantile(&replicates, ci.alpha / 2.0),
        crate::stats::quantile(&replicates, 1.0 - ci.alpha / 2.0),
    );
    Ok(NaiveEstimate {
        estimate,
        variance,
        normal_ci: (estimate - half, estimate + half),
        bootstrap_ci,
        n: preds.len(),
        replicates,
    })
}

/// sqrt(mean((replicate − reference)²)) / sample SD of target responses.
pub fn normalized_rmse(
    replicate_estimates: &[f64],
    target_reference: f64,
    target_responses: &[f64],
) -> Result<f64> {
    if replicate_estimates.is_empty() {
        return Err(Error::invalid("replicates", "need at least one replicate"));
    }
    if target_responses.len() < 2 {
        return Err(Error::invalid(
            "target responses",
            "need at least two responses for a standard deviation",
        ));
    }
    let sd = sample_sd(target_responses);
    if sd <= 0.0 {
        return Err(Error::ZeroTargetSd);
    }
    let mse = replicate_estimates
        .iter()
        .map(|r| {
            let d = r - target_reference;
            d * d
        })
        .sum::<f64>()
        / replicate_estimates.len() as f64;
    Ok(mse.sqrt() / sd)
}

/// One row of the highest-weight listing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopWeightedEntry {
    pub doc_id: String,
    pub excerpt: String,
    pub stabilized_weight: f64,
}

/// The k highest stabilized weights with document excerpts, descending,
/// ties broken by doc id.
pub fn top_weighted_texts(
    weights: &WeightSet,
    docs: &Corpus,
    k: usize,
) -> Result<Vec<TopWeightedEntry>> {
    if k == 0 {
        return Err(Error::invalid("k", "must be positive"));
    }
    if k > weights.len() {
        return Err(Error::invalid(
            "k",
            format!("{k} exceeds the {} available documents", weights.len()),
        ));
    }
    if weights.len() != docs.len() {
        return Err(Error::LengthMismatch {
            weights: weights.len(),
            responses: docs.len(),
        });
    }
    for (id, doc) in weights.doc_ids().iter().zip(docs.docs()) {
        if *id != doc.id {
            return Err(Error::invalid(
                "alignment",
                format!("weights are for document '{id}' where the corpus has '{}'", doc.id),
            ));
        }
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    let stabilized = weights.stabilized();
    let ids = weights.doc_ids();
    order.sort_by(|&a, &b| {
        stabilized[b]
            .total_cmp(&stabilized[a])
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    Ok(order[..k]
        .iter()
        .map(|&i| TopWeightedEntry {
            doc_id: ids[i].clone(),
            excerpt: excerpt(&docs.docs()[i].text),
            stabilized_weight: stabilized[i],
        })
        .collect())
}

fn excerpt(text: &str) -> String {
    if text.chars().count() <= EXCERPT_CHARS {
        return text.to_string();
    }
    let mut out: String = text.chars().take(EXCERPT_CHARS - 1).collect();
    out.push('…');
    out
}

/// How the weights are estimated inside `evaluate_transport`.
pub enum WeightBackend<'a> {
    /// Source-vs-target logistic classifier on the feature spec.
    Classifier,
    /// Builtin n-gram models fit on the two training splits.
    BuiltinLm { order: usize, alpha: f64 },
    /// External scorers, one per distribution.
    Provider {
        source: &'a dyn SentenceScorer,
        target: &'a dyn SentenceScorer,
    },
}

impl WeightBackend<'_> {
    pub fn method(&self) -> WeightMethod {
        match self {
            WeightBackend::Classifier => WeightMethod::Clf,
            _ => WeightMethod::Lm,
        }
    }

    fn describe(&self) -> Option<String> {
        match self {
            WeightBackend::Classifier => None,
            WeightBackend::BuiltinLm { order, alpha } => {
                Some(format!("ngram(order={order}, alpha={alpha})"))
            }
            WeightBackend::Provider { .. } => Some("provider".to_string()),
        }
    }
}

/// Settings for one evaluation run; everything here enters the config
/// fingerprint.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub feature_spec: FeatureSpec,
    pub train_fraction: f64,
    pub alpha: f64,
    pub bootstrap_b: usize,
    pub truncate_quantile: Option<f64>,
    pub seed: u64,
    pub top_k: usize,
}

impl EvalConfig {
    pub fn new(feature_spec: FeatureSpec) -> EvalConfig {
        EvalConfig {
            feature_spec,
            train_fraction: 0.1,
            alpha: 0.05,
            bootstrap_b: 100,
            truncate_quantile: None,
            seed: 0,
            top_k: 10,
        }
    }
}

/// An estimate as reported: point value, variance, both intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedEstimate {
    pub estimate: f64,
    pub variance: f64,
    pub normal_ci: (f64, f64),
    pub bootstrap_ci: (f64, f64),
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsReport {
    pub method: WeightMethod,
    pub n: usize,
    pub diagnostics: WeightDiagnostics,
    pub low_effective_sample_size: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NrmseReport {
    pub transport: f64,
    pub naive: f64,
    pub convention: String,
}

/// Echo of every result-affecting setting, plus its fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub method: WeightMethod,
    pub lm_backend: Option<String>,
    pub feature_spec: String,
    pub train_fraction: f64,
    pub alpha: f64,
    pub bootstrap_b: usize,
    pub truncate_quantile: Option<f64>,
    pub seed: u64,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(rename = "mu_R")]
    pub mu_r: ReportedEstimate,
    #[serde(rename = "mu_T")]
    pub mu_t: Option<ReportedEstimate>,
    pub mu_transported: ReportedEstimate,
    pub naive: ReportedEstimate,
    pub nrmse: Option<NrmseReport>,
    pub weights: WeightsReport,
    pub top_weighted: Vec<TopWeightedEntry>,
    pub config: ConfigReport,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(json: &str) -> Result<EvalReport> {
        serde_json::from_str(json).map_err(|e| Error::Parse {
            path: "report".to_string(),
            line: 0,
            message: e.to_string(),
        })
    }

    /// Plain-text summary table.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let row = |name: &str, e: &ReportedEstimate| {
            format!(
                "{name:<14} {:>12.6}  [{:.6}, {:.6}]  n={}\n",
                e.estimate, e.bootstrap_ci.0, e.bootstrap_ci.1, e.n
            )
        };
        out.push_str(&row("mu_R", &self.mu_r));
        if let Some(mu_t) = &self.mu_t {
            out.push_str(&row("mu_T", mu_t));
        }
        out.push_str(&row("mu_R->T", &self.mu_transported));
        out.push_str(&row("naive", &self.naive));
        if let Some(nrmse) = &self.nrmse {
            out.push_str(&format!(
                "nRMSE          transport {:.6}  naive {:.6}\n",
                nrmse.transport, nrmse.naive
            ));
        }
        let d = &self.weights.diagnostics;
        out.push_str(&format!(
            "weights        method {}  ess {:.1}/{}  median {:.4}  max {:.4}{}\n",
            self.weights.method,
            d.effective_sample_size,
            self.weights.n,
            d.median,
            d.max,
            if self.weights.low_effective_sample_size {
                "  [LOW ESS: absolute continuity suspect]"
            } else {
                ""
            }
        ));
        out.push_str(&format!("config         fingerprint {}\n", self.config.fingerprint));
        out
    }
}

fn reported(mean: &TransportedMean, alpha: f64, replicates: &[f64]) -> Result<ReportedEstimate> {
    let spec = CiSpec {
        alpha,
        ..CiSpec::default()
    };
    Ok(ReportedEstimate {
        estimate: mean.estimate,
        variance: mean.variance,
        normal_ci: normal_ci(mean, &spec)?,
        bootstrap_ci: (
            crate::stats::quantile(replicates, alpha / 2.0),
            crate::stats::quantile(replicates, 1.0 - alpha / 2.0),
        ),
        n: mean.n,
    })
}

/// Runs the full protocol: split both corpora, estimate weights on the
/// source estimation split, transport, baseline, nRMSE (when the target
/// has responses), diagnostics, report.
pub fn evaluate_transport(
    source: &Corpus,
    target: &Corpus,
    backend: WeightBackend<'_>,
    config: &EvalConfig,
    lexicon: Option<&Lexicon>,
) -> Result<EvalReport> {
    let seed = config.seed;
    let (train_r, est_r) = split_corpus(
        source,
        &SplitSpec::new(config.train_fraction, derive_seed(seed, "split-source"))?,
    )?;
    let (train_t, est_t) = split_corpus(
        target,
        &SplitSpec::new(config.train_fraction, derive_seed(seed, "split-target"))?,
    )?;

    let weights = match &backend {
        WeightBackend::Classifier => {
            let model = train_ratio_classifier(&train_r, &train_t, &config.feature_spec, lexicon)?;
            clf_weights(&model, &est_r)?
        }
        WeightBackend::BuiltinLm { order, alpha } => {
            let lm_r = fit_ngram_lm(&train_r, *order, *alpha)?;
            let lm_t = fit_ngram_lm(&train_t, *order, *alpha)?;
            lm_weights(&lm_r, &lm_t, &est_r)?
        }
        WeightBackend::Provider { source, target } => lm_weights(*source, *target, &est_r)?,
    };
    let weights = match config.truncate_quantile {
        Some(q) => weights.truncated(q)?,
        None => weights,
    };

    let y_r = aligned_responses(&weights, &est_r)?;
    let transported = hajek_mean(&weights, &y_r)?;
    let transport_replicates = bootstrap_replicates(
        weights.raw(),
        &y_r,
        EstimatorKind::Hajek,
        config.bootstrap_b,
        derive_seed(seed, "bootstrap-transport"),
    );
    let mu_transported = reported(&transported, config.alpha, &transport_replicates)?;

    let source_mean = unweighted_mean(&y_r)?;
    let unit_r = vec![1.0; y_r.len()];
    let source_replicates = bootstrap_replicates(
        &unit_r,
        &y_r,
        EstimatorKind::Hajek,
        config.bootstrap_b,
        derive_seed(seed, "bootstrap-source"),
    );
    let mu_r = reported(&source_mean, config.alpha, &source_replicates)?;

    let y_t: Option<Vec<f64>> = if est_t.docs().iter().all(|d| d.response.is_some()) {
        Some(est_t.responses()?)
    } else {
        None
    };
    let mu_t = match &y_t {
        Some(y) => {
            let mean = unweighted_mean(y)?;
            let unit = vec![1.0; y.len()];
            let replicates = bootstrap_replicates(
                &unit,
                y,
                EstimatorKind::Hajek,
                config.bootstrap_b,
                derive_seed(seed, "bootstrap-target"),
            );
            Some(reported(&mean, config.alpha, &replicates)?)
        }
        None => None,
    };

    let ci_naive = CiSpec {
        alpha: config.alpha,
        bootstrap_b: config.bootstrap_b,
        seed: derive_seed(seed, "bootstrap-naive"),
    };
    let naive = naive_estimate(&est_r, &est_t, &config.feature_spec, lexicon, &ci_naive)?;

    let nrmse = match (&y_t, &mu_t) {
        (Some(y), Some(mu)) => Some(NrmseReport {
            transport: normalized_rmse(&transport_replicates, mu.estimate, y)?,
            naive: normalized_rmse(&naive.replicates, mu.estimate, y)?,
            convention: "rmse of bootstrap replicate estimates against the target point estimate, \
                         over the target response sd"
                .to_string(),
        }),
        _ => None,
    };

    let diagnostics = weights.diagnostics().clone();
    let low_ess = diagnostics.effective_sample_size < LOW_ESS_FRACTION * weights.len() as f64;
    let top_weighted = top_weighted_texts(&weights, &est_r, config.top_k.min(weights.len()))?;

    let mut config_report = ConfigReport {
        method: backend.method(),
        lm_backend: backend.describe(),
        feature_spec: config.feature_spec.describe(),
        train_fraction: config.train_fraction,
        alpha: config.alpha,
        bootstrap_b: config.bootstrap_b,
        truncate_quantile: config.truncate_quantile,
        seed,
        fingerprint: String::new(),
    };
    config_report.fingerprint = fingerprint_config(&config_report)?;

    Ok(EvalReport {
        mu_r,
        mu_t,
        mu_transported,
        naive: ReportedEstimate {
            estimate: naive.estimate,
            variance: naive.variance,
            normal_ci: naive.normal_ci,
            bootstrap_ci: naive.bootstrap_ci,
            n: naive.n,
        },
        nrmse,
        weights: WeightsReport {
            method: weights.method(),
            n: weights.len(),
            diagnostics,
            low_effective_sample_size: low_ess,
        },
        top_weighted,
        config: config_report,
    })
}

/// FNV-1a over the canonical JSON of the config with a blank fingerprint.
pub fn fingerprint_config(config: &ConfigReport) -> Result<String> {
    let mut blanked = config.clone();
    blanked.fingerprint = String::new();
    let json = serde_json::to_string(&blanked).map_err(|e| Error::Parse {
        path: "config".to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    Ok(fingerprint_bytes(json.as_bytes()))
}
