//! Density-ratio estimation via a source-vs-target classifier: the posterior
//! odds times the training prior ratio recover dP_T/dP_R.

use crate::attributes::{FeatureMap, FeatureSpec, Lexicon};
use crate::corpus::Corpus;
use crate::density_ratio::{WeightMethod, WeightSet};
use crate::error::{Error, Result};
use crate::stats::solve_spd;

/// Posteriors are clipped to [ε, 1−ε] before the odds ratio.
pub const POSTERIOR_EPS: f64 = 1e-6;

const RIDGE: f64 = 1.0;
const GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 10_000;

/// L2-regularized logistic source-vs-target classifier over standardized
/// features, trained by Newton's method with backtracking.
#[derive(Debug, Clone)]
pub struct RatioClassifier {
    intercept: f64,
    beta: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
    map: FeatureMap,
    spec: FeatureSpec,
    n_r: usize,
    n_t: usize,
    iterations: usize,
}

impl RatioClassifier {
    pub fn feature_spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn training_counts(&self) -> (usize, usize) {
        (self.n_r, self.n_t)
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// P(C = target | features), for an unstandardized feature row.
    pub fn posterior(&self, features: &[f64]) -> f64 {
        let mut eta = self.intercept;
        for j in 0..self.beta.len() {
            eta += self.beta[j] * (features[j] - self.means[j]) / self.sds[j];
        }
        sigmoid(eta)
    }

    /// Posteriors for every document, in corpus order.
    pub fn posteriors(&self, docs: &Corpus) -> Result<Vec<f64>> {
        let rows = self.map.apply(docs)?;
        Ok(rows.iter().map(|row| self.posterior(row)).collect())
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(-|eta|)) resolved against the label, stable for large |eta|.
fn log_loss(eta: f64, label: f64) -> f64 {
    // -[y log p + (1-y) log(1-p)] = log(1+exp(eta)) - y*eta
    let softplus = if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    };
    softplus - label * eta
}

/// Trains the classifier on the two corpora (labels: source 0, target 1),
/// minimizing the summed log loss plus (1/2)·‖β‖² over standardized
/// features, to gradient norm 1e-8.
pub fn train_ratio_classifier(
    train_r: &Corpus,
    train_t: &Corpus,
    spec: &FeatureSpec,
    lexicon: Option<&Lexicon>,
) -> Result<RatioClassifier> {
    let combined: Vec<_> = train_r.docs().iter().chain(train_t.docs()).collect();
    let map = FeatureMap::fit(spec, combined.iter().copied(), lexicon)?;
    let mut rows = Vec::with_capacity(combined.len());
    for doc in &combined {
        rows.push(map.apply_doc(doc)?);
    }
    let labels: Vec<f64> = std::iter::repeat(0.0)
        .take(train_r.len())
        .chain(std::iter::repeat(1.0).take(train_t.len()))
        .collect();
    if labels.iter().all(|&l| l == 0.0) || labels.iter().all(|&l| l == 1.0) {
        return Err(Error::SingleClass);
    }

    let d = map.width();
    let n = rows.len();
    let mut means = vec![0.0; d];
    let mut sds = vec![0.0; d];
    for row in &rows {
        for j in 0..d {
            means[j] += row[j];
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    for row in &rows {
        for j in 0..d {
            let c = row[j] - means[j];
            sds[j] += c * c;
        }
    }
    for s in &mut sds {
        *s = (*s / n as f64).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    for row in &mut rows {
        for j in 0..d {
            row[j] = (row[j] - means[j]) / sds[j];
        }
    }

    let (coef, iterations) = newton_logistic(&rows, &labels)?;
    Ok(RatioClassifier {
        intercept: coef[0],
        beta: coef[1..].to_vec(),
        means,
        sds,
        map,
        spec: spec.clone(),
        n_r: train_r.len(),
        n_t: train_t.len(),
        iterations,
    })
}

/// Newton iterations on [intercept | β]; the intercept is unpenalized.
fn newton_logistic(rows: &[Vec<f64>], labels: &[f64]) -> Result<(Vec<f64>, usize)> {
    let n = rows.len();
    let d = rows[0].len() + 1;
    let z = |i: usize, j: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            rows[i][j - 1]
        }
    };
    let objective = |coef: &[f64]| -> f64 {
        let mut total = 0.0;
        for i in 0..n {
            let eta: f64 = (0..d).map(|j| coef[j] * z(i, j)).sum();
            total += log_loss(eta, labels[i]);
        }
        for &b in &coef[1..] {
            total += 0.5 * RIDGE * b * b;
        }
        total
    };

    let mut coef = vec![0.0; d];
    let mut value = objective(&coef);
    for iter in 0..MAX_ITER {
        let mut grad = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        for i in 0..n {
            let eta: f64 = (0..d).map(|j| coef[j] * z(i, j)).sum();
            let p = sigmoid(eta);
            let resid = p - labels[i];
            let w = (p * (1.0 - p)).max(1e-12);
            for j in 0..d {
                grad[j] += resid * z(i, j);
                for k in j..d {
                    hess[j * d + k] += w * z(i, j) * z(i, k);
                }
            }
        }
        for j in 1..d {
            grad[j] += RIDGE * coef[j];
            hess[j * d + j] += RIDGE;
        }
        for j in 0..d {
            for k in 0..j {
                hess[j * d + k] = hess[k * d + j];
            }
        }
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm <= GRAD_TOL {
            return Ok((coef, iter));
        }
        let step = solve_spd(&hess, &grad, d).ok_or(Error::SingularDesign)?;
        let slope: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
        // A predicted decrease below the objective's float resolution cannot
        // be measured by backtracking; it only happens deep in the quadratic
        // phase, where the full Newton step is the right move.
        if slope <= 1e-12 * value.abs() {
            coef = coef.iter().zip(&step).map(|(c, s)| c - s).collect();
            value = objective(&coef);
            continue;
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t >= 1e-12 {
            let trial: Vec<f64> = coef.iter().zip(&step).map(|(c, s)| c - t * s).collect();
            let trial_value = objective(&trial);
            if trial_value <= value - 1e-4 * t * slope {
                coef = trial;
                value = trial_value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            coef = coef.iter().zip(&step).map(|(c, s)| c - s).collect();
            value = objective(&coef);
        }
    }

    let mut grad = vec![0.0; d];
    for i in 0..n {
        let eta: f64 = (0..d).map(|j| coef[j] * z(i, j)).sum();
        let p = sigmoid(eta);
        for j in 0..d {
            grad[j] += (p - labels[i]) * z(i, j);
        }
    }
    for j in 1..d {
        grad[j] += RIDGE * coef[j];
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITER,
        gradient_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
    })
}

/// Odds ratio times the training prior ratio, with posterior clipping.
/// Returns the raw weight and whether clipping fired.
pub fn raw_weight_from_posterior(p: f64, n_r: usize, n_t: usize) -> (f64, bool) {
    let clipped = !(POSTERIOR_EPS..=1.0 - POSTERIOR_EPS).contains(&p);
    let p = p.clamp(POSTERIOR_EPS, 1.0 - POSTERIOR_EPS);
    let w = p / (1.0 - p) * (n_r as f64 / n_t as f64);
    (w, clipped)
}

/// Importance weights for an estimation corpus under a trained classifier.
pub fn clf_weights(model: &RatioClassifier, docs: &Corpus) -> Result<WeightSet> {
    let posteriors = model.posteriors(docs)?;
    let mut raw = Vec::with_capacity(posteriors.len());
    let mut clipped = 0;
    for p in posteriors {
        let (w, hit) = raw_weight_from_posterior(p, model.n_r, model.n_t);
        if hit {
            clipped += 1;
        }
        raw.push(w);
    }
    let ids = docs.docs().iter().map(|d| d.id.clone()).collect();
    Ok(WeightSet::new(ids, raw, WeightMethod::Clf)?.with_clipped(clipped))
}
