//! Synthetic corpora over a finite text space with exact source and target
//! distributions. Every estimand (means, effects, density ratios) is
//! enumerable, which gives the test suites a brute-force oracle.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attributes::Lexicon;
use crate::corpus::{Corpus, Document, Role};
use crate::density_ratio::{WeightMethod, WeightSet};
use crate::error::{Error, Result};
use crate::stats::derive_rng;

/// Attribute name attached to sampled documents.
pub const ATTRIBUTE: &str = "a";

const MAX_TEXTS: usize = 1024;

/// A finite text space: texts x_1..x_K with source mass p_R, target mass
/// p_T, deterministic response y(x) and a binary attribute a(x). Every text
/// has p_R > 0, so the target is absolutely continuous with respect to the
/// source by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpace {
    texts: Vec<String>,
    p_r: Vec<f64>,
    p_t: Vec<f64>,
    y: Vec<f64>,
    a: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    texts: Vec<String>,
    #[serde(rename = "p_R")]
    p_r: Vec<f64>,
    #[serde(rename = "p_T")]
    p_t: Vec<f64>,
    y: Vec<f64>,
    a: Vec<u8>,
}

/// Enumerated ground truth for a space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticTruth {
    #[serde(rename = "mu_R")]
    pub mu_r: f64,
    #[serde(rename = "mu_T")]
    pub mu_t: f64,
    #[serde(rename = "tau_R")]
    pub tau_r: f64,
    #[serde(rename = "tau_T")]
    pub tau_t: f64,
    pub true_ratio: Vec<f64>,
}

impl SyntheticSpace {
    pub fn new(
        texts: Vec<String>,
        p_r: Vec<f64>,
        p_t: Vec<f64>,
        y: Vec<f64>,
        a: Vec<u8>,
    ) -> Result<SyntheticSpace> {
        let k = texts.len();
        if k < 2 || k > MAX_TEXTS {
            return Err(Error::invalid(
                "texts",
                format!("space must hold 2..={MAX_TEXTS} texts, got {k}"),
            ));
        }
        if p_r.len() != k || p_t.len() != k || y.len() != k || a.len() != k {
            return Err(Error::invalid("space", "texts, p_R, p_T, y, a must have equal length"));
        }
        let mut seen = std::collections::HashSet::new();
        for t in &texts {
            if t.is_empty() {
                return Err(Error::invalid("texts", "texts must be nonempty"));
            }
            if !seen.insert(t.as_str()) {
                return Err(Error::invalid("texts", format!("duplicate text '{t}'")));
            }
        }
        for (i, &p) in p_r.iter().enumerate() {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::invalid(
                    "p_R",
                    format!("p_R[{i}] = {p}; every text needs positive source mass"),
                ));
            }
        }
        for (i, &p) in p_t.iter().enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::invalid("p_T", format!("p_T[{i}] = {p} is negative")));
            }
        }
        for (name, p) in [("p_R", &p_r), ("p_T", &p_t)] {
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(name, format!("sums to {sum}, not 1")));
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("y", "responses must be finite"));
        }
        if a.iter().any(|&v| v > 1) {
            return Err(Error::invalid("a", "attribute values must be 0 or 1"));
        }
        if !a.contains(&0) || !a.contains(&1) {
            return Err(Error::invalid("a", "both attribute groups must be nonempty"));
        }
        Ok(SyntheticSpace { texts, p_r, p_t, y, a })
    }

    pub fn k(&self) -> usize {
        self.texts.len()
    }

    pub fn texts(&self) -> &[String] {
        &self.texts
    }

    pub fn response(&self, index: usize) -> f64 {
        self.y[index]
    }

    fn mass(&self, role: Role) -> &[f64] {
        match role {
            Role::Source => &self.p_r,
            Role::Target => &self.p_t,
        }
    }

    /// Exact mean response under the chosen distribution.
    pub fn exact_mean(&self, role: Role) -> f64 {
        self.mass(role)
            .iter()
            .zip(&self.y)
            .map(|(p, y)| p * y)
            .sum()
    }

    /// Exact natural effect mu(P_1) - mu(P_0) under the chosen distribution.
    pub fn exact_effect(&self, role: Role) -> Result<f64> {
        let p = self.mass(role);
        let mut mass = [0.0; 2];
        let mut sum = [0.0; 2];
        for i in 0..self.k() {
            let g = self.a[i] as usize;
            mass[g] += p[i];
            sum[g] += p[i] * self.y[i];
        }
        for g in [0u8, 1u8] {
            if mass[g as usize] <= 0.0 {
                return Err(Error::ZeroMassGroup {
                    attribute: ATTRIBUTE.to_string(),
                    group: g,
                });
            }
        }
        Ok(sum[1] / mass[1] - sum[0] / mass[0])
    }

    /// Enumerated truth: means, effects and per-text density ratios.
    pub fn truth(&self) -> Result<SyntheticTruth> {
        Ok(SyntheticTruth {
            mu_r: self.exact_mean(Role::Source),
            mu_t: self.exact_mean(Role::Target),
            tau_r: self.exact_effect(Role::Source)?,
            tau_t: self.exact_effect(Role::Target)?,
            true_ratio: self
                .p_t
                .iter()
                .zip(&self.p_r)
                .map(|(t, r)| t / r)
                .collect(),
        })
    }

    /// Draws n i.i.d. documents. Each carries the text, response y(x),
    /// attribute a(x) and a one-hot text-identity feature vector.
    pub fn sample_corpus(&self, role: Role, n: usize, seed: u64) -> Result<Corpus> {
        if n == 0 {
            return Err(Error::invalid("n", "sample size must be positive"));
        }
        let p = self.mass(role);
        let mut cum = Vec::with_capacity(self.k());
        let mut acc = 0.0;
        for &v in p {
            acc += v;
            cum.push(acc);
        }
        let prefix = match role {
            Role::Source => "r",
            Role::Target => "t",
        };
        let mut rng = derive_rng(seed, 0);
        let mut docs = Vec::with_capacity(n);
        for i in 0..n {
            let u: f64 = rng.random();
            let idx = cum.partition_point(|&c| c <= u).min(self.k() - 1);
            let mut features = vec![0.0; self.k()];
            features[idx] = 1.0;
            docs.push(Document {
                id: format!("{prefix}{i:06}"),
                text: self.texts[idx].clone(),
                response: Some(self.y[idx]),
                attributes: Some(
                    [(ATTRIBUTE.to_string(), self.a[idx])].into_iter().collect(),
                ),
                features: Some(features),
            });
        }
        Corpus::new(format!("synthetic-{prefix}"), role, docs)
    }

    /// Exact importance weights p_T(x)/p_R(x) for each document.
    pub fn true_weights(&self, corpus: &Corpus) -> Result<WeightSet> {
        let index: std::collections::HashMap<&str, usize> = self
            .texts
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let mut ids = Vec::with_capacity(corpus.len());
        let mut raw = Vec::with_capacity(corpus.len());
        for doc in corpus.docs() {
            let i = *index.get(doc.text.as_str()).ok_or_else(|| Error::UnknownText {
                text: doc.text.clone(),
            })?;
            ids.push(doc.id.clone());
            raw.push(self.p_t[i] / self.p_r[i]);
        }
        WeightSet::new(ids, raw, WeightMethod::Exact)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawSpace {
            texts: self.texts.clone(),
            p_r: self.p_r.clone(),
            p_t: self.p_t.clone(),
            y: self.y.clone(),
            a: self.a.clone(),
        })
        .expect("space serializes")
    }

    pub fn from_json(json: &str) -> Result<SyntheticSpace> {
        let raw: RawSpace = serde_json::from_str(json).map_err(|e| Error::Parse {
            path: "space".to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        SyntheticSpace::new(raw.texts, raw.p_r, raw.p_t, raw.y, raw.a)
    }
}

/// Two texts, shifted mass, responses 0 and 4: mu(P_T) enumerates to 3.0.
pub fn two_point() -> SyntheticSpace {
    SyntheticSpace::new(
        vec!["sun".into(), "rain".into()],
        vec![0.5, 0.5],
        vec![0.25, 0.75],
        vec![0.0, 4.0],
        vec![0, 1],
    )
    .expect("two-point space is valid")
}

const CANONICAL_FILLERS: [&str; 16] = [
    "arc", "bay", "cove", "dune", "elm", "fern", "glen", "heath", "isle", "knoll", "loch",
    "mesa", "pine", "reef", "shoal", "tarn",
];

fn canonical(shifted: bool) -> SyntheticSpace {
    // Four cells over two binary token features f1 ("bright") and f2
    // ("loud"), four texts per cell. The target tilts mass multiplicatively
    // by 3 per active feature, so the true log density ratio is additive in
    // (f1, f2) and a linear-logit classifier on those features is exact.
    // Responses carry an interaction (the f1=f2=1 cell sits far above an
    // additive fit), which is what a linear regression on the same features
    // cannot capture.
    let cells = [
        ("plain quiet", 0u8, 0.4, 1.0),
        ("bright quiet", 1u8, 0.2, 3.0),
        ("plain loud", 0u8, 0.2, 3.0),
        ("bright loud", 1u8, 0.2, 14.0),
    ];
    let tilt = [1.0, 3.0, 3.0, 9.0];
    let offsets = [-0.6, -0.2, 0.2, 0.6];
    let mut texts = Vec::new();
    let mut p_r = Vec::new();
    let mut p_t = Vec::new();
    let mut y = Vec::new();
    let mut a = Vec::new();
    for (c, (stem, attr, cell_mass, cell_mean)) in cells.iter().enumerate() {
        for slot in 0..4 {
            texts.push(format!("{stem} {}", CANONICAL_FILLERS[c * 4 + slot]));
            p_r.push(cell_mass / 4.0);
            p_t.push(if shifted { cell_mass / 4.0 * tilt[c] } else { cell_mass / 4.0 });
            y.push(cell_mean + offsets[slot]);
            a.push(*attr);
        }
    }
    let sum_t: f64 = p_t.iter().sum();
    for v in &mut p_t {
        *v /= sum_t;
    }
    SyntheticSpace::new(texts, p_r, p_t, y, a).expect("canonical space is valid")
}

/// K=16 space with a strong covariate shift between source and target.
pub fn canonical_shifted() -> SyntheticSpace {
    canonical(true)
}

/// Same texts and responses, but p_T = p_R (all true weights are 1).
pub fn canonical_no_shift() -> SyntheticSpace {
    canonical(false)
}

/// The two binary token features of the canonical spaces as a lexicon.
pub fn canonical_lexicon() -> Lexicon {
    Lexicon::parse("tone: bright\nvolume: loud\n").expect("canonical lexicon parses")
}

/// K single-token texts with seeded masses; the target tilts each text's
/// mass by a factor in [1/3, 3]. A unigram model is well specified here.
pub fn token_space(k: usize, seed: u64) -> Result<SyntheticSpace> {
    if k < 2 || k > MAX_TEXTS {
        return Err(Error::invalid("k", format!("must be in 2..={MAX_TEXTS}")));
    }
    let mut rng = derive_rng(seed, 0);
    let texts: Vec<String> = (0..k).map(|i| format!("w{i:03}")).collect();
    let base: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..1.5)).collect();
    let sum_r: f64 = base.iter().sum();
    let p_r: Vec<f64> = base.iter().map(|v| v / sum_r).collect();
    let ln3 = 3.0f64.ln();
    let tilted: Vec<f64> = p_r
        .iter()
        .map(|v| v * rng.random_range(-ln3..ln3).exp())
        .collect();
    let sum_t: f64 = tilted.iter().sum();
    let p_t: Vec<f64> = tilted.iter().map(|v| v / sum_t).collect();
    let y: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..5.0)).collect();
    let a: Vec<u8> = (0..k).map(|i| (i % 2) as u8).collect();
    SyntheticSpace::new(texts, p_r, p_t, y, a)
}
