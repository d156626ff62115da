//! Corpus loading, writing and seeded splitting.
//!
//! The canonical on-disk format is JSON Lines, one document per line:
//! `{"id": str, "text": str, "response"?: number, "attributes"?: {name: 0|1},
//! "features"?: [number]}`. CSV with columns `id,text[,response]` is also
//! accepted for ingestion.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attributes: Option<BTreeMap<String, u8>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            response: None,
            attributes: None,
            features: None,
        }
    }

    pub fn with_response(mut self, response: f64) -> Self {
        self.response = Some(response);
        self
    }

    pub fn attribute(&self, name: &str) -> Option<u8> {
        self.attributes.as_ref().and_then(|a| a.get(name).copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    name: String,
    role: Role,
    docs: Vec<Document>,
}

impl Corpus {
    /// Validates: nonempty, unique nonempty ids, binary attribute values,
    /// finite responses, and a consistent feature dimension.
    pub fn new(name: impl Into<String>, role: Role, docs: Vec<Document>) -> Result<Self> {
        let name = name.into();
        if docs.is_empty() {
            return Err(Error::EmptyCorpus { name });
        }
        let mut seen = HashSet::new();
        let mut feature_dim = None;
        for doc in &docs {
            if doc.id.is_empty() {
                return Err(Error::invalid("document id", "must be nonempty"));
            }
            if !seen.insert(doc.id.clone()) {
                return Err(Error::DuplicateId { id: doc.id.clone() });
            }
            if let Some(r) = doc.response {
                if !r.is_finite() {
                    return Err(Error::NonFiniteResponse { id: doc.id.clone() });
                }
            }
            if let Some(attrs) = &doc.attributes {
                for (k, &v) in attrs {
                    if v > 1 {
                        return Err(Error::NonBinaryAttribute {
                            id: doc.id.clone(),
                            attribute: k.clone(),
                            value: v as f64,
                        });
                    }
                }
            }
            if let Some(f) = &doc.features {
                match feature_dim {
                    None => feature_dim = Some(f.len()),
                    Some(d) if d != f.len() => {
                        return Err(Error::FeatureDimMismatch {
                            id: doc.id.clone(),
                            got: f.len(),
                            expected: d,
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(Corpus { name, role, docs })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Responses in document order; errors if any are missing.
    pub fn responses(&self) -> Result<Vec<f64>> {
        self.docs
            .iter()
            .map(|d| {
                d.response.ok_or_else(|| Error::MissingResponse {
                    id: d.id.clone(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

/// Loads a corpus, inferring the format from the file extension
/// (`.jsonl`/`.ndjson` or `.csv`).
pub fn load_corpus(path: &Path, role: Role) -> Result<Corpus> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("ndjson") => CorpusFormat::Jsonl,
        Some("csv") => CorpusFormat::Csv,
        other => {
            return Err(Error::invalid(
                "corpus path",
                format!(
                    "cannot infer format from extension {:?}; expected .jsonl, .ndjson or .csv",
                    other.unwrap_or("")
                ),
            ))
        }
    };
    load_corpus_as(path, role, format)
}

pub fn load_corpus_as(path: &Path, role: Role, format: CorpusFormat) -> Result<Corpus> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let docs = match format {
        CorpusFormat::Jsonl => parse_jsonl(path, BufReader::new(file))?,
        CorpusFormat::Csv => parse_csv(path, file)?,
    };
    Corpus::new(name, role, docs)
}

#[derive(Deserialize)]
struct RawDocument {
    id: String,
    text: String,
    #[serde(default)]
    response: Option<f64>,
    #[serde(default)]
    attributes: Option<BTreeMap<String, serde_json::Value>>,
    #[serde(default)]
    features: Option<Vec<f64>>,
}

fn parse_jsonl(path: &Path, reader: impl BufRead) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        let attributes = match raw.attributes {
            None => None,
            Some(values) => {
                let mut out = BTreeMap::new();
                for (k, v) in values {
                    let num = v.as_f64().unwrap_or(f64::NAN);
                    if num == 0.0 || num == 1.0 {
                        out.insert(k, num as u8);
                    } else {
                        return Err(Error::NonBinaryAttribute {
                            id: raw.id,
                            attribute: k,
                            value: num,
                        });
                    }
                }
                Some(out)
            }
        };
        docs.push(Document {
            id: raw.id,
            text: raw.text,
            response: raw.response,
            attributes,
            features: raw.features,
        });
    }
    Ok(docs)
}

fn parse_csv(path: &Path, file: File) -> Result<Vec<Document>> {
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    let valid = cols == ["id", "text"] || cols == ["id", "text", "response"];
    if !valid {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: format!("expected header id,text[,response], got {}", cols.join(",")),
        });
    }
    let has_response = cols.len() == 3;
    let mut docs = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: idx + 2,
            message: e.to_string(),
        })?;
        let id = record.get(0).unwrap_or("").to_string();
        let text = record.get(1).unwrap_or("").to_string();
        let response = if has_response {
            let field = record.get(2).unwrap_or("");
            if field.is_empty() {
                None
            } else {
                let value: f64 = field.parse().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 2,
                    message: format!("response '{field}' is not a number"),
                })?;
                Some(value)
            }
        } else {
            None
        };
        docs.push(Document {
            id,
            text,
            response,
            attributes: None,
            features: None,
        });
    }
    Ok(docs)
}

/// Writes a corpus as JSON Lines in document order.
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for doc in corpus.docs() {
        serde_json::to_writer(&mut w, doc)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    train_fraction: f64,
    seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::invalid(
                "train_fraction",
                format!("{train_fraction} is not in (0, 1)"),
            ));
        }
        Ok(SplitSpec {
            train_fraction,
            seed,
        })
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Disjoint (train, estimation) split by seeded shuffle without replacement.
/// |train| = round(train_fraction * n), clamped so both parts are nonempty;
/// each part preserves the original document order.
pub fn split_corpus(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus)> {
    let n = corpus.len();
    if n < 2 {
        return Err(Error::CorpusTooSmall {
            name: corpus.name().to_string(),
            n,
        });
    }
    let k = ((spec.train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    indices.shuffle(&mut rng);
    let mut train_idx = indices[..k].to_vec();
    let mut est_idx = indices[k..].to_vec();
    train_idx.sort_unstable();
    est_idx.sort_unstable();
    let pick = |idx: &[usize]| idx.iter().map(|&i| corpus.docs()[i].clone()).collect();
    let train = Corpus::new(format!("{}-train", corpus.name()), corpus.role(), pick(&train_idx))?;
    let est = Corpus::new(format!("{}-est", corpus.name()), corpus.role(), pick(&est_idx))?;
    Ok((train, est))
}
