//! Lexicon-based attribute coding and document featurization.
//!
//! Lexicon files hold one category per line, `category: pattern1, pattern2`,
//! with `#` comment lines. A trailing `*` makes a pattern match by prefix;
//! anywhere else it is an error. Matching is on lowercased alphanumeric
//! tokens, so coding is insensitive to case and punctuation.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Pattern {
    Literal(String),
    Prefix(String),
}

impl Pattern {
    fn matches(&self, token: &str) -> bool {
        match self {
            Pattern::Literal(w) => token == w,
            Pattern::Prefix(p) => token.starts_with(p.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    categories: BTreeMap<String, Vec<Pattern>>,
}

impl Lexicon {
    pub fn parse(content: &str) -> Result<Lexicon> {
        let mut categories = BTreeMap::new();
        for (idx, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, patterns) = line.split_once(':').ok_or_else(|| Error::Parse {
                path: "lexicon".to_string(),
                line: idx + 1,
                message: "expected 'category: pattern1, pattern2, ...'".to_string(),
            })?;
            let name = name.trim().to_string();
            if name.is_empty() {
                return Err(Error::Parse {
                    path: "lexicon".to_string(),
                    line: idx + 1,
                    message: "empty category name".to_string(),
                });
            }
            let mut parsed = Vec::new();
            for p in patterns.split(',') {
                let p = p.trim().to_lowercase();
                if p.is_empty() {
                    return Err(Error::MalformedPattern {
                        category: name,
                        pattern: String::new(),
                    });
                }
                let stars = p.matches('*').count();
                if stars == 0 {
                    parsed.push(Pattern::Literal(p));
                } else if stars == 1 && p.ends_with('*') {
                    parsed.push(Pattern::Prefix(p[..p.len() - 1].to_string()));
                } else {
                    return Err(Error::MalformedPattern {
                        category: name,
                        pattern: p,
                    });
                }
            }
            if categories.insert(name.clone(), parsed).is_some() {
                return Err(Error::DuplicateCategory { category: name });
            }
        }
        if categories.is_empty() {
            return Err(Error::EmptyLexicon);
        }
        Ok(Lexicon { categories })
    }

    /// Category names in sorted order.
    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    fn category_matches(&self, patterns: &[Pattern], tokens: &[String]) -> bool {
        tokens
            .iter()
            .any(|t| patterns.iter().any(|p| p.matches(t)))
    }
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Lexicon::parse(&content).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        },
        other => other,
    })
}

/// Binary presence indicators for every lexicon category.
pub type AttributeVector = BTreeMap<String, u8>;

/// Codes one document: 1 when any token matches any pattern of the category.
pub fn code_attributes(doc: &Document, lexicon: &Lexicon) -> AttributeVector {
    let tokens = tokenize(&doc.text);
    lexicon
        .categories
        .iter()
        .map(|(name, patterns)| {
            let hit = lexicon.category_matches(patterns, &tokens);
            (name.clone(), hit as u8)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSpec {
    /// One binary column per lexicon category, in category-name order.
    LexiconBinary,
    /// log(1 + count) of the `vocab_size` most frequent tokens.
    BagOfWords { vocab_size: usize },
    /// Pass through `Document::features` unchanged.
    External,
}

impl FeatureSpec {
    pub fn describe(&self) -> String {
        match self {
            FeatureSpec::LexiconBinary => "lexicon".to_string(),
            FeatureSpec::BagOfWords { vocab_size } => format!("bow({vocab_size})"),
            FeatureSpec::External => "external".to_string(),
        }
    }
}

/// A featurizer fitted on training documents, so the same columns apply to
/// any later corpus (bag-of-words vocabulary is frozen at fit time).
#[derive(Debug, Clone)]
pub struct FeatureMap {
    kind: FeatureMapKind,
}

#[derive(Debug, Clone)]
enum FeatureMapKind {
    Lexicon(Lexicon),
    BagOfWords { vocab: Vec<String>, index: HashMap<String, usize> },
    External { dim: usize },
}

impl FeatureMap {
    pub fn fit<'a>(
        spec: &FeatureSpec,
        docs: impl IntoIterator<Item = &'a Document>,
        lexicon: Option<&Lexicon>,
    ) -> Result<FeatureMap> {
        let kind = match spec {
            FeatureSpec::LexiconBinary => {
                let lexicon = lexicon.ok_or_else(|| {
                    Error::invalid("features", "lexicon features require a lexicon")
                })?;
                FeatureMapKind::Lexicon(lexicon.clone())
            }
            FeatureSpec::BagOfWords { vocab_size } => {
                if *vocab_size == 0 {
                    return Err(Error::invalid("vocab_size", "must be positive"));
                }
                let mut counts: HashMap<String, u64> = HashMap::new();
                for doc in docs {
                    for token in tokenize(&doc.text) {
                        *counts.entry(token).or_insert(0) += 1;
                    }
                }
                if counts.is_empty() {
                    return Err(Error::EmptyVocabulary);
                }
                let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
                ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                ranked.truncate(*vocab_size);
                let vocab: Vec<String> = ranked.into_iter().map(|(t, _)| t).collect();
                let index = vocab
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (t.clone(), i))
                    .collect();
                FeatureMapKind::BagOfWords { vocab, index }
            }
            FeatureSpec::External => {
                let mut dim = None;
                for doc in docs {
                    match &doc.features {
                        Some(f) => {
                            if *dim.get_or_insert(f.len()) != f.len() {
                                return Err(Error::FeatureDimMismatch {
                                    id: doc.id.clone(),
                                    got: f.len(),
                                    expected: dim.unwrap(),
                                });
                            }
                        }
                        None => return Err(Error::MissingFeatures { id: doc.id.clone() }),
                    }
                }
                let dim = dim.ok_or_else(|| Error::invalid("features", "no documents to fit"))?;
                FeatureMapKind::External { dim }
            }
        };
        Ok(FeatureMap { kind })
    }

    pub fn width(&self) -> usize {
        match &self.kind {
            FeatureMapKind::Lexicon(lexicon) => lexicon.len(),
            FeatureMapKind::BagOfWords { vocab, .. } => vocab.len(),
            FeatureMapKind::External { dim } => *dim,
        }
    }

    pub fn apply_doc(&self, doc: &Document) -> Result<Vec<f64>> {
        match &self.kind {
            FeatureMapKind::Lexicon(lexicon) => {
                let coded = code_attributes(doc, lexicon);
                Ok(coded.values().map(|&v| v as f64).collect())
            }
            FeatureMapKind::BagOfWords { vocab, index } => {
                let mut row = vec![0.0f64; vocab.len()];
                for token in tokenize(&doc.text) {
                    if let Some(&i) = index.get(&token) {
                        row[i] += 1.0;
                    }
                }
                for v in &mut row {
                    *v = f64::ln_1p(*v);
                }
                Ok(row)
            }
            FeatureMapKind::External { dim } => match &doc.features {
                Some(f) if f.len() == *dim => Ok(f.clone()),
                Some(f) => Err(Error::FeatureDimMismatch {
                    id: doc.id.clone(),
                    got: f.len(),
                    expected: *dim,
                }),
                None => Err(Error::MissingFeatures { id: doc.id.clone() }),
            },
        }
    }

    pub fn apply(&self, corpus: &Corpus) -> Result<Vec<Vec<f64>>> {
        corpus.docs().iter().map(|d| self.apply_doc(d)).collect()
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            FeatureMapKind::Lexicon(lexicon) => format!("lexicon({})", lexicon.len()),
            FeatureMapKind::BagOfWords { vocab, .. } => format!("bow({})", vocab.len()),
            FeatureMapKind::External { dim } => format!("external({dim})"),
        }
    }
}

/// Fits the spec on the corpus itself and returns one row per document.
pub fn featurize(
    corpus: &Corpus,
    spec: &FeatureSpec,
    lexicon: Option<&Lexicon>,
) -> Result<Vec<Vec<f64>>> {
    FeatureMap::fit(spec, corpus.docs(), lexicon)?.apply(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Role;
    use approx::assert_abs_diff_eq;

    fn lexicon() -> Lexicon {
        Lexicon::parse("posemo: happy, happ*, joy\nnegemo: sad, angr*\n").unwrap()
    }

    #[test]
    fn parses_patterns_and_sorted_categories() {
        let lex = lexicon();
        assert_eq!(lex.len(), 2);
        let cats: Vec<&str> = lex.categories().collect();
        assert_eq!(cats, vec!["negemo", "posemo"]);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let lex = Lexicon::parse("# a comment\n\nposemo: good\n").unwrap();
        assert_eq!(lex.len(), 1);
    }

    #[test]
    fn rejects_malformed_patterns() {
        assert!(matches!(
            Lexicon::parse("posemo: ha*ppy\n"),
            Err(Error::MalformedPattern { .. })
        ));
        assert!(matches!(
            Lexicon::parse("posemo: happy,\n"),
            Err(Error::MalformedPattern { .. })
        ));
        assert!(matches!(
            Lexicon::parse("posemo: hap**\n"),
            Err(Error::MalformedPattern { .. })
        ));
    }

    #[test]
    fn rejects_duplicates_empty_and_unnamed() {
        assert!(matches!(
            Lexicon::parse("posemo: a\nposemo: b\n"),
            Err(Error::DuplicateCategory { .. })
        ));
        assert!(matches!(Lexicon::parse("# only comments\n"), Err(Error::EmptyLexicon)));
        assert!(matches!(Lexicon::parse("no colon here\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn codes_presence_case_and_punctuation_invariant() {
        let lex = lexicon();
        let coded = code_attributes(&Document::new("d", "I am happy"), &lex);
        assert_eq!(coded["posemo"], 1);
        assert_eq!(coded["negemo"], 0);
        let shouty = code_attributes(&Document::new("d", "HAPPY!!!"), &lex);
        assert_eq!(shouty["posemo"], 1);
        assert_eq!(
            code_attributes(&Document::new("d", "happy"), &lex),
            code_attributes(&Document::new("d", "...happy?!"), &lex)
        );
    }

    #[test]
    fn prefix_matches_whole_token_only_from_start() {
        let lex = lexicon();
        let coded = code_attributes(&Document::new("d", "happiness is real"), &lex);
        assert_eq!(coded["posemo"], 1); // happ* matches happiness
        let coded2 = code_attributes(&Document::new("d", "unhappy"), &lex);
        assert_eq!(coded2["posemo"], 0); // prefix does not match inside the token
        let coded3 = code_attributes(&Document::new("d", "angry shouting"), &lex);
        assert_eq!(coded3["negemo"], 1);
    }

    #[test]
    fn empty_text_codes_all_zero() {
        let lex = lexicon();
        let coded = code_attributes(&Document::new("d", ""), &lex);
        assert!(coded.values().all(|&v| v == 0));
        assert_eq!(coded.len(), 2);
    }

    fn corpus(texts: &[&str]) -> Corpus {
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{i}"), *t))
            .collect();
        Corpus::new("c", Role::Source, docs).unwrap()
    }

    #[test]
    fn lexicon_features_follow_sorted_category_order() {
        let lex = lexicon();
        let c = corpus(&["so happy", "sad and angry", "neutral"]);
        let rows = featurize(&c, &FeatureSpec::LexiconBinary, Some(&lex)).unwrap();
        // Columns are [negemo, posemo].
        assert_eq!(rows[0], vec![0.0, 1.0]);
        assert_eq!(rows[1], vec![1.0, 0.0]);
        assert_eq!(rows[2], vec![0.0, 0.0]);
        for (row, doc) in rows.iter().zip(c.docs()) {
            let coded = code_attributes(doc, &lex);
            let expect: Vec<f64> = coded.values().map(|&v| v as f64).collect();
            assert_eq!(row, &expect);
        }
    }

    #[test]
    fn bag_of_words_counts_by_hand() {
        // Frequencies: a=3, b=1, c=1; top 2 with lexicographic tie-break = [a, b].
        let c = corpus(&["a a b", "a c"]);
        let rows = featurize(&c, &FeatureSpec::BagOfWords { vocab_size: 2 }, None).unwrap();
        assert_abs_diff_eq!(rows[0][0], 3.0f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(rows[0][1], 2.0f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(rows[1][0], 2.0f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(rows[1][1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn bag_of_words_vocab_is_frozen_at_fit_time() {
        let train = corpus(&["alpha beta", "alpha gamma"]);
        let map = FeatureMap::fit(&FeatureSpec::BagOfWords { vocab_size: 10 }, train.docs(), None)
            .unwrap();
        assert_eq!(map.width(), 3);
        let unseen = Document::new("x", "delta beta");
        let row = map.apply_doc(&unseen).unwrap();
        // delta is out of vocabulary; only beta registers.
        assert_eq!(row.iter().filter(|&&v| v > 0.0).count(), 1);
    }

    #[test]
    fn external_features_pass_through() {
        let mut d0 = Document::new("d0", "x");
        d0.features = Some(vec![1.0, 2.0]);
        let mut d1 = Document::new("d1", "y");
        d1.features = Some(vec![3.0, 4.0]);
        let c = Corpus::new("c", Role::Source, vec![d0, d1]).unwrap();
        let rows = featurize(&c, &FeatureSpec::External, None).unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn external_requires_features_everywhere() {
        let mut d0 = Document::new("d0", "x");
        d0.features = Some(vec![1.0]);
        let c = Corpus::new("c", Role::Source, vec![d0]).unwrap();
        let map = FeatureMap::fit(&FeatureSpec::External, c.docs(), None).unwrap();
        let bare = Document::new("d1", "y");
        assert!(matches!(map.apply_doc(&bare), Err(Error::MissingFeatures { .. })));
        let plain = corpus(&["just text"]);
        assert!(matches!(
            featurize(&plain, &FeatureSpec::External, None),
            Err(Error::MissingFeatures { .. })
        ));
    }

    #[test]
    fn lexicon_spec_requires_lexicon() {
        let c = corpus(&["text"]);
        assert!(featurize(&c, &FeatureSpec::LexiconBinary, None).is_err());
    }
}
