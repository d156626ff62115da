use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("corpus '{name}' is empty")]
    EmptyCorpus { name: String },
    #[error("duplicate document id '{id}'")]
    DuplicateId { id: String },
    #[error("document '{id}': attribute '{attribute}' must be 0 or 1, got {value}")]
    NonBinaryAttribute {
        id: String,
        attribute: String,
        value: f64,
    },
    #[error("document '{id}': feature vector has length {got}, expected {expected}")]
    FeatureDimMismatch {
        id: String,
        got: usize,
        expected: usize,
    },
    #[error("document '{id}': response is not finite")]
    NonFiniteResponse { id: String },
    #[error("document '{id}': missing response")]
    MissingResponse { id: String },
    #[error("document '{id}': missing feature vector")]
    MissingFeatures { id: String },
    #[error("document '{id}': attribute '{attribute}' is not coded")]
    MissingAttribute { id: String, attribute: String },
    #[error("corpus '{name}' has {n} documents, too few to split into two nonempty parts")]
    CorpusTooSmall { name: String, n: usize },
    #[error("lexicon '{category}': pattern '{pattern}' is malformed ('*' may only end a pattern)")]
    MalformedPattern { category: String, pattern: String },
    #[error("lexicon: duplicate category '{category}'")]
    DuplicateCategory { category: String },
    #[error("lexicon defines no categories")]
    EmptyLexicon,
    #[error("classifier training data contains a single class")]
    SingleClass,
    #[error("classifier did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
    },
    #[error("design matrix is singular even after ridge regularization")]
    SingularDesign,
    #[error("corpus has an empty vocabulary (no tokenizable text)")]
    EmptyVocabulary,
    #[error("text tokenizes to nothing")]
    EmptyText,
    #[error("weight for document '{id}' is {value}; weights must be finite and positive")]
    InvalidWeight { id: String, value: f64 },
    #[error("weights cover {weights} documents but {responses} responses were supplied")]
    LengthMismatch { weights: usize, responses: usize },
    #[error("attribute '{attribute}': group a={group} is empty")]
    EmptyAttributeGroup { attribute: String, group: u8 },
    #[error("scoring document '{id}': {message}")]
    DocScore { id: String, message: String },
    #[error("provider request failed after {attempts} attempts: {message}")]
    Provider { attempts: u32, message: String },
    #[error("target responses have zero standard deviation; normalized RMSE is undefined")]
    ZeroTargetSd,
    #[error("attribute '{attribute}': group a={group} has zero mass under the chosen distribution")]
    ZeroMassGroup { attribute: String, group: u8 },
    #[error("text '{text}' is not part of the synthetic space")]
    UnknownText { text: String },
    #[error("invalid {name}: {message}")]
    InvalidParam { name: String, message: String },
}

impl Error {
    pub(crate) fn invalid(name: &str, message: impl Into<String>) -> Self {
        Error::InvalidParam {
            name: name.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
