use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("header not found: {0}")]
    MissingHeader(PathBuf),
    #[error("malformed header {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    PayloadLength { expected: usize, found: usize },
    #[error("unsupported dtype {found:?} (expected {expected:?})")]
    UnsupportedDtype { found: String, expected: &'static str },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("label {value} not allowed in a {kind} mask")]
    InvalidLabel { value: u8, kind: &'static str },
    #[error("pericardium mask is empty")]
    EmptyPericardium,
    #[error("fat mask is empty")]
    EmptyFat,
    #[error("territory mask has no labeled voxels")]
    EmptyTerritoryMask,
    #[error("negative calcium score {0}")]
    NegativeScore(f64),
    #[error("phantom lesion {index} is not fully inside the heart mask")]
    LesionOutsideHeart { index: usize },
    #[error("phantom lesions {a} and {b} are closer than 2 voxels")]
    LesionsNotIsolated { a: usize, b: usize },
    #[error("target prevalence {0} is unreachable")]
    UnreachablePrevalence(f64),
    #[error("row arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("empty table")]
    EmptyTable,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("no positive labels")]
    NoPositives,
    #[error("class with {count} rows cannot be split into {k} folds")]
    ClassCountBelowK { count: usize, k: usize },
    #[error("degenerate folds: {0}")]
    DegenerateFolds(String),
    #[error("tree uses {0} distinct features; brute-force limit is 10")]
    TooManyFeatures(usize),
    #[error("model document schema violation: {0}")]
    Schema(String),
    #[error("incompatible model document version {found:?} (expected {expected:?})")]
    IncompatibleVersion { found: String, expected: &'static str },
    #[error("unknown CAD-RADS category {0:?}")]
    UnknownCadRads(String),
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml error in {path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
