use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sample has zero variance")]
    ConstantSample,
    #[error("sample of size {n} is too small, at least {min} observations are required")]
    SampleTooSmall { n: usize, min: usize },
    #[error("sample of size {n} is too large, at most {max} observations are supported")]
    SampleTooLarge { n: usize, max: usize },
    #[error("sample contains a non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("probability {0} is outside (0, 1]")]
    InvalidProbability(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no distribution has skewness {skew} and kurtosis {kurt} (kurtosis must exceed skewness^2 + 1)")]
    InfeasibleMoments { skew: f64, kurt: f64 },
    #[error("Pearson coefficient denominator vanishes for skewness {skew} and kurtosis {kurt}")]
    DegenerateDenominator { skew: f64, kurt: f64 },

    #[error("correlation is undefined because one of the variances is zero")]
    DegenerateCorrelation,
    #[error("a spacing of the sorted sample is zero")]
    ZeroSpacing,
    #[error("window m = {m} must satisfy 1 <= m < n/2 for n = {n}")]
    InvalidWindow { m: usize, n: usize },
    #[error("kernel bandwidth is zero")]
    ZeroBandwidth,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("input has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training data must contain at least {min} examples of each class")]
    SingleClassData { min: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("labels contain a single class")]
    SingleClassLabels,
    #[error("lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{got} points cannot fill {bins} bins")]
    TooFewPoints { got: usize, bins: usize },
    #[error("generation spec admits no feasible skewness/kurtosis pair")]
    InfeasibleSpec,

    #[error("malformed CSV at row {row}: {message}")]
    MalformedCsv { row: usize, message: String },
    #[error("CSV is missing column `{0}`")]
    MissingColumn(String),
    #[error("catalog has {have} values, samples of size {need} were requested")]
    CatalogTooSmall { have: usize, need: usize },
    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("malformed file {path}: {message}")]
    MalformedFile { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the numbers themselves rather than by bad input files.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::ConstantSample
                | Error::DegenerateDenominator { .. }
                | Error::DegenerateCorrelation
                | Error::ZeroSpacing
                | Error::ZeroBandwidth
                | Error::Diverged { .. }
        )
    }
}
