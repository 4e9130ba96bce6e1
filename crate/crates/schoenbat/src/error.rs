use crate::kernels::KernelId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,

    #[error("non-finite value {value} at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize, value: f64 },

    #[error("rows must all have the same length; row {row} has {got} entries, expected {expected}")]
    RaggedRows { row: usize, expected: usize, got: usize },

    #[error("shape mismatch in {op}: {details}")]
    ShapeMismatch { op: &'static str, details: String },

    #[error("unknown kernel `{0}`; expected one of exp, inv, logi, trigh, sqrt")]
    UnknownKernel(String),

    #[error("input {value} lies outside the {kernel} kernel's open domain (|z| < {radius})")]
    OutsideDomain { kernel: KernelId, value: f64, radius: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("attention denominator for query row {row} is within {guard:e} of zero")]
    DegenerateDenominator { row: usize, guard: f64 },

    #[error("feature map serialization: {0}")]
    FeatureMapCodec(String),

    #[error("power-law fit is degenerate: {0}")]
    DegenerateFit(String),

    #[error("restoration hit a non-finite intermediate in {what}; use unit-ball (pre-normalized) inputs")]
    NonFiniteRestoration { what: &'static str },

    #[error("config: {0}")]
    Config(String),

    #[error("csv line {line}: {message}")]
    CsvParse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
