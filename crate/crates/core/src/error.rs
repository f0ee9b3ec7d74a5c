use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum HhfError {
    #[error("shape mismatch in {op}: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    ShapeMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("row {row} has zero norm; cosine similarity is undefined")]
    ZeroNormRow { row: usize },

    #[error("label id {label} out of range for {classes} classes")]
    LabelRange { label: u32, classes: usize },

    #[error("exhaustive search infeasible for [n={n}, k={k}]: supported range is k <= {max_k}, n <= {max_n}")]
    OracleScope {
        n: usize,
        k: usize,
        max_k: usize,
        max_n: usize,
    },

    #[error("no [{n}, {k}] binary linear code exists: dimension exceeds length")]
    NoCode { n: usize, k: usize },

    #[error("invalid code parameters: {0}")]
    InvalidCodeParams(String),

    #[error("{file}:{line}: parse error: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("batch has fewer than two rows; no pairs to form")]
    EmptyPairs,

    #[error("training diverged at epoch {epoch}, step {step}: loss is not finite")]
    Divergence { epoch: usize, step: usize },

    #[error("split error for class {class}: requested {requested} samples but only {available} available")]
    SplitError {
        class: u32,
        requested: usize,
        available: usize,
    },

    #[error("inter-intra ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HhfError {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        HhfError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HhfError>;
