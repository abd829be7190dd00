use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("curvature must be a positive finite number, got {0}")]
    InvalidCurvature(f64),

    #[error("point is off the hyperboloid: <x,x> + 1/c = {residual:e}")]
    OffManifold { residual: f64 },

    #[error("vector is not tangent at its base point: <p,v> = {residual:e}")]
    NotTangent { residual: f64 },

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("degenerate geometry in {op}: {detail}")]
    Degenerate { op: &'static str, detail: String },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("non-finite adjoint produced by op `{op}` (node {node})")]
    NanGradient { op: &'static str, node: usize },

    #[error("non-finite value produced by op `{op}` (node {node}){context}")]
    NanForward {
        op: &'static str,
        node: usize,
        context: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("missing dataset file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("fold {fold} failed: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
