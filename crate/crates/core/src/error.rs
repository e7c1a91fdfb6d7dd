use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("activation table of {table_len} entries cannot hold {boundaries} distinct boundaries")]
    InfeasibleTable { table_len: usize, boundaries: usize },

    #[error("cannot form {k} clusters from {distinct} distinct values")]
    DegenerateClustering { k: usize, distinct: usize },

    #[error("laplacian level recurrence broke down after {feasible} of {requested} levels")]
    LaplacianRecurrence { feasible: usize, requested: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },

    #[error("no feasible scale exponent: {0}")]
    NoFeasibleScale(String),

    #[error("multiplication table entry {value} does not fit in {bits} bits")]
    TableOverflow { value: f64, bits: u32 },

    #[error("model cannot be compiled: {0}")]
    Compile(String),

    #[error("{count} parameters are not snapped to the codebook (first at layer {layer}, index {index})")]
    Unsnapped {
        count: usize,
        layer: usize,
        index: usize,
    },

    #[error("bad model file: {0}")]
    Format(String),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("data error at byte {offset}: {detail}")]
    Data { offset: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
