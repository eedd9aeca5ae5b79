use thiserror::Error;

/// Errors shared across the DTW kernel, training engines and data layer.
#[derive(Debug, Error)]
pub enum DpDtwError {
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("temporal length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("sakoe-chiba band of width {width} is infeasible for lengths ({len1}, {len2}); minimum feasible width is {required}")]
    InfeasibleBand {
        width: usize,
        len1: usize,
        len2: usize,
        required: usize,
    },

    #[error("alignment is inconsistent with sequence lengths ({len1}, {len2})")]
    InvalidAlignment { len1: usize, len2: usize },

    #[error("class {class} has no training sequences")]
    EmptyClass { class: usize },

    #[error("empty sequence collection")]
    EmptyCollection,

    #[error("unknown class id {id}; valid ids are 1..={max}")]
    UnknownClass { id: usize, max: usize },

    #[error("label {label} out of range 1..={max}")]
    InvalidLabel { label: usize, max: usize },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("model format version mismatch: expected {expected}, got {got}")]
    VersionMismatch { expected: u32, got: u32 },

    #[error("model file checksum mismatch: expected {expected}, got {got}")]
    ChecksumMismatch { expected: String, got: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, DpDtwError>;
