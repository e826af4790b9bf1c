use thiserror::Error;

/// Errors produced by construction and operations on finite metric measure
/// spaces.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("space is not a valid metric measure space: {0}")]
    InvalidSpace(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("objects belong to different spaces ({left} vs {right})")]
    MismatchedSpaces { left: String, right: String },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("dimension parameter must satisfy N >= 1, got {0}")]
    DimensionTooSmall(f64),

    #[error("epsilon underflow: {0} < 1e-12")]
    EpsUnderflow(f64),

    #[error("neighbor graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },

    #[error("negative time {0} rejected")]
    NegativeTime(f64),

    #[error("invalid line: {0}")]
    InvalidLine(String),

    #[error("flow time {t} is not a multiple of the lattice step {step}")]
    OffLatticeFlowTime { t: f64, step: f64 },

    #[error("empty slab: no point has |b| <= {half_width}; recenter the field so the zero level intersects the lattice")]
    EmptySlab { half_width: f64 },

    #[error("harmonicity verdict failed; the supplied line does not split this space")]
    HarmonicityFailed,

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
