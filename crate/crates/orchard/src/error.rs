use thiserror::Error;

/// Errors surfaced by the geometry and pipeline operations.
#[derive(Debug, Error)]
pub enum OrchardError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("degenerate line: anchor points coincide")]
    DegenerateLine,
    #[error("degenerate input for model fitting: {0}")]
    DegenerateInput(&'static str),
    #[error("skeleton endpoints are not connected")]
    NotConnected,
    #[error("marker points are collinear")]
    DegenerateMarker,
    #[error("marker patch spacing too noisy (stddev/mean = {0:.3})")]
    MarkerNoiseTooHigh(f64),
    #[error("region of interest crop produced an empty cloud")]
    EmptyRoi,
    #[error("no trellis lines found")]
    NoTrellisFound,
    #[error("no trunk candidates found")]
    NoTrunkCandidates,
    #[error("all points stripped; no tree points remain")]
    EmptyTrees,
    #[error("alignment failed: {0}")]
    AlignmentFailed(String),
    #[error("label arrays differ in length: {0} vs {1}")]
    ShapeError(usize, usize),
    #[error("invalid scene spec: {0}")]
    SpecError(String),
    #[error("parse error at {location}: {message}")]
    ParseError { location: String, message: String },
    #[error("invalid configuration: {0}")]
    ConfigError(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, OrchardError>;
