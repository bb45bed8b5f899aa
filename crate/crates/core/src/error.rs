use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("insufficient decay: energy decay curve spans only {range_db:.1} dB, need {required_db:.0} dB")]
    InsufficientDecay { range_db: f64, required_db: f64 },

    #[error("degenerate distribution: feature values have zero variance")]
    DegenerateDistribution,

    #[error("empty group: {0} has no training records")]
    EmptyGroup(crate::features::Group),

    #[error("unsupported format version {found} (this build reads up to {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
