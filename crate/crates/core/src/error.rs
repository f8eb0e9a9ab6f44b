use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate position: {0}")]
    DegeneratePosition(String),
    #[error("degenerate LOS between nodes {0} and {1}")]
    DegenerateLos(usize, usize),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("no signal: effective SINR is zero")]
    NoSignal,
    #[error("unbounded information: both hardware impairments are zero")]
    UnboundedInformation,
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
