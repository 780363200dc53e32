use thiserror::Error;

pub type Result<T> = std::result::Result<T, GameError>;

#[derive(Error, Debug)]
pub enum GameError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("sampling error: vertex {vertex} stayed isolated after {retries} resamples")]
    IsolatedVertex { vertex: usize, retries: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("Riccati blow-up at t = {time} (operator norm {norm:.3e})")]
    BlowUp { time: f64, norm: f64 },

    #[error("{solver} did not converge after {iterations} iterations (last delta {delta:.3e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        delta: f64,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("at N = {n}: {source}")]
    AtSize {
        n: usize,
        #[source]
        source: Box<GameError>,
    },
}

impl GameError {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            GameError::Config(_)
            | GameError::DimensionMismatch(_)
            | GameError::Unsupported(_)
            | GameError::Json(_) => 2,
            GameError::IsolatedVertex { .. }
            | GameError::NonFinite(_)
            | GameError::BlowUp { .. }
            | GameError::NotConverged { .. }
            | GameError::Singular(_) => 3,
            GameError::Io(_) => 1,
            GameError::AtSize { source, .. } => source.exit_code(),
        }
    }

    /// Tags an error with the sweep size at which it occurred.
    pub fn at_size(self, n: usize) -> Self {
        match self {
            e @ GameError::AtSize { .. } => e,
            e => GameError::AtSize { n, source: Box::new(e) },
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        GameError::Config(msg.into())
    }
}
