use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("column `{0}` has zero sample variance; its Sharpe ratio is undefined")]
    DegenerateColumn(String),

    #[error("rho = {rho} is outside the positive-definite range for k = {k}")]
    RhoOutOfRange { rho: f64, k: usize },

    #[error("selection tie: {0}")]
    Tie(String),

    #[error("empty truncation interval: v_min = {v_min}, v_max = {v_max}")]
    EmptyTruncation { v_min: f64, v_max: f64 },

    #[error("covariance is not positive semidefinite (minimum eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("root search failed: {0}")]
    RootSearch(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    ///
    /// 2 usage error, 3 data error, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) | Error::RhoOutOfRange { .. } => 2,
            Error::Dimension(_)
            | Error::DegenerateColumn(_)
            | Error::Tie(_)
            | Error::Parse { .. }
            | Error::Data(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 3,
            Error::EmptyTruncation { .. }
            | Error::NotPositiveSemidefinite(_)
            | Error::RootSearch(_)
            | Error::Simulation(_) => 4,
        }
    }
}
