use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("spectral parameter above threshold: k^2 = {k_sq} >= nu_1 = {nu1}")]
    AboveThreshold { k_sq: f64, nu1: f64 },

    #[error("rank-one part diverges at threshold (kappa_1 = 0) for {0}")]
    RankOneDiverges(&'static str),

    #[error("outside the perturbative regime: ||P|| = {norm} >= 1")]
    NotPerturbative { norm: f64 },

    #[error("root bracketing failed: {0}")]
    Bracketing(String),

    #[error("truncation-dominated; increase X ({0})")]
    TruncationDominated(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
