use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("unknown example id `{0}`")]
    UnknownExample(String),
    #[error("truncation error estimate {estimate:.3e} exceeds tolerance {tol:.3e}")]
    Truncation { estimate: f64, tol: f64 },
    #[error("history queried at s = {s} beyond last breakpoint {s_last}")]
    HistoryRange { s: f64, s_last: f64 },
    #[error("extension queried at s = {s} before last breakpoint {s_last}")]
    ExtensionRange { s: f64, s_last: f64 },
    #[error("riccati slope crossed zero at x = {0}")]
    RiccatiBlowup(f64),
    #[error("no well-defined front: {0}")]
    NoFront(String),
    #[error("domain exhausted at s = {s}: front at z = {z}")]
    DomainExhausted { s: f64, z: f64 },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("root bracket exhausted: {0}")]
    RootBracket(String),
    #[error("orbit left the trapping box: {0}")]
    OrbitEscape(String),
    #[error("quadrature did not converge: estimate {estimate}, error {error:.3e}")]
    Quadrature { estimate: f64, error: f64 },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
