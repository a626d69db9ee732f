use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("invalid network: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("state is infeasible: {0}")]
    Infeasible(String),
    #[error("unstable linearization: eigenvalue with real part {real:.3e}")]
    Unstable { real: f64 },
    #[error("lyapunov residual {residual:.3e} exceeds tolerance")]
    Residual { residual: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("simulation blew up at t = {time:.3} s")]
    BlowUp { time: f64 },
    #[error("csv error: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;
