use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("non-finite evaluation at x = {x}: {what}")]
    Evaluation { x: f64, what: String },
    #[error("parameter violation: {0}")]
    Parameter(String),
    #[error("certificate error: {0}")]
    Certificate(String),
    #[error("rate error: {0}")]
    Rate(String),
    #[error("truncated mass {mass:.3e} is below 1 - {tol:.1e}; enlarge the box")]
    Truncation { mass: f64, tol: f64 },
    #[error("twist overflow: e^(a psi) exceeds f64 range; largest admissible |a| is {max_a:.4}")]
    Twist { max_a: f64 },
    #[error("simulation error: {0}")]
    Sim(String),
    #[error("bandwidth error: {0}")]
    Bandwidth(String),
    #[error("config validation failed:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
