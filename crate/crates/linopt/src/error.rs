use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("variable {0} has an empty domain")]
    EmptyDomain(String),
    #[error("row {row} references undeclared variable {var}")]
    UnknownVariable { row: String, var: usize },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolveError {
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
