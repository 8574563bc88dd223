use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid coordinate ({0}, {1})")]
    BadCoordinate(f64, f64),
    #[error("speed must be positive and finite, got {0}")]
    BadSpeed(f64),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid instance:\n{0}")]
    Invalid(String),
    #[error("solver: {0}")]
    Solve(#[from] linopt::SolveError),
    #[error("master build: {0}")]
    Build(String),
    #[error("pricing for satellite {satellite}: {source}")]
    Pricing {
        satellite: u32,
        #[source]
        source: Box<Error>,
    },
    #[error("internal: {0}")]
    Internal(String),
    #[error("oracle refuses {0} communities (limit {1})")]
    TooLarge(usize, usize),
    #[error("bad generator spec: {0}")]
    Spec(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
