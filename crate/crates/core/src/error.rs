use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {0} does not lie in the model space")]
    Domain(String),

    #[error("iteration budget exceeded: {requested} > {limit}")]
    Budget { requested: u64, limit: u64 },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("permutation table is not a bijection: {0}")]
    NotBijective(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("method `{method}` cannot run on {space}")]
    MethodMismatch { method: String, space: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Budget exhaustion and missing constructions are "ran out of room"
    /// failures rather than bad input.
    pub fn is_budget_or_not_found(&self) -> bool {
        matches!(self, Error::Budget { .. } | Error::NotFound(_))
    }
}
