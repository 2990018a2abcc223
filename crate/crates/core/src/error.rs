use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("variable ids start at 1")]
    ZeroVariable,
    #[error("variable {var} exceeds declared variable count {n_vars}")]
    VariableOutOfRange { var: u32, n_vars: u32 },
    #[error("variable {0} appears twice in one clause")]
    DuplicateVariable(u32),
    #[error("clause contains both z{0} and its negation")]
    Tautology(u32),
    #[error("assignment has {got} entries, formula has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{what} over {n} variables exceeds the exhaustive enumeration limit of {limit}")]
    TooLarge { what: &'static str, n: usize, limit: usize },
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("DIMACS line {line}: {msg}")]
    Dimacs { line: usize, msg: String },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid literal mask: {0}")]
    InvalidMask(String),
    #[error("empty matrix")]
    EmptyMatrix,
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("infeasible primal weights: {0}")]
    Infeasible(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid resolution proof: {0}")]
    InvalidProof(String),
    #[error("proof is not read-once: clause {0} labels several leaves")]
    NotReadOnce(usize),
    #[error("clause {0} labels no leaf of the proof")]
    UnusedClause(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("stick game: {0}")]
    Game(String),
}
