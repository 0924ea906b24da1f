use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("{origin}:{line}:{column}: syntax error: {message} (expected {})", .expected.join(" or "))]
    Syntax {
        origin: String,
        line: usize,
        column: usize,
        message: String,
        expected: Vec<String>,
    },

    #[error("variable `{name}` is used before it is assigned")]
    UnboundVariable { name: String },

    #[error("program `{program}` has an execution path without a return statement")]
    MissingReturn { program: String },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("`{expr}` may leave the 32-bit range (interval [{lo}, {hi}])")]
    WidthOverflowRisk { expr: String, lo: i128, hi: i128 },

    #[error("value {value} of `{name}` is not encodable in 32 bits")]
    WidthOverflow { name: String, value: i64 },

    #[error("input space has {points} points, above the cap of {cap}")]
    SpaceTooLarge { points: u128, cap: u128 },

    #[error("invalid distribution for `{name}`: {reason}")]
    InvalidDistribution { name: String, reason: String },

    #[error("group {group} has zero probability mass")]
    ZeroMassGroup { group: i64 },

    #[error("the conditioning event has zero probability mass")]
    ZeroMassCondition,

    #[error("incomplete outcome table: {0}")]
    IncompleteTable(String),

    #[error("`{name}` is not uniformly distributed; wrap the program first")]
    NonUniformDistribution { name: String },

    #[error("the distribution of `{name}` cannot be expressed over {size} equiprobable levels")]
    NonRepresentable { name: String, size: u64 },

    #[error("outcome set {outcomes:?} is not binary with favorable outcome {favorable}")]
    NonBinaryOutcome { outcomes: Vec<i64>, favorable: i64 },

    #[error("exposure mismatch: {0}")]
    ExposureMismatch(String),

    #[error("protected variable `{0}` cannot be clamped to its factual value")]
    ProtectedVariableClamped(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("invalid causal model: {0}")]
    Model(String),

    #[error("SAT solver exceeded its budget of {budget} conflicts")]
    SolverBudgetExceeded { budget: u64 },

    #[error("backend mismatch: enumeration counted {enumeration}, SAT counting counted {counting}; witness {witness}")]
    BackendMismatch {
        enumeration: u64,
        counting: u64,
        witness: String,
    },

    #[error("configuration error: {0}")]
    Config(String),
}
