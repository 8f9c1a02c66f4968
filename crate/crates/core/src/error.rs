use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the simulator, the classical oracle and the query layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("target qubit {qubit} is not |0> in basis state {basis}")]
    TargetNotZero { qubit: usize, basis: u64 },

    #[error("operation annihilated the state (zero norm)")]
    ZeroNorm,

    #[error("value {value} does not fit field `{field}` of width {width}")]
    FieldOverflow { field: String, value: u64, width: u32 },

    #[error("{needed} qubits required but the register budget is {max}")]
    QubitBudgetExceeded { needed: usize, max: usize },

    #[error("selection fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),

    #[error("predicate marks zero probability mass")]
    EmptySelection,

    #[error("no pair of tuples is similar (conditional similarity is 0)")]
    EmptyJoin,

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("duplicate field `{0}`")]
    DuplicateField(String),

    #[error("field `{0}` is not a primary key of the indexed relation")]
    NotPrimaryKey(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("invalid relation: {0}")]
    InvalidRelation(String),

    #[error("invalid qubit set: {0}")]
    InvalidQubitSet(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("similarity value {0} is not admissible: {1}")]
    InvalidSimilarity(String, &'static str),

    #[error("mix network needs a power-of-two number of inputs, got {0}")]
    NotPowerOfTwo(usize),

    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("{path}: {message}")]
    File { path: String, message: String },
}

impl Error {
    /// Stable kind name used in result documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::TargetNotZero { .. } => "TargetNotZero",
            Error::ZeroNorm => "ZeroNorm",
            Error::FieldOverflow { .. } => "FieldOverflow",
            Error::QubitBudgetExceeded { .. } => "QubitBudgetExceeded",
            Error::InvalidFraction(_) => "InvalidFraction",
            Error::EmptySelection => "EmptySelection",
            Error::EmptyJoin => "EmptyJoin",
            Error::UnknownField(_) => "UnknownField",
            Error::DuplicateField(_) => "DuplicateField",
            Error::NotPrimaryKey(_) => "NotPrimaryKey",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::InvalidSchema(_) => "InvalidSchema",
            Error::InvalidRelation(_) => "InvalidRelation",
            Error::InvalidQubitSet(_) => "InvalidQubitSet",
            Error::InvalidState(_) => "InvalidState",
            Error::InvalidSimilarity(..) => "InvalidSimilarity",
            Error::NotPowerOfTwo(_) => "NotPowerOfTwo",
            Error::Syntax { .. } => "SyntaxError",
            Error::File { .. } => "FileError",
        }
    }
}
