use std::fmt;

use crate::model::Class;
use crate::symbol::Symbol;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    ConstantInRule(String),
    VariableInFact(String),
    ExistentialInBody(String),
    UndeclaredHeadVariable(String),
    DuplicateExistential(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: ", self.line, self.col)?;
        match &self.kind {
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error: {msg}"),
            ParseErrorKind::ConstantInRule(c) => {
                write!(f, "constant `{c}` is not allowed in a rule")
            }
            ParseErrorKind::VariableInFact(v) => {
                write!(f, "variable `{v}` is not allowed in a fact")
            }
            ParseErrorKind::ExistentialInBody(v) => {
                write!(
                    f,
                    "variable `{v}` is declared existential but occurs in the body"
                )
            }
            ParseErrorKind::UndeclaredHeadVariable(v) => write!(
                f,
                "head variable `{v}` does not occur in the body and is not declared existential"
            ),
            ParseErrorKind::DuplicateExistential(v) => {
                write!(f, "variable `{v}` is declared existential twice")
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Parse(ParseError),
    #[error("predicate `{pred}` is used with arity {first} and arity {second}")]
    ArityConflict {
        pred: Symbol,
        first: usize,
        second: usize,
    },
    #[error("invalid TGD: {0}")]
    InvalidTgd(String),
    #[error("depth is undefined for variable `{0}`")]
    VariableDepth(Symbol),
    #[error("chase caps must be positive")]
    ZeroCap,
    #[error("operation requires a {expected} program, found {found}")]
    WrongClass { expected: Class, found: Class },
    #[error("tuple of {arity} variables exceeds the specialization arity cap {cap}")]
    ArityCapExceeded { arity: usize, cap: usize },
    #[error("{what} exceeded its budget of {budget}")]
    BudgetExceeded { what: &'static str, budget: usize },
    #[error("chase of the {0} side exceeded its caps")]
    ChaseCapExceeded(&'static str),
    #[error(
        "size bound {needed} exceeds the configured ceiling of {ceiling} atoms and no divergence \
         certificate was found below it; use `decide` instead"
    )]
    CeilingExceeded { needed: String, ceiling: u64 },
    #[error("atom `{0}` is not in the database")]
    RootNotInDatabase(String),
    #[error("atom mentions a term that is not a term of the guard: {0}")]
    ForeignTerm(String),
    #[error("turing machine spec: {0}")]
    TmSpec(String),
    #[error("invalid generator parameters: {0}")]
    Generator(String),
}

impl From<ParseError> for Error {
    fn from(e: ParseError) -> Error {
        Error::Parse(e)
    }
}
