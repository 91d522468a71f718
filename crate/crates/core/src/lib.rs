//! Semi-oblivious chase engine and non-uniform termination deciders for
//! tuple-generating dependencies.

pub mod analysis;
pub mod bounds;
pub mod chase;
pub mod error;
pub mod generators;
pub mod linearize;
pub mod model;
pub mod simplify;
pub mod symbol;
pub mod termination;
pub mod text;

pub use error::{Error, Result};
pub use model::{Atom, Class, Database, Fact, Program, Term, Tgd, Var};
pub use symbol::Symbol;
