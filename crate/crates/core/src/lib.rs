//! Salted query games at desk scale.
//!
//! The crate is organised bottom-up: [`game`] defines games and their
//! transformations, [`solver`] computes exact optimal values, [`composition`]
//! runs multi-game algorithms and the memoryless-to-fair reduction, [`bounds`]
//! evaluates closed-form security bounds, [`attacks`] estimates the advantage
//! of the standard preprocessing attacks and [`qsim`] simulates the compressed
//! oracle. [`suite`] bundles the end-to-end acceptance checks.

pub mod attacks;
pub mod bounds;
pub mod budget;
pub mod composition;
pub mod decimal;
pub mod error;
pub mod game;
pub mod qsim;
pub mod ratio;
pub mod solver;
pub mod suite;

pub use budget::Budget;
pub use error::{Error, Result};
pub use game::{Game, GameSpec, OracleTable, PartialAssignment, Term};
pub use ratio::Rational;
