//! Exact set algebra on Bernoulli shifts and constructive over/under-independence.
//!
//! Every measure is an exact rational. Sets of the shift are
//! [`CylinderUnion`]s, stored as canonical decision diagrams so equal sets
//! compare equal structurally.

pub mod anchored;
pub mod bernoulli;
pub mod constructions;
pub mod cylinder;
mod dd;
pub mod poly;
pub mod rational;
pub mod systems;
pub mod towers;
pub mod verify;

pub use bernoulli::BernoulliSystem;
pub use cylinder::{Cylinder, CylinderUnion};
pub use dd::{Scanner, Step};
pub use poly::IntPolynomial;
pub use rational::Rational;
pub use systems::{interval_correlation, rotate, IntervalUnion, QuadExt, RotationSystem};
pub use towers::{build_tower, Tower, UniformityCertificate};



#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("alphabet mismatch: {0} vs {1}")]
    AlphabetMismatch(usize, usize),
    #[error("window of width {0} exceeds the enumeration guard")]
    WindowTooLarge(u64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("target unreachable: {0}")]
    Unreachable(String),
    #[error("resource guard exhausted: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;
