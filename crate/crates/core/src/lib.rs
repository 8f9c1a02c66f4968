//! Simulated quantum relational algebra over weighted relations.
//!
//! Relations are prepared as amplitude-encoded registers; selection runs
//! amplitude amplification, projection takes marginals, and joins weight pairs
//! by a similarity rotated into an ancilla. A brute-force classical engine
//! computes the same distributions for cross-checking.

pub mod coracle;
pub mod error;
pub mod qdsl;
pub mod qops;
pub mod qstate;
pub mod relation;

pub use error::{Error, Result};
pub use qstate::{QubitIndexSet, StateVector};
pub use relation::{Field, Schema, Tuple, WeightedRelation};
