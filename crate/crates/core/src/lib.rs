//! Exact relation spaces between multilinear trace invariants of several
//! generic matrices under the orthogonal group, with decomposability
//! decisions that carry replayable certificates and an independent
//! evaluation oracle on matrix-unit tuples.

pub mod exactla;
pub mod field;
pub mod isotypic;
pub mod oracle;
pub mod relspace;
pub mod sigma;
pub mod text;
pub mod words;

pub use field::{Field, FieldError, PrimeField, Rationals};

/// A trace vector over `F_p`.
pub type FpTraceVector = relspace::TraceVector<PrimeField>;
/// A trace vector over the rationals.
pub type QTraceVector = relspace::TraceVector<Rationals>;
