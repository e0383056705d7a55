//! Calculus on bicomplex numbers along hyperbolic-valued parameters.
//!
//! Bicomplex numbers are stored in idempotent form `w1 e1 + w2 e2`, which turns
//! every operation into a pair of independent complex operations. Paths are
//! product-type maps `Γ(t e1 + s e2) = γ1(t) e1 + γ2(s) e2`; their variation
//! and Riemann-Stieltjes integrals are hyperbolic and bicomplex numbers.

pub mod exec;
pub mod expr;

pub mod integrate;
pub mod intervals;
pub mod job;

pub mod numbers;
pub mod paths;
pub mod props;

pub mod quad;

pub use intervals::{DInterval, DPartition, IntervalError};
pub use numbers::{BiComplex, Complex, DOrdering, Hyperbolic, NumberError, Tolerance};
pub use paths::{ComponentPath, DPath, PathError, VariationReport};
