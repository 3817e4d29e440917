//! Finite-field trace functions, polynomial sieves and smooth-box point
//! counting.

pub mod arith;
pub mod boxcount;
pub mod error;
pub mod field;
pub mod poly;
pub mod sieve;
pub mod trace;
pub mod variety;
pub mod weight;

pub use error::{Result, XntError, DEFAULT_BUDGET};
pub use field::{ExtField, FiniteField, PrimeField};
pub use poly::{parse_multi, parse_uni, MultiPoly, Ring, UniPoly};
pub use trace::TraceFunction;
pub use variety::{ProjectivePoint, SmoothnessVerdict, UClass, UKind};
