//! Invertible Bloom lookup tables (IBLTs) and a finite-length toolkit for
//! their listing failure probability.
//!
//! The crate is split along the life of an analysis:
//!
//! - [`hashing`] maps keys to one cell per subtable, either through a keyed
//!   pseudo-random hash or through the stopping-set avoiding partition of a
//!   key bijection.
//! - [`iblt`] is the table itself: insert, delete, get and peeling-based
//!   listing.
//! - [`enumeration`] counts stopping matrices `z(ell, n)` exactly with big
//!   integers, and carries the brute-force counter used to check it.
//! - [`bounds`] turns those counts into the union bound on the listing
//!   failure probability and its size-2 error-floor asymptote.
//! - [`oracle`] enumerates every state matrix of a tiny table to get the
//!   exact failure probability.
//! - [`simulate`] runs seeded Monte Carlo trials against real tables.
//!
//! Cell indices are 0-based throughout: subtable `i` in `0..k` owns the
//! global cells `i * ell .. (i + 1) * ell`. A 1-based cell numbering is
//! recovered by adding one.

pub mod bounds;
pub mod enumeration;
pub mod error;
pub mod hashing;
pub mod iblt;
pub mod oracle;
pub mod simulate;

pub use bounds::{p2_asymptote, stopping_set_probability, union_bound, BoundBreakdown, BoundTerm};
pub use enumeration::{enumerate_z_bruteforce, is_stopping_matrix, pivots, BinaryMatrix, PivotSet, ZTable};
pub use error::{Error, Result};
pub use hashing::{
    AffineBijection, CellHash, ExplicitScheme, HashParams, HashScheme, HashTuple, Identity,
    KeyBijection, SchemeKind,
};
pub use iblt::{Cell, GetResult, Iblt, ListingResult, ListingStatus};
pub use oracle::{contains_stopping_submatrix, exact_failure_probability, peel_fixpoint, StateMatrix};
pub use simulate::{KeyModel, SimReport, Simulator, TrialConfig};

/// Converts an exact non-negative ratio to the nearest `f64`.
pub fn ratio_to_f64(r: &num_rational::BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::INFINITY)
}
