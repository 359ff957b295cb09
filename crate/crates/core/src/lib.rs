//! Exact-rational Cohen-Lenstra probabilities for finite abelian groups.
//!
//! The crate is organised bottom-up:
//!
//! - [`partitions`]: integer partitions, the index set of abelian p-groups.
//! - [`abelian`]: finite abelian groups as prime-indexed partitions, their
//!   invariants and automorphism-group orders.
//! - [`enclosure`]: rational intervals with outward rounding.
//! - [`localmeasure`]: local weights and probabilities on a single prime.
//! - [`properties`]: uniform properties, their mini-language, O-sets and D-sets.
//! - [`globalmeasure`]: the product measure over all primes, truncated spaces
//!   and prime-class variants.
//! - [`contents`]: finitely additive contents and sequence densities.
//! - [`sampling`]: exact-inversion sampling on finitely many primes and the
//!   equidistribution harness.
//! - [`cli`]: the command-line front end used by the `clmeasure` binary.
//!
//! Every probability returned by this crate is a [`ProbEnclosure`]: a pair of
//! exact rationals guaranteed to contain the true value.

pub mod abelian;
pub mod cli;
pub mod contents;
pub mod enclosure;
mod error;
pub mod globalmeasure;
pub mod groupio;
pub mod localmeasure;
pub mod partitions;
pub mod primes;
pub mod properties;
pub mod sampling;

pub use abelian::{aut_order, aut_order_oracle, FinAbGroup, GroupInvariants};
pub use enclosure::{ProbEnclosure, Rational};
pub use error::{Error, Result};
pub use globalmeasure::GlobalConfig;
pub use localmeasure::Budget;
pub use partitions::Partition;
pub use properties::{DSet, OSet, Target, UniformProperty};

/// Version string embedded in every run manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
