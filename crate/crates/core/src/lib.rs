//! Recombination dynamics on finite product probability measures.
//!
//! The recombination operator updates a joint probability law by mixing,
//! with fixed weights, the products of its marginals over the atoms of a
//! family of set partitions. Iterating the operator is equivalent to
//! evolving a Markov chain on the partition lattice; that chain is
//! absorbed at the common refinement of the family, and everything about
//! its behavior conditioned on non-absorption — geometric decay rate,
//! quasi-limiting distribution, the conditioned (Q-) process and the
//! quasi-stationary distributions — can be computed in closed form because
//! the transition matrix is triangular in a refinement-compatible order.
//!
//! The crate is generic over the arithmetic backend ([`scalar::Scalar`]):
//! exact [`num::BigRational`] (the default; every identity is checked with
//! `==`) or `f64`. Site indices are 0-based in code and 1-based in every
//! parsed or printed string.
//!
//! Modules:
//! - [`partitions`]: canonical set partitions, the join (common
//!   refinement), the coarser/finer order, closure of a family.
//! - [`measures`]: dense joint tables, marginals, tensor products and the
//!   recombination operator itself.
//! - [`chain`]: the partition chain, its state space and transition
//!   matrix, distribution evolution, survival and hitting functionals.
//! - [`quasistationary`]: decay rate, quasi-limiting distribution,
//!   Q-process and quasi-stationary distribution checks.
//! - [`montecarlo`]: reproducible seeded trajectory sampling as an
//!   independent statistical check on the exact machinery.

pub mod chain;
mod error;
pub mod measures;
pub mod montecarlo;
pub mod partitions;
pub mod quasistationary;
pub mod scalar;

pub use error::{Error, Result};
