//! Exact desk-scale analysis of graph codes over F2.
//!
//! The crate is organized around a packed representation of F2^I for small
//! index families I (edges of K_n, optionally with loops):
//!
//! - [`f2space`]: index orderings, dense value tables, the Walsh transform,
//!   and Gowers uniformity norms.
//! - [`graphs`]: graphs with loops, symmetric difference, canonical forms,
//!   and the built-in clique families.
//! - [`codes`]: code predicates, exact densities, and extremal search by
//!   branch-and-bound maximum independent set.
//! - [`subspaces`]: central and wildcard (combinatorial-line style) affine
//!   embeddings with application, preimage, and block detection.
//! - [`polynomials`]: torus-valued and integer-valued multilinear
//!   polynomials, restriction to subspaces, canonical coefficient sets,
//!   degree lowering, and the staged partition of the ambient space.
//! - [`uniformity`]: the Fourier-peak boosting construction and level-set
//!   decompositions of polynomial phases.
//! - [`dphj`]: square words, polynomial lines, and both directions of the
//!   reduction between line-free word sets and codes with loops.
//!
//! All probabilities and measures are exact dyadic rationals
//! ([`rational::Dyadic`]); floats appear only in norm computations, with
//! documented tolerances.

pub mod binfmt;
pub mod codes;
pub(crate) mod delsarte;
pub mod dphj;
pub mod error;
pub mod f2space;
pub mod graphs;
pub mod polynomials;
pub mod rational;
pub mod selftest;
pub mod subspaces;
pub mod uniformity;

pub use error::{Error, Result};
pub use f2space::{EdgeIndexSet, GraphPoint, SpaceKind, Spectrum, ValueTable};
pub use rational::Dyadic;

/// Library version, recorded in emitted manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
