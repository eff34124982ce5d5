//! Exact combinatorial machinery for free-group automorphism dynamics.
//!
//! The crate is organized around seven areas:
//!
//! - [`freegroup`]: reduced words, cyclic words (conjugacy classes) and
//!   automorphisms of a free group of finite rank, all exact.
//! - [`stallings`]: folded core graphs for finitely generated subgroups —
//!   membership with rewriting, fiber products (pullbacks), meets of
//!   subgroup systems, malnormality, invariant fiber closures.
//! - [`whitehead`]: Whitehead automorphisms, greedy length minimization of
//!   cyclic words, primitivity testing.
//! - [`graphmap`]: topological representatives on marked graphs — invariant
//!   filtrations, stratum transition matrices, Perron-Frobenius eigenvalues,
//!   turn legality, train-track condition checks, bounded cancellation.
//! - [`growth`]: growth classification of conjugacy classes under iteration
//!   and bounded atoroidality probes.
//! - [`sink`]: approximation of the nonattracting sink of an automorphism
//!   from growth data, and hypothesis checkers built on it.
//! - [`extension`]: normal-form arithmetic in F ⋊ Q, commuting-pair (Z⊕Z)
//!   certificates, flare probes, Cayley balls and coned-off balls with
//!   slim-triangle statistics.
//!
//! Everything is deterministic given the same inputs, bounds and seeds;
//! probabilistic-looking verdicts (growth classes other than exact
//! periodicity, delta estimates) always carry the bounds they were computed
//! at.

pub mod extension;
pub mod freegroup;
pub mod graphmap;
pub mod growth;
pub mod sink;
pub mod stallings;
pub mod whitehead;

pub use freegroup::{Automorphism, ComposeOrder, CyclicWord, FreeGroupError, Letter, Word};
pub use stallings::{CoreGraph, SubgroupSystem};
