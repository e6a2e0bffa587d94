//! Core algorithms for a distribution-adaptive sorting engine.
//!
//! Inputs are instances of `n` values in which disjoint coordinate groups are
//! deterministic functions of one hidden variable each. A training phase
//! learns that hidden structure from sampled instances:
//!
//! 1. [`partition`] recovers the coordinate groups from a pairwise
//!    monotone-subsequence statistic,
//! 2. [`landmarks`] carves an n-landmark bucket structure out of merged
//!    sample instances,
//! 3. [`outcome`] encodes each group's per-instance outcome (landmark bucket
//!    of every member plus their relative order) and stores the sampled
//!    outcome distribution in a weighted trie.
//!
//! The operation phase ([`sorter`]) then sorts fresh instances by biased trie
//! descent with a comparison-sort fallback, in comparison cost proportional
//! to the outcome entropy plus `n`. [`stats`] and [`oracle`] provide the
//! instrumentation and independent brute-force references used to verify the
//! cost and correctness claims; [`pipeline`] ties the learning phases
//! together. IO, file formats, and the CLI live in the companion
//! `selfsort-cli` crate.
//!
//! The crate is `no_std` (with `alloc`); everything is deterministic given
//! explicit seeds.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod landmarks;
pub mod model;
pub mod oracle;
pub mod outcome;
pub mod partition;
pub mod pipeline;
pub mod sorter;
pub mod stats;
