//! Depth checking, typing, evaluation and elementary bound certificates for
//! a modal λ-calculus with regions, stores and parallel threads.
//!
//! The pipeline is: [`reader`] turns source text into [`syntax::Term`]s,
//! [`depth`] and [`typing`] decide well-formedness and well-typedness,
//! [`eval`] runs programs under a scheduling policy, and [`complexity`]
//! measures them and certifies elementary bounds on their traces.

pub mod cli;
pub mod complexity;
pub mod depth;
pub mod encodings;
pub mod eval;
pub mod reader;
pub mod syntax;
pub mod testkit;
pub mod types;
pub mod typing;

/// Identifiers for variables, regions and type variables.
pub type Name = std::sync::Arc<str>;
