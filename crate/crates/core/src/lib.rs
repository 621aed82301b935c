//! Word-embedding and knowledge-graph workbench: co-occurrence statistics,
//! PMI, embedding factorization, semantic identity checks, intrinsic
//! evaluation, and relation-representation diagnostics.

pub mod cli;
pub mod cooccur;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod factorize;
pub mod kgraph;
pub mod pmi;
pub mod semantics;
pub mod sparse;
pub mod surface;

pub use error::{Error, Result};
