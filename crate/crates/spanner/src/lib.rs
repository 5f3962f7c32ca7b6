//! A document-spanner engine: regex formulas with capture variables compiled
//! to vset-automata, evaluated under the schemaless (SPARQL-style) semantics
//! with union / projection / natural join / difference, and enumerated
//! without duplicates.

pub mod algebra;
pub mod difference;
pub mod enumerate;
pub mod error;
pub mod model;
pub mod ratree;
pub mod reductions;
pub mod regex;
pub mod va;

pub use error::{Error, Result};
