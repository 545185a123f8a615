//! Fully-inductive temporal knowledge graph link prediction.
//!
//! Relation, entity and time representations are computed from graph
//! structure and snapshot order alone, so a trained model carries no
//! vocabulary-sized state and can score a graph whose entities, relations
//! and timestamps it has never seen.

pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gradsuite;
pub mod model;
pub mod parallel;
pub mod train;
pub mod relation_graph;
pub mod synth;
pub mod temporal;

pub use error::{Error, ErrorCategory, Result};
