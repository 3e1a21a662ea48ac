//! Counterfactual explanations over semantic graphs.
//!
//! Instances are described by labeled directed graphs. Given a dataset of such
//! graphs with predicted classes, this crate
//!
//! - derives edit costs from a concept taxonomy ([`cost`], [`taxonomy`]),
//! - computes graph edit distance exactly or by assignment ([`ged`]),
//! - trains a graph-convolution embedding whose squared distances track GED
//!   ([`embed`]),
//! - retrieves the closest instance of another class as the counterfactual
//!   ([`retrieval`]),
//! - scores rankings against GED ground truth and aggregates edits
//!   ([`eval`]),
//! - and provides a pyramid-match kernel baseline ([`kernel`]).

pub mod cost;
pub mod embed;
pub mod error;
pub mod eval;
pub mod ged;
pub mod graph;
pub mod kernel;
pub mod lsap;
pub mod retrieval;
pub mod synth;
pub mod taxonomy;

pub use cost::CostModel;
pub use error::{Error, Result};
pub use ged::{EditKind, EditOp, EditPath, GedMatrix, GedResult};
pub use graph::{GraphDataset, SemanticGraph};
pub use taxonomy::Taxonomy;
