//! Evaluation: adjacency-relation P/R/F1 and structure-only TEDS.

pub mod relations;
pub mod teds;
pub mod tree_edit;

use thiserror::Error;

pub use relations::{relation_counts, relation_score, Direction, RelationCounts, RelationScore, RelationSet};
pub use teds::{struct_tree, teds_struct, teds_trees, StructLabel, StructTree};
pub use tree_edit::{tree_edit_distance, Tree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("prediction is not a valid grid: {0}")]
    InvalidPrediction(String),
    #[error("ground truth is not a valid table: {0}")]
    InvalidGroundTruth(String),
}
