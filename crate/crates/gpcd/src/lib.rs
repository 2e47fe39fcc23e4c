//! Personalized community detection on graphs.
//!
//! The offline stage turns a graph into a binary-encoded hierarchical
//! community tree with community embeddings; the online stage evolves
//! populations of cut-link chromosomes that prune the tree into a
//! K-community partition whose resolution is finest near a user's need
//! vector.
//!
//! See the `examples/` directory for one runnable walkthrough per stage and
//! the `gpcd` binary for the file-based pipeline.

pub mod binary_tree;
pub mod error;
pub mod graph;
pub mod hierarchy;
pub mod mapeq;
pub mod rng;

pub use binary_tree::{binarize, normalized_linked_weight, BinaryCommunityTree, Code, CutLink};
pub use error::{Error, Result};
pub use graph::{Graph, VertexId, VertexSet};
pub use hierarchy::{detect_flat, detect_hierarchy, CommunityTree};
pub use mapeq::{map_equation, visit_rates, FlatPartition, MapEquationTerms};
