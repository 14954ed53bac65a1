//! Sparse interpretable node and word embeddings built from community
//! structure.
//!
//! The pipeline is: load or build a [`WeightedGraph`], detect communities
//! with multi-resolution [`louvain`], then derive one embedding dimension per
//! community, either by node recall ([`sinr_nr`]) or by a factorization of
//! the adjacency against the community membership matrix ([`sinr_mf`]).
//!
//! Word co-occurrence networks come from [`cooc`]; [`eval`] holds the graph
//! and word evaluation protocols and [`interpret`] the dimension probing and
//! word-intrusion tooling.

pub mod community;
pub mod cooc;
pub mod embed;
pub mod error;
pub mod eval;
pub mod graph;
pub mod interpret;
pub mod learn;
pub mod seed;
pub mod stats;

pub use community::{louvain, modularity, nmi, LouvainConfig, Partition};
pub use embed::{
    cosine_similarity, node_recall, sinr_mf, sinr_nr, top_k_neighbors, LabeledEmbedding,
    MfConfig, MfOutput, SparseEmbedding,
};
pub use error::{Error, Result};
pub use graph::{GraphBuilder, NodeLabelMap, WeightedGraph};
