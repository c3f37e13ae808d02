//! Inference engine for ordered and unordered degree-corrected block
//! structure in directed multigraphs.
//!
//! The crate fits four model variants — plain, degree-corrected,
//! order-aware, and both — to a directed multigraph by minimizing or
//! sampling a description-length posterior over labelled ordered
//! partitions. It exposes the graph and partition machinery, exact
//! log-space description-length terms with incremental deltas, a
//! Metropolis-Hastings sampler with merge-split proposals, synthetic
//! generators, and post-inference analytics (rank marginals, Kendall
//! rank correlation, posterior odds).

pub mod analysis;
pub mod combin;
pub mod dl;
pub mod generate;
pub mod graph;
pub mod mcmc;
pub mod state;

pub use combin::{DlTables, QCapExceeded, DEFAULT_Q_CAP};
pub use dl::{
    delta_description_length, description_length, description_length_state, DlBreakdown,
    ModelVariant,
};
pub use graph::{load_edge_list, DegreeSequence, DirectedMultigraph, EdgeListError, IdPolicy};
pub use state::{AlignmentStats, BlockState, MoveDelta, MoveTarget, Partition};
