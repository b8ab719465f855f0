//! Self-supervised graph representation learning by contrasting BFS-sampled
//! subgraphs with their Gaussian-embedded counterparts under Wasserstein and
//! Gromov-Wasserstein InfoNCE losses.
//!
//! Module map:
//!
//! * [`tensor`]: dense tensors and a reverse-mode tape.
//! * [`graph`]: datasets, adjacency normalization, BFS subgraphs, anchors.
//! * [`gnn`]: GCN encoder and the Gaussian embedding head.
//! * [`ot`]: ground costs and exact / entropic / Gromov-Wasserstein solvers.
//! * [`losses`]: KL regularizer and OT InfoNCE objectives.
//! * [`trainer`]: Adam, training loop, linear probe, sweeps and search.
//! * [`synthetic`]: generated graphs for tests and timing runs.

pub mod error;
pub mod gnn;
pub mod graph;
pub mod losses;
pub mod ot;
pub mod synthetic;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
