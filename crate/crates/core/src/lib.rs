//! Exploration rewards built from state entropy.
//!
//! The crate combines two intrinsic signals. The episodic reward spreads the
//! entropy of a finished episode back over the states it contains, and the
//! lifelong reward measures how far a state is from everything the agent has
//! ever stored, using an approximate kNN graph as the archive.
//!
//! Module map:
//! - [`encoder`]: fixed observation-to-state mapping.
//! - [`entropy`]: KDE, Kozachenko-Leonenko and matrix-based Rényi estimators.
//! - [`knn_graph`]: append-only kNN graph with greedy search and online insertion.
//! - [`rewards`]: episodic/lifelong reward assembly and decomposition losses.
//! - [`envs`]: grid maze and 2-D point-mass world.
//! - [`agents`]: tabular Q-learning and the off-policy training loop.
//! - [`metrics`]: evaluation entropy, coverage, CSV and PGM output.
//! - [`checks`]: self-checks with measured values, used by `element verify`.

pub mod agents;
pub mod checks;
pub mod encoder;
pub mod entropy;
pub mod envs;
pub mod error;
pub mod knn_graph;
pub mod metrics;
pub mod rewards;
mod state;

pub use error::{Error, Result};
pub use state::{Episode, StateKey, StatePoint};
