//! Simulation library for doubly adversarial federated bandits.
//!
//! Agents sit on the nodes of an undirected graph, each facing its own
//! adversarial loss sequence over a shared set of arms. FedExp3 agents
//! combine Exp3-style exploration with gossip averaging of cumulative loss
//! estimates, and regret is measured against the arm that is best for the
//! network on average.
//!
//! Module map:
//! - [`graph`]: complete, grid and random geometric graphs; Laplacian spectra.
//! - [`gossip`]: doubly stochastic gossip matrices and their mixing rate.
//! - [`env`]: loss tensors, including the activated-subset Bernoulli setting.
//! - [`movielens`]: ratings ingestion into a block-constant loss tensor.
//! - [`agents`]: schedules, FedExp3 primitives, GossipUCB.
//! - [`sim`]: round loop, regret accounting, run aggregation.
//! - [`report`]: CSV tables and SVG charts.

// `!(x > 0.0)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod env;
pub mod error;
pub mod gossip;
pub mod graph;
pub mod movielens;
pub mod par;
pub mod report;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
