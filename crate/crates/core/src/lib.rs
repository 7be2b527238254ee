//! Topology-aware differentially private decentralized SGD.
//!
//! The crate is split along the lines of the system it simulates:
//!
//! - [`topology`]: communication graphs, non-adjacent neighbor sets and the
//!   greedy cover that decides which received estimate can mask which
//!   outgoing one.
//! - [`privacy`]: Gaussian noise, calibration of the initial noise parameter,
//!   step decay and the reduced-noise calculus.
//! - [`learning`]: models, datasets, gradients, clipping and the estimate
//!   update arithmetic.
//! - [`protocol`]: synchronous and asynchronous round engines over a simulated
//!   network.
//! - [`harness`]: configuration, experiment orchestration, sweeps and CSV
//!   output.

pub mod harness;
pub mod learning;
pub mod privacy;
pub mod protocol;
pub mod seed;
pub mod topology;

pub use topology::{AgentId, CoverPlan, Graph, Topology};
