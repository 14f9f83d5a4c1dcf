//! Rule-driven fragment allocation for a simulated distributed database.
//!
//! Allocation policy is written as rules over per-node fact bases. Each
//! simulated node evaluates the policy with the embedded [`rules`] engine,
//! the cluster synchronizes fact deltas, and the driver accounts transfer,
//! execution and relocation costs round by round.

pub mod cost;
pub mod network;
pub mod policy;
pub mod rules;
pub mod runtime;
pub mod sim;
