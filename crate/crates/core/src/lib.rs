//! Deterministic simulation of averaging-based aggregation protocols:
//! push-sum, push-pull gossip with its back-cancellation and ordered-wait
//! variants, and distributed random grouping.
//!
//! A [`engine::Simulation`] runs one [`engine::Protocol`] on one
//! [`Topology`] in lock-step rounds or in continuous time, with optional
//! message loss and crash-stop failures, and keeps a ledger of where all
//! mass is. [`metrics`] turns a run into error curves and
//! [`experiments`] runs seeded multi-trial sweeps and writes CSVs.

pub mod aggregate;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod protocols;
pub mod scenarios;
pub mod topology;

pub use aggregate::{AggregateFunction, Estimate, MassPair, NodeId, EPSILON_W};
pub use error::{Error, Result};
pub use topology::Topology;
