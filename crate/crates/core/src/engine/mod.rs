//! Deterministic discrete-event engine.
//!
//! Two clocks are supported: lock-step rounds ([`Mode::Sync`]) and an
//! event-driven clock with random per-envelope delays ([`Mode::Async`]).
//! Message loss and crash-stop failures are injected through a
//! [`FaultPlan`]. Every envelope that carries mass is tracked by the
//! [`MassLedger`] so the conservation identity can be audited at any point.

mod context;
mod ledger;
mod sim;
mod transport;

pub use context::{Action, Ctx, Protocol, TimerToken};
pub use ledger::{relative_deviation, MassAudit, MassLedger};
pub use sim::{fifo_adjust, EngineStats, Simulation, TraceEvent, AUDIT_TOLERANCE, FIFO_EPSILON};
pub use transport::{DelayDist, EngineConfig, Envelope, EnvelopeId, FaultPlan, Mode, Transmit};
