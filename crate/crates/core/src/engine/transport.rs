use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::aggregate::NodeId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EnvelopeId(pub u64);

/// A message in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<M> {
    pub id: EnvelopeId,
    pub src: NodeId,
    pub dst: NodeId,
    pub payload: M,
    pub send_time: f64,
    pub deliver_time: f64,
    /// Per-(src, dst) counter, starting at 0.
    pub channel_seq: u64,
}

/// Execution regime of the clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Lock-step rounds; every envelope takes exactly one round.
    Sync,
    /// Event-driven with random per-envelope delays.
    Async,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Sync => "sync",
            Mode::Async => "async",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sync" => Ok(Mode::Sync),
            "async" => Ok(Mode::Async),
            other => Err(Error::config(
                "mode",
                format!("unknown mode `{other}` (expected one of: sync, async)"),
            )),
        }
    }
}

/// Uniform message delay in tick periods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayDist {
    pub d_min: f64,
    pub d_max: f64,
}

impl Default for DelayDist {
    fn default() -> Self {
        DelayDist { d_min: 0.1, d_max: 2.0 }
    }
}

impl DelayDist {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0 && self.d_min.is_finite()) {
            return Err(Error::config("d_min", format!("must be positive, got {}", self.d_min)));
        }
        if !(self.d_max >= self.d_min && self.d_max.is_finite()) {
            return Err(Error::config(
                "d_max",
                format!("must be finite and at least d_min = {}, got {}", self.d_min, self.d_max),
            ));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.d_max > self.d_min {
            rng.gen_range(self.d_min..self.d_max)
        } else {
            self.d_min
        }
    }
}

/// Faults injected into one run.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultPlan {
    /// Independent loss probability per envelope.
    pub loss_prob: f64,
    /// Per-channel FIFO delivery (async only; sync is trivially FIFO).
    pub fifo: bool,
    /// `(time, node)` crash-stop events.
    pub crash_schedule: Vec<(f64, NodeId)>,
}

impl Default for FaultPlan {
    fn default() -> Self {
        FaultPlan {
            loss_prob: 0.0,
            fifo: true,
            crash_schedule: Vec::new(),
        }
    }
}

impl FaultPlan {
    pub fn is_fault_free(&self) -> bool {
        self.loss_prob == 0.0 && self.crash_schedule.is_empty()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(Error::config(
                "loss_prob",
                format!("must lie in [0, 1], got {}", self.loss_prob),
            ));
        }
        for &(t, node) in &self.crash_schedule {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::config("crash_spec", format!("bad crash time {t}")));
            }
            if node.index() >= n {
                return Err(Error::config(
                    "crash_spec",
                    format!("crash target {node} outside [0, {n})"),
                ));
            }
        }
        Ok(())
    }
}

/// Engine parameters for one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub mode: Mode,
    pub delay: DelayDist,
    pub faults: FaultPlan,
    /// Check the ledger identity after every event (mass-carrying protocols).
    pub audit_every_event: bool,
    /// Async only: every node ticks at integer times instead of a random phase.
    pub zero_tick_phase: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: Mode::Sync,
            delay: DelayDist::default(),
            faults: FaultPlan::default(),
            audit_every_event: false,
            zero_tick_phase: false,
        }
    }
}

impl EngineConfig {
    pub fn sync() -> Self {
        EngineConfig::default()
    }

    pub fn asynchronous() -> Self {
        EngineConfig {
            mode: Mode::Async,
            ..EngineConfig::default()
        }
    }

    pub fn with_faults(mut self, faults: FaultPlan) -> Self {
        self.faults = faults;
        self
    }

    pub fn with_loss(mut self, loss_prob: f64) -> Self {
        self.faults.loss_prob = loss_prob;
        self
    }

    pub fn audited(mut self) -> Self {
        self.audit_every_event = true;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.mode == Mode::Async {
            self.delay.validate()?;
        }
        self.faults.validate(n)
    }
}

/// Result of handing an envelope to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transmit {
    Delivered,
    Lost,
}
