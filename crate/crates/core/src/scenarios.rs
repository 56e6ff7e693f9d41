//! Hand-scripted message traces.
//!
//! These drive a [`Simulation`] event by event through the engine's manual
//! API (scripted peers, explicit delivery and loss) so that a specific
//! interleaving can be replayed exactly.

use std::sync::Arc;

use crate::aggregate::{AggregateFunction, NodeId};
use crate::engine::{EngineConfig, EnvelopeId, MassAudit, Protocol, Simulation};
use crate::error::{Error, Result};
use crate::protocols::{PpState, PushPull, Variant};
use crate::topology::Topology;

/// Id of the envelope in flight from `src` to `dst` (the oldest if several).
pub fn envelope_between<P: Protocol>(sim: &Simulation<P>, src: NodeId, dst: NodeId) -> Result<EnvelopeId> {
    sim.in_flight()
        .filter(|e| e.src == src && e.dst == dst)
        .map(|e| e.id)
        .min()
        .ok_or_else(|| Error::config("envelope", format!("nothing in flight from {src} to {dst}")))
}

/// Node roles in the three-node interleaving trace. Ids are chosen so that
/// ordered wait may push A to B and C to A.
pub const TRACE_C: NodeId = NodeId(0);
pub const TRACE_A: NodeId = NodeId(1);
pub const TRACE_B: NodeId = NodeId(2);

/// Outcome of [`interleaving_trace`].
#[derive(Debug, Clone)]
pub struct InterleavingOutcome {
    /// Final values of A, B and C.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub audit: MassAudit,
}

/// Three nodes A=`a`, B=`b`, C=`c`, fully connected. A pushes to B and C
/// pushes to A; B's push reaches A's neighbor first, then C's push reaches A
/// before B's pull does, then every remaining message is delivered.
pub fn interleaving_trace(variant: Variant, a: f64, b: f64, c: f64) -> Result<InterleavingOutcome> {
    let protocol = PushPull::new(variant, AggregateFunction::Average);
    let mut values = [0.0; 3];
    values[TRACE_A.index()] = a;
    values[TRACE_B.index()] = b;
    values[TRACE_C.index()] = c;
    let states = values
        .iter()
        .enumerate()
        .map(|(i, &v)| PpState::new(NodeId::from(i), v))
        .collect();
    let mut sim = Simulation::new(
        protocol,
        Arc::new(Topology::complete(3)),
        states,
        EngineConfig::sync(),
        0,
    )?;

    sim.script_peer(TRACE_A, TRACE_B);
    sim.tick(TRACE_A);
    sim.script_peer(TRACE_C, TRACE_A);
    sim.tick(TRACE_C);

    let push_ab = envelope_between(&sim, TRACE_A, TRACE_B)?;
    sim.deliver(push_ab)?;
    let push_ca = envelope_between(&sim, TRACE_C, TRACE_A)?;
    sim.deliver(push_ca)?;
    let pull_ba = envelope_between(&sim, TRACE_B, TRACE_A)?;
    sim.deliver(pull_ba)?;
    while let Some(id) = sim.in_flight().map(|e| e.id).min() {
        sim.deliver(id)?;
    }
    let audit = sim.drain();
    let v = |n: NodeId| sim.state(n).value;
    Ok(InterleavingOutcome {
        a: v(TRACE_A),
        b: v(TRACE_B),
        c: v(TRACE_C),
        audit,
    })
}

/// Which half of a two-node exchange the network loses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LostLeg {
    Push,
    Pull,
}

/// Two nodes with values `a` (initiator) and `b`; one exchange in which the
/// chosen leg is lost. The initiator times out and the run is drained.
pub fn lossy_exchange(variant: Variant, a: f64, b: f64, lost: LostLeg) -> Result<MassAudit> {
    let protocol = PushPull::new(variant, AggregateFunction::Average).with_timeout(Some(3.0));
    let states = vec![PpState::new(NodeId(0), a), PpState::new(NodeId(1), b)];
    let topo = Topology::from_edges(2, [(0, 1)])?;
    let mut sim = Simulation::new(protocol, Arc::new(topo), states, EngineConfig::sync(), 0)?;
    sim.tick(NodeId(0));
    let push = envelope_between(&sim, NodeId(0), NodeId(1))?;
    match lost {
        LostLeg::Push => sim.drop_envelope(push)?,
        LostLeg::Pull => {
            sim.deliver(push)?;
            let pull = envelope_between(&sim, NodeId(1), NodeId(0))?;
            sim.drop_envelope(pull)?;
        }
    }
    Ok(sim.drain())
}
