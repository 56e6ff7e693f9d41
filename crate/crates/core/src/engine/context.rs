use std::collections::VecDeque;
use std::fmt;

use rand::RngCore;

use crate::aggregate::{Estimate, MassPair, NodeId};
use crate::topology::Topology;

/// Handle for a pending timeout, unique within one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimerToken(pub u64);

/// Effect requested by a handler; applied by the engine once the handler
/// returns, in the order requested.
#[derive(Debug, Clone, PartialEq)]
pub enum Action<M> {
    Send { dst: NodeId, msg: M },
    SetTimer { token: TimerToken, delay: f64 },
    CancelTimer(TimerToken),
}

/// A protocol as a set of node-local handlers.
///
/// Handlers only touch the state of the node they are invoked for; all
/// communication goes through [`Ctx`].
pub trait Protocol {
    type State: Clone + fmt::Debug;
    type Msg: Clone + fmt::Debug;

    /// Whether envelopes carry conserved mass, so the ledger identity holds
    /// after every event and not only at quiescent points.
    const CARRIES_MASS: bool;

    fn name(&self) -> &'static str;

    fn on_tick(&self, state: &mut Self::State, ctx: &mut Ctx<'_, Self::Msg>);

    fn on_message(&self, state: &mut Self::State, from: NodeId, msg: Self::Msg, ctx: &mut Ctx<'_, Self::Msg>);

    fn on_timeout(&self, state: &mut Self::State, token: TimerToken, ctx: &mut Ctx<'_, Self::Msg>);

    /// Called on the sender when one of its envelopes is lost, if
    /// [`Protocol::detects_loss`] is set. Returns true when the payload's
    /// mass was credited back to the sender.
    fn on_send_failed(&self, _state: &mut Self::State, _msg: &Self::Msg) -> bool {
        false
    }

    /// Oracle loss detection: senders learn about every lost envelope.
    fn detects_loss(&self) -> bool {
        false
    }

    fn node_mass(&self, state: &Self::State) -> MassPair;

    fn message_mass(&self, _msg: &Self::Msg) -> MassPair {
        MassPair::ZERO
    }

    fn estimate(&self, state: &Self::State) -> Estimate;

    /// Number of buffered requests held by the node.
    fn buffered(&self, _state: &Self::State) -> usize {
        0
    }
}

/// Per-invocation view of the world handed to protocol handlers.
pub struct Ctx<'a, M> {
    node: NodeId,
    now: f64,
    topology: &'a Topology,
    rng: &'a mut dyn RngCore,
    script: Option<&'a mut VecDeque<NodeId>>,
    next_token: &'a mut u64,
    actions: Vec<Action<M>>,
}

impl<'a, M> Ctx<'a, M> {
    pub(crate) fn new(
        node: NodeId,
        now: f64,
        topology: &'a Topology,
        rng: &'a mut dyn RngCore,
        script: Option<&'a mut VecDeque<NodeId>>,
        next_token: &'a mut u64,
        actions: Vec<Action<M>>,
    ) -> Self {
        Ctx {
            node,
            now,
            topology,
            rng,
            script,
            next_token,
            actions,
        }
    }

    /// A context outside any engine, for driving handlers by hand.
    pub fn detached(node: NodeId, topology: &'a Topology, rng: &'a mut dyn RngCore, next_token: &'a mut u64) -> Self {
        Ctx::new(node, 0.0, topology, rng, None, next_token, Vec::new())
    }

    #[inline]
    pub fn node(&self) -> NodeId {
        self.node
    }

    #[inline]
    pub fn now(&self) -> f64 {
        self.now
    }

    #[inline]
    pub fn neighbors(&self) -> &'a [NodeId] {
        self.topology.neighbors(self.node)
    }

    #[inline]
    pub fn rng(&mut self) -> &mut dyn RngCore {
        &mut *self.rng
    }

    /// Uniform neighbor accepted by `filter`, unless a scripted peer is
    /// queued for this node and passes the filter.
    pub fn pick_peer(&mut self, filter: impl Fn(NodeId) -> bool) -> Option<NodeId> {
        if let Some(queue) = self.script.as_deref_mut() {
            if let Some(&peer) = queue.front() {
                if filter(peer) {
                    queue.pop_front();
                    return Some(peer);
                }
            }
        }
        self.topology.sample_neighbor(self.node, filter, &mut *self.rng)
    }

    pub fn send(&mut self, dst: NodeId, msg: M) {
        self.actions.push(Action::Send { dst, msg });
    }

    pub fn set_timeout(&mut self, delay: f64) -> TimerToken {
        let token = TimerToken(*self.next_token);
        *self.next_token += 1;
        self.actions.push(Action::SetTimer { token, delay });
        token
    }

    pub fn cancel_timeout(&mut self, token: TimerToken) {
        self.actions.push(Action::CancelTimer(token));
    }

    pub fn actions(&self) -> &[Action<M>] {
        &self.actions
    }

    pub fn into_actions(self) -> Vec<Action<M>> {
        self.actions
    }

    /// Messages sent so far, in order.
    pub fn sent(&self) -> impl Iterator<Item = (NodeId, &M)> {
        self.actions.iter().filter_map(|a| match a {
            Action::Send { dst, msg } => Some((*dst, msg)),
            _ => None,
        })
    }
}
