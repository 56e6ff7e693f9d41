//! Push-pull gossip averaging and its two atomic variants.
//!
//! An initiator pushes its value to a neighbor; the neighbor replies with
//! its own value (pull) and then averages; the initiator averages when the
//! pull arrives. The variants differ only in what a node does with a push
//! that arrives while its own exchange is still open:
//!
//! * [`Variant::Original`] answers and averages immediately, so a third
//!   party's value is folded in between the node's push and its pull. This
//!   breaks mass conservation and is kept on purpose.
//! * [`Variant::BackCancel`] answers with the pushed value itself, which
//!   turns the pusher's update into a no-op.
//! * [`Variant::OrderedWait`] buffers the push and serves it once the open
//!   exchange completes. Pushes only go to neighbors with a higher id, so
//!   the waits-for relation is acyclic.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::aggregate::{value_estimate, AggregateFunction, Estimate, MassPair, NodeId};
use crate::engine::{Ctx, Protocol, TimerToken};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Original,
    BackCancel,
    OrderedWait,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Original => "ppg",
            Variant::BackCancel => "ppbc",
            Variant::OrderedWait => "ppow",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Identifies one push/pull exchange; a pull echoes the id of its push.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExchangeId {
    pub initiator: NodeId,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PpMsg {
    Push { value: f64, exchange: ExchangeId },
    Pull { value: f64, exchange: ExchangeId },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingExchange {
    pub peer: NodeId,
    pub exchange: ExchangeId,
    pub pushed_value: f64,
    pub timer: Option<TimerToken>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferedPush {
    pub from: NodeId,
    pub value: f64,
    pub exchange: ExchangeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpState {
    pub value: f64,
    pub uid: NodeId,
    /// Open exchanges this node initiated. At most one except for
    /// [`Variant::Original`], which keeps pushing while waiting.
    pub pending: Vec<PendingExchange>,
    /// Pushes waiting for the open exchange to finish (ordered wait only).
    pub buffer: VecDeque<BufferedPush>,
    pub next_exchange: u64,
    /// Pulls that matched no open exchange and were dropped.
    pub stale_pulls: u64,
    /// Pushes answered by reflection (back cancellation only).
    pub reflected: u64,
    pub max_buffer: usize,
}

impl PpState {
    pub fn new(uid: NodeId, value: f64) -> Self {
        PpState {
            value,
            uid,
            pending: Vec::new(),
            buffer: VecDeque::new(),
            next_exchange: 0,
            stale_pulls: 0,
            reflected: 0,
            max_buffer: 0,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.pending.is_empty()
    }

    /// Peers whose pull this node is waiting for.
    pub fn awaited(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.pending.iter().map(|p| p.peer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushPull {
    pub variant: Variant,
    pub function: AggregateFunction,
    /// Exchange timeout; `None` waits forever.
    pub timeout: Option<f64>,
    /// Probability that an eligible node opens an exchange on a tick.
    pub initiate_prob: f64,
}

impl PushPull {
    pub fn new(variant: Variant, function: AggregateFunction) -> Self {
        PushPull {
            variant,
            function,
            timeout: None,
            initiate_prob: 1.0,
        }
    }

    pub fn with_timeout(mut self, timeout: Option<f64>) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_initiate_prob(mut self, p: f64) -> Self {
        self.initiate_prob = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initiate_prob > 0.0 && self.initiate_prob <= 1.0) {
            return Err(Error::config(
                "initiate_prob",
                format!("must lie in (0, 1], got {}", self.initiate_prob),
            ));
        }
        if let Some(t) = self.timeout {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::config("timeout", format!("must be positive, got {t}")));
            }
        }
        if self.function == AggregateFunction::Sum {
            return Err(Error::config("aggregate", "push-pull supports average and count"));
        }
        Ok(())
    }

    pub fn init(function: AggregateFunction, inputs: &[f64], n: usize, distinguished: NodeId) -> Result<Vec<PpState>> {
        Ok(crate::aggregate::init_values(function, n, inputs, distinguished)?
            .into_iter()
            .enumerate()
            .map(|(i, v)| PpState::new(NodeId::from(i), v))
            .collect())
    }

    /// Reply with the current value, then average with the pushed one.
    fn answer(state: &mut PpState, from: NodeId, value: f64, exchange: ExchangeId, ctx: &mut Ctx<'_, PpMsg>) {
        ctx.send(
            from,
            PpMsg::Pull {
                value: state.value,
                exchange,
            },
        );
        state.value = (state.value + value) / 2.0;
    }

    fn serve_buffer(&self, state: &mut PpState, ctx: &mut Ctx<'_, PpMsg>) {
        if self.variant != Variant::OrderedWait {
            return;
        }
        while let Some(p) = state.buffer.pop_front() {
            Self::answer(state, p.from, p.value, p.exchange, ctx);
        }
    }

    pub fn on_push(
        &self,
        state: &mut PpState,
        from: NodeId,
        value: f64,
        exchange: ExchangeId,
        ctx: &mut Ctx<'_, PpMsg>,
    ) {
        if state.is_idle() || self.variant == Variant::Original {
            Self::answer(state, from, value, exchange, ctx);
            return;
        }
        match self.variant {
            Variant::BackCancel => {
                state.reflected += 1;
                ctx.send(from, PpMsg::Pull { value, exchange });
            }
            Variant::OrderedWait => {
                state.buffer.push_back(BufferedPush { from, value, exchange });
                state.max_buffer = state.max_buffer.max(state.buffer.len());
            }
            Variant::Original => unreachable!(),
        }
    }

    pub fn on_pull(&self, state: &mut PpState, value: f64, exchange: ExchangeId, ctx: &mut Ctx<'_, PpMsg>) {
        let Some(pos) = state.pending.iter().position(|p| p.exchange == exchange) else {
            state.stale_pulls += 1;
            return;
        };
        let open = state.pending.remove(pos);
        state.value = (state.value + value) / 2.0;
        if let Some(t) = open.timer {
            ctx.cancel_timeout(t);
        }
        self.serve_buffer(state, ctx);
    }
}

impl Protocol for PushPull {
    type State = PpState;
    type Msg = PpMsg;

    const CARRIES_MASS: bool = false;

    fn name(&self) -> &'static str {
        self.variant.name()
    }

    fn on_tick(&self, state: &mut PpState, ctx: &mut Ctx<'_, PpMsg>) {
        if self.variant != Variant::Original && !state.is_idle() {
            return;
        }
        if self.initiate_prob < 1.0 && !ctx.rng().gen_bool(self.initiate_prob) {
            return;
        }
        let uid = state.uid;
        let peer = match self.variant {
            Variant::OrderedWait => ctx.pick_peer(|v| v > uid),
            _ => ctx.pick_peer(|_| true),
        };
        let Some(peer) = peer else {
            return;
        };
        let exchange = ExchangeId {
            initiator: ctx.node(),
            seq: state.next_exchange,
        };
        state.next_exchange += 1;
        ctx.send(
            peer,
            PpMsg::Push {
                value: state.value,
                exchange,
            },
        );
        let timer = self.timeout.map(|d| ctx.set_timeout(d));
        state.pending.push(PendingExchange {
            peer,
            exchange,
            pushed_value: state.value,
            timer,
        });
    }

    fn on_message(&self, state: &mut PpState, from: NodeId, msg: PpMsg, ctx: &mut Ctx<'_, PpMsg>) {
        match msg {
            PpMsg::Push { value, exchange } => self.on_push(state, from, value, exchange, ctx),
            PpMsg::Pull { value, exchange } => self.on_pull(state, value, exchange, ctx),
        }
    }

    fn on_timeout(&self, state: &mut PpState, token: TimerToken, ctx: &mut Ctx<'_, PpMsg>) {
        if let Some(pos) = state.pending.iter().position(|p| p.timer == Some(token)) {
            state.pending.remove(pos);
            self.serve_buffer(state, ctx);
        }
    }

    fn node_mass(&self, state: &PpState) -> MassPair {
        MassPair::new(state.value, 0.0)
    }

    fn estimate(&self, state: &PpState) -> Estimate {
        value_estimate(state.value, self.function)
    }

    fn buffered(&self, state: &PpState) -> usize {
        state.buffer.len()
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppg" => Ok(Variant::Original),
            "ppbc" => Ok(Variant::BackCancel),
            "ppow" => Ok(Variant::OrderedWait),
            other => Err(Error::config(
                "protocol",
                format!("unknown push-pull variant `{other}`"),
            )),
        }
    }
}
