//! Distributed random grouping.
//!
//! An idle node becomes leader with probability `leader_prob` per tick and
//! broadcasts a group call (GCM). Idle neighbors join the first call they
//! see by answering with a join acknowledgment (JACK) carrying their value.
//! When the JACK collection timeout fires the leader averages its own value
//! with the collected ones and broadcasts the result (GAM). Calls, JACKs and
//! GAMs carry the leader's iteration id; only members listed in the GAM
//! adopt the result, and JACKs for older iterations are discarded.

use std::sync::Arc;

use rand::Rng;

use crate::aggregate::{value_estimate, AggregateFunction, Estimate, MassPair, NodeId};
use crate::engine::{Ctx, Protocol, TimerToken};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DrgMode {
    Idle,
    Leader {
        iteration: u64,
        /// JACK senders and their values, in arrival order.
        joined: Vec<(NodeId, f64)>,
        timer: TimerToken,
    },
    Member {
        leader: NodeId,
        iteration: u64,
        timer: TimerToken,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrgState {
    pub value: f64,
    pub mode: DrgMode,
    pub iteration_counter: u64,
    pub discarded_jacks: u64,
    pub ignored_gams: u64,
    pub groups_led: u64,
}

impl DrgState {
    pub fn new(value: f64) -> Self {
        DrgState {
            value,
            mode: DrgMode::Idle,
            iteration_counter: 0,
            discarded_jacks: 0,
            ignored_gams: 0,
            groups_led: 0,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.mode == DrgMode::Idle
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DrgMsg {
    Gcm {
        leader: NodeId,
        iteration: u64,
    },
    Jack {
        member: NodeId,
        iteration: u64,
        value: f64,
    },
    Gam {
        leader: NodeId,
        iteration: u64,
        result: f64,
        members: Arc<[NodeId]>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomGrouping {
    pub function: AggregateFunction,
    pub leader_prob: f64,
    /// How long a leader collects JACKs.
    pub jack_timeout: f64,
    /// How long a member waits for its leader's GAM.
    pub gam_timeout: f64,
}

impl RandomGrouping {
    pub const DEFAULT_JACK_TIMEOUT: f64 = 2.0;
    pub const DEFAULT_GAM_TIMEOUT: f64 = 4.0;

    pub fn new(function: AggregateFunction, leader_prob: f64) -> Self {
        RandomGrouping {
            function,
            leader_prob,
            jack_timeout: Self::DEFAULT_JACK_TIMEOUT,
            gam_timeout: Self::DEFAULT_GAM_TIMEOUT,
        }
    }

    pub fn with_timeouts(mut self, jack: f64, gam: f64) -> Self {
        self.jack_timeout = jack;
        self.gam_timeout = gam;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.leader_prob) {
            return Err(Error::config(
                "drg_leader_prob",
                format!("must lie in [0, 1], got {}", self.leader_prob),
            ));
        }
        if !(self.jack_timeout > 0.0 && self.jack_timeout.is_finite()) {
            return Err(Error::config("drg_jack_timeout", "must be positive"));
        }
        if !(self.gam_timeout > 0.0 && self.gam_timeout.is_finite()) {
            return Err(Error::config("drg_gam_timeout", "must be positive"));
        }
        if self.function == AggregateFunction::Sum {
            return Err(Error::config("aggregate", "random grouping supports average and count"));
        }
        Ok(())
    }

    pub fn init(function: AggregateFunction, inputs: &[f64], n: usize, distinguished: NodeId) -> Result<Vec<DrgState>> {
        Ok(crate::aggregate::init_values(function, n, inputs, distinguished)?
            .into_iter()
            .map(DrgState::new)
            .collect())
    }

    pub fn on_gcm(&self, state: &mut DrgState, leader: NodeId, iteration: u64, ctx: &mut Ctx<'_, DrgMsg>) {
        if !state.is_idle() {
            return;
        }
        let timer = ctx.set_timeout(self.gam_timeout);
        state.mode = DrgMode::Member {
            leader,
            iteration,
            timer,
        };
        ctx.send(
            leader,
            DrgMsg::Jack {
                member: ctx.node(),
                iteration,
                value: state.value,
            },
        );
    }

    pub fn on_jack(&self, state: &mut DrgState, member: NodeId, iteration: u64, value: f64) {
        match &mut state.mode {
            DrgMode::Leader {
                iteration: current,
                joined,
                ..
            } if *current == iteration && joined.iter().all(|(m, _)| *m != member) => {
                joined.push((member, value));
            }
            _ => state.discarded_jacks += 1,
        }
    }

    /// Closes the group: the leader adopts the mean of its own value and the
    /// collected JACK values and broadcasts it.
    pub fn finalize(&self, state: &mut DrgState, ctx: &mut Ctx<'_, DrgMsg>) {
        let DrgMode::Leader { iteration, joined, .. } = std::mem::replace(&mut state.mode, DrgMode::Idle) else {
            return;
        };
        let total = joined.iter().fold(state.value, |acc, (_, v)| acc + v);
        let result = total / (joined.len() + 1) as f64;
        let members: Arc<[NodeId]> = joined.iter().map(|(m, _)| *m).collect();
        for &nbr in ctx.neighbors() {
            ctx.send(
                nbr,
                DrgMsg::Gam {
                    leader: ctx.node(),
                    iteration,
                    result,
                    members: Arc::clone(&members),
                },
            );
        }
        state.value = result;
        state.groups_led += 1;
    }

    pub fn on_gam(
        &self,
        state: &mut DrgState,
        leader: NodeId,
        iteration: u64,
        result: f64,
        members: &[NodeId],
        ctx: &mut Ctx<'_, DrgMsg>,
    ) {
        match state.mode {
            DrgMode::Member {
                leader: l,
                iteration: it,
                timer,
            } if l == leader && it == iteration => {
                if members.contains(&ctx.node()) {
                    state.value = result;
                }
                ctx.cancel_timeout(timer);
                state.mode = DrgMode::Idle;
            }
            _ => state.ignored_gams += 1,
        }
    }
}

impl Protocol for RandomGrouping {
    type State = DrgState;
    type Msg = DrgMsg;

    const CARRIES_MASS: bool = false;

    fn name(&self) -> &'static str {
        "drg"
    }

    fn on_tick(&self, state: &mut DrgState, ctx: &mut Ctx<'_, DrgMsg>) {
        if !state.is_idle() || self.leader_prob <= 0.0 {
            return;
        }
        if self.leader_prob < 1.0 && !ctx.rng().gen_bool(self.leader_prob) {
            return;
        }
        state.iteration_counter += 1;
        let iteration = state.iteration_counter;
        let me = ctx.node();
        for &nbr in ctx.neighbors() {
            ctx.send(nbr, DrgMsg::Gcm { leader: me, iteration });
        }
        let timer = ctx.set_timeout(self.jack_timeout);
        state.mode = DrgMode::Leader {
            iteration,
            joined: Vec::new(),
            timer,
        };
    }

    fn on_message(&self, state: &mut DrgState, _from: NodeId, msg: DrgMsg, ctx: &mut Ctx<'_, DrgMsg>) {
        match msg {
            DrgMsg::Gcm { leader, iteration } => self.on_gcm(state, leader, iteration, ctx),
            DrgMsg::Jack {
                member,
                iteration,
                value,
            } => self.on_jack(state, member, iteration, value),
            DrgMsg::Gam {
                leader,
                iteration,
                result,
                members,
            } => self.on_gam(state, leader, iteration, result, &members, ctx),
        }
    }

    fn on_timeout(&self, state: &mut DrgState, token: TimerToken, ctx: &mut Ctx<'_, DrgMsg>) {
        match state.mode {
            DrgMode::Leader { timer, .. } if timer == token => self.finalize(state, ctx),
            DrgMode::Member { timer, .. } if timer == token => state.mode = DrgMode::Idle,
            _ => {}
        }
    }

    fn node_mass(&self, state: &DrgState) -> MassPair {
        MassPair::new(state.value, 0.0)
    }

    fn estimate(&self, state: &DrgState) -> Estimate {
        value_estimate(state.value, self.function)
    }
}
