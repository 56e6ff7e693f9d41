//! Push-sum.
//!
//! Each tick a node folds everything it received into its mass, keeps half
//! and sends the other half to one random neighbor. The estimate is `s / w`.

use crate::aggregate::{AggregateFunction, Estimate, MassPair, NodeId};
use crate::engine::{Ctx, Protocol, TimerToken};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PspState {
    /// Mass committed at the node's last round boundary.
    pub mass: MassPair,
    /// Contributions received since then, including the retained half.
    pub accumulator: MassPair,
}

impl PspState {
    pub fn new(mass: MassPair) -> Self {
        PspState {
            mass,
            accumulator: MassPair::ZERO,
        }
    }

    /// All mass currently held by the node.
    pub fn local_mass(&self) -> MassPair {
        self.mass + self.accumulator
    }

    /// Round boundary: `mass := accumulator`, `accumulator := 0`.
    pub fn commit(&mut self) {
        self.mass += self.accumulator;
        self.accumulator = MassPair::ZERO;
    }

    pub fn receive(&mut self, share: MassPair) {
        self.accumulator += share;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PspMsg(pub MassPair);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PushSum {
    /// Senders are told about every lost share and take it back.
    pub oracle_loss_recovery: bool,
}

impl PushSum {
    pub fn new() -> Self {
        PushSum::default()
    }

    pub fn with_oracle_recovery() -> Self {
        PushSum {
            oracle_loss_recovery: true,
        }
    }

    pub fn init(function: AggregateFunction, inputs: &[f64], n: usize, distinguished: NodeId) -> Result<Vec<PspState>> {
        Ok(crate::aggregate::init_mass_pairs(function, n, inputs, distinguished)?
            .into_iter()
            .map(PspState::new)
            .collect())
    }

    /// Credits a lost share back to its sender.
    pub fn recover_lost(&self, state: &mut PspState, lost: MassPair) -> Result<()> {
        if !self.oracle_loss_recovery {
            return Err(Error::config(
                "oracle_loss_recovery",
                "loss recovery requires oracle loss detection to be enabled",
            ));
        }
        if !lost.is_zero() {
            state.accumulator += lost;
        }
        Ok(())
    }
}

impl Protocol for PushSum {
    type State = PspState;
    type Msg = PspMsg;

    const CARRIES_MASS: bool = true;

    fn name(&self) -> &'static str {
        "psp"
    }

    fn on_tick(&self, state: &mut PspState, ctx: &mut Ctx<'_, PspMsg>) {
        state.commit();
        let Some(peer) = ctx.pick_peer(|_| true) else {
            return;
        };
        let half = state.mass.half();
        // the other half is the share sent; subtract so no mass is created
        let sent = state.mass - half;
        state.accumulator = half;
        state.mass = MassPair::ZERO;
        ctx.send(peer, PspMsg(sent));
    }

    fn on_message(&self, state: &mut PspState, _from: NodeId, msg: PspMsg, _ctx: &mut Ctx<'_, PspMsg>) {
        state.receive(msg.0);
    }

    fn on_timeout(&self, _state: &mut PspState, _token: TimerToken, _ctx: &mut Ctx<'_, PspMsg>) {}

    fn on_send_failed(&self, state: &mut PspState, msg: &PspMsg) -> bool {
        self.recover_lost(state, msg.0).is_ok()
    }

    fn detects_loss(&self) -> bool {
        self.oracle_loss_recovery
    }

    fn node_mass(&self, state: &PspState) -> MassPair {
        state.local_mass()
    }

    fn message_mass(&self, msg: &PspMsg) -> MassPair {
        msg.0
    }

    fn estimate(&self, state: &PspState) -> Estimate {
        state.local_mass().estimate()
    }
}
