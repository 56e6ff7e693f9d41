use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::context::{Action, Ctx, Protocol, TimerToken};
use super::ledger::{MassAudit, MassLedger};
use super::transport::{EngineConfig, Envelope, EnvelopeId, Mode, Transmit};
use crate::aggregate::{Estimate, MassPair, NodeId};
use crate::error::{Error, Result};
use crate::topology::Topology;

/// Gap inserted after the previous delivery on a channel when a later
/// envelope would otherwise overtake it.
pub const FIFO_EPSILON: f64 = 1e-9;

/// Relative tolerance of the per-event ledger audit.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

const DRAIN_ROUND_LIMIT: u64 = 1_000_000;

/// Delivery time that keeps a channel FIFO given the last delivery time
/// scheduled on it.
pub fn fifo_adjust(sampled: f64, last_on_channel: Option<f64>) -> f64 {
    match last_on_channel {
        Some(last) if sampled <= last => last + FIFO_EPSILON,
        _ => sampled,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EngineStats {
    pub messages_sent: u64,
    pub delivered: u64,
    /// Envelopes dropped by the loss process (including scripted drops).
    pub lost_in_transit: u64,
    /// Envelopes destroyed because their destination had crashed.
    pub lost_to_crash: u64,
    pub ticks: u64,
    pub timeouts_fired: u64,
    pub crashes: u64,
    /// Crash requests for nodes that were already down.
    pub redundant_crashes: u64,
    pub audited_events: u64,
    pub audit_failures: u64,
    pub worst_event_deviation: f64,
    /// A drain gave up before the system went quiet.
    pub drain_stalled: bool,
}

/// One entry of the optional event trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceEvent {
    Tick {
        time: f64,
        node: NodeId,
    },
    Deliver {
        time: f64,
        id: EnvelopeId,
        src: NodeId,
        dst: NodeId,
        channel_seq: u64,
    },
    Lost {
        time: f64,
        id: EnvelopeId,
        src: NodeId,
        dst: NodeId,
    },
    Timeout {
        time: f64,
        node: NodeId,
        token: TimerToken,
    },
    Crash {
        time: f64,
        node: NodeId,
    },
}

#[derive(Debug, Clone, Copy)]
struct Timer {
    node: NodeId,
    fire_at: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Channel {
    next_seq: u64,
    last_deliver: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Crash,
    Deliver(EnvelopeId),
    Timeout(TimerToken),
    Tick,
}

impl EventKind {
    fn rank(self) -> u8 {
        match self {
            EventKind::Crash => 0,
            EventKind::Deliver(_) => 1,
            EventKind::Timeout(_) => 2,
            EventKind::Tick => 3,
        }
    }
}

/// Async event; ordered by (time, kind, channel seq or token, node, insertion).
#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    node: NodeId,
    order: u64,
    kind: EventKind,
}

impl Event {
    fn key(&self) -> (u8, u64, NodeId, u64) {
        (self.kind.rank(), self.seq, self.node, self.order)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then_with(|| self.key().cmp(&other.key()))
    }
}

/// Deterministic single-threaded simulation of one protocol on one topology.
///
/// In [`Mode::Sync`] each call to [`Simulation::step_round`] delivers all
/// envelopes sent in the previous round (each inbox in shuffled order), fires
/// due timeouts, then ticks every live node in shuffled order. In
/// [`Mode::Async`] nodes tick once per time unit at a random phase and
/// envelopes take a random delay.
pub struct Simulation<P: Protocol> {
    protocol: P,
    topology: Arc<Topology>,
    states: Vec<P::State>,
    alive: Vec<bool>,
    live: usize,
    config: EngineConfig,
    rng: ChaCha8Rng,
    net_rng: ChaCha8Rng,
    now: f64,
    rounds: u64,
    in_flight: BTreeMap<EnvelopeId, Envelope<P::Msg>>,
    queue: BinaryHeap<Reverse<Event>>,
    timers: BTreeMap<TimerToken, Timer>,
    next_token: u64,
    next_envelope: u64,
    next_order: u64,
    channels: HashMap<(NodeId, NodeId), Channel>,
    pending_crashes: VecDeque<(f64, NodeId)>,
    ledger: MassLedger,
    stats: EngineStats,
    scripts: BTreeMap<NodeId, VecDeque<NodeId>>,
    scratch: Vec<Action<P::Msg>>,
    draining: bool,
    parked_ticks: Vec<(f64, NodeId)>,
    trace: Option<Vec<TraceEvent>>,
}

impl<P: Protocol> Simulation<P> {
    pub fn new(
        protocol: P,
        topology: Arc<Topology>,
        states: Vec<P::State>,
        config: EngineConfig,
        seed: u64,
    ) -> Result<Self> {
        let n = topology.len();
        if states.len() != n {
            return Err(Error::config(
                "nodes",
                format!("{} initial states for {n} nodes", states.len()),
            ));
        }
        config.validate(n)?;
        let rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net_rng = ChaCha8Rng::seed_from_u64(seed);
        net_rng.set_stream(1);
        let initial: MassPair = states.iter().map(|s| protocol.node_mass(s)).sum();
        let mut crashes = config.faults.crash_schedule.clone();
        crashes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut sim = Simulation {
            protocol,
            topology,
            states,
            alive: vec![true; n],
            live: n,
            config,
            rng,
            net_rng,
            now: 0.0,
            rounds: 0,
            in_flight: BTreeMap::new(),
            queue: BinaryHeap::new(),
            timers: BTreeMap::new(),
            next_token: 0,
            next_envelope: 0,
            next_order: 0,
            channels: HashMap::new(),
            pending_crashes: VecDeque::new(),
            ledger: MassLedger::new(initial),
            stats: EngineStats::default(),
            scripts: BTreeMap::new(),
            scratch: Vec::new(),
            draining: false,
            parked_ticks: Vec::new(),
            trace: None,
        };
        match sim.config.mode {
            Mode::Sync => sim.pending_crashes = crashes.into(),
            Mode::Async => {
                for (t, node) in crashes {
                    sim.push_event(t, 0, node, EventKind::Crash);
                }
                for i in 0..n {
                    let phase = if sim.config.zero_tick_phase {
                        0.0
                    } else {
                        sim.rng.gen::<f64>()
                    };
                    sim.push_event(phase + 1.0, 0, NodeId::from(i), EventKind::Tick);
                }
            }
        }
        Ok(sim)
    }

    /// Starts recording every processed event.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn protocol(&self) -> &P {
        &self.protocol
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[P::State] {
        &self.states
    }

    pub fn state(&self, node: NodeId) -> &P::State {
        &self.states[node.index()]
    }

    pub fn is_alive(&self, node: NodeId) -> bool {
        self.alive[node.index()]
    }

    pub fn live_count(&self) -> usize {
        self.live
    }

    pub fn stats(&self) -> &EngineStats {
        &self.stats
    }

    pub fn ledger(&self) -> &MassLedger {
        &self.ledger
    }

    pub fn is_draining(&self) -> bool {
        self.draining
    }

    /// Estimates of live nodes.
    pub fn live_estimates(&self) -> impl Iterator<Item = Estimate> + '_ {
        self.states
            .iter()
            .zip(&self.alive)
            .filter(|(_, &a)| a)
            .map(|(s, _)| self.protocol.estimate(s))
    }

    pub fn max_buffered(&self) -> usize {
        self.states
            .iter()
            .zip(&self.alive)
            .filter(|(_, &a)| a)
            .map(|(s, _)| self.protocol.buffered(s))
            .max()
            .unwrap_or(0)
    }

    /// Mass summed over live nodes.
    pub fn node_mass(&self) -> MassPair {
        self.states
            .iter()
            .zip(&self.alive)
            .filter(|(_, &a)| a)
            .map(|(s, _)| self.protocol.node_mass(s))
            .sum()
    }

    /// Mass held by live nodes plus mass in flight.
    pub fn system_mass(&self) -> MassPair {
        self.node_mass() + self.ledger.in_flight
    }

    pub fn audit(&self) -> MassAudit {
        self.ledger.audit(self.node_mass())
    }

    pub fn in_flight(&self) -> impl Iterator<Item = &Envelope<P::Msg>> {
        self.in_flight.values()
    }

    pub fn pending_timers(&self) -> usize {
        self.timers.len()
    }

    pub fn is_quiescent(&self) -> bool {
        self.in_flight.is_empty() && self.timers.is_empty()
    }

    /// Advances by one sampling period: one round (sync) or one time unit
    /// (async).
    pub fn advance(&mut self) {
        match self.config.mode {
            Mode::Sync => self.step_round(),
            Mode::Async => {
                let target = self.now.floor() + 1.0;
                self.run_until(target);
            }
        }
    }

    /// One lock-step round.
    pub fn step_round(&mut self) {
        assert_eq!(self.config.mode, Mode::Sync, "step_round requires sync mode");
        self.rounds += 1;
        self.now = self.rounds as f64;

        while let Some(&(t, node)) = self.pending_crashes.front() {
            if t > self.now {
                break;
            }
            self.pending_crashes.pop_front();
            self.crash(node);
        }

        let now = self.now;
        let (mut due, keep): (Vec<_>, Vec<_>) = std::mem::take(&mut self.in_flight)
            .into_values()
            .partition(|e| e.deliver_time <= now);
        self.in_flight = keep.into_iter().map(|e| (e.id, e)).collect();
        due.sort_by_key(|e| e.dst);
        for group in due.chunk_by_mut(|a, b| a.dst == b.dst) {
            group.shuffle(&mut self.rng);
        }
        for env in due {
            self.deliver_envelope(env);
        }

        let mut fired: Vec<(f64, TimerToken)> = self
            .timers
            .iter()
            .filter(|(_, t)| t.fire_at <= now)
            .map(|(&tok, t)| (t.fire_at, tok))
            .collect();
        fired.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, token) in fired {
            self.fire_timer(token);
        }

        if !self.draining {
            let mut order: Vec<NodeId> = (0..self.len()).filter(|&i| self.alive[i]).map(NodeId::from).collect();
            order.shuffle(&mut self.rng);
            for node in order {
                self.tick(node);
            }
        }
    }

    /// Processes async events up to and including `t_end`.
    pub fn run_until(&mut self, t_end: f64) {
        assert_eq!(self.config.mode, Mode::Async, "run_until requires async mode");
        while let Some(Reverse(ev)) = self.queue.peek() {
            if ev.time > t_end {
                break;
            }
            let Reverse(ev) = self.queue.pop().expect("peeked");
            self.process(ev);
        }
        self.now = self.now.max(t_end);
    }

    /// Runs for `periods` rounds or time units.
    pub fn run(&mut self, periods: u64) {
        for _ in 0..periods {
            self.advance();
        }
    }

    fn process(&mut self, ev: Event) {
        self.now = ev.time;
        match ev.kind {
            EventKind::Crash => self.crash(ev.node),
            EventKind::Deliver(id) => {
                if let Some(env) = self.in_flight.remove(&id) {
                    self.deliver_envelope(env);
                }
            }
            EventKind::Timeout(token) => {
                if self.timers.get(&token).is_some_and(|t| t.fire_at == ev.time) {
                    self.fire_timer(token);
                }
            }
            EventKind::Tick => {
                if !self.alive[ev.node.index()] {
                    return;
                }
                if self.draining {
                    self.parked_ticks.push((ev.time, ev.node));
                } else {
                    self.tick(ev.node);
                    self.push_event(ev.time + 1.0, 0, ev.node, EventKind::Tick);
                }
            }
        }
    }

    /// Stops new protocol activity and lets everything in progress settle:
    /// all in-flight envelopes are delivered (or lost per the fault plan) and
    /// pending timeouts fire. Returns the ledger audit at the quiet point.
    pub fn drain(&mut self) -> MassAudit {
        self.draining = true;
        match self.config.mode {
            Mode::Sync => {
                let mut rounds = 0;
                while !self.is_quiescent() {
                    if rounds == DRAIN_ROUND_LIMIT {
                        self.stats.drain_stalled = true;
                        break;
                    }
                    self.step_round();
                    rounds += 1;
                }
            }
            Mode::Async => {
                while !self.is_quiescent() {
                    match self.queue.pop() {
                        Some(Reverse(ev)) => self.process(ev),
                        None => {
                            self.stats.drain_stalled = true;
                            break;
                        }
                    }
                }
            }
        }
        self.audit()
    }

    /// Re-enables ticks after a drain.
    pub fn resume(&mut self) {
        self.draining = false;
        let now = self.now;
        for (t, node) in std::mem::take(&mut self.parked_ticks) {
            let next = t + ((now - t).floor() + 1.0).max(0.0);
            self.push_event(next, 0, node, EventKind::Tick);
        }
    }

    /// Invokes the tick handler of `node` now.
    pub fn tick(&mut self, node: NodeId) {
        if !self.alive[node.index()] {
            return;
        }
        self.stats.ticks += 1;
        self.record(TraceEvent::Tick { time: self.now, node });
        self.dispatch(node, |p, s, ctx| p.on_tick(s, ctx));
    }

    /// Delivers a specific in-flight envelope now, out of schedule.
    pub fn deliver(&mut self, id: EnvelopeId) -> Result<()> {
        let env = self
            .in_flight
            .remove(&id)
            .ok_or_else(|| Error::config("envelope", format!("{id:?} is not in flight")))?;
        self.deliver_envelope(env);
        Ok(())
    }

    /// Destroys a specific in-flight envelope as if the network lost it.
    pub fn drop_envelope(&mut self, id: EnvelopeId) -> Result<()> {
        let env = self
            .in_flight
            .remove(&id)
            .ok_or_else(|| Error::config("envelope", format!("{id:?} is not in flight")))?;
        let mass = self.protocol.message_mass(&env.payload);
        self.ledger.in_flight -= mass;
        self.stats.lost_in_transit += 1;
        self.record(TraceEvent::Lost {
            time: self.now,
            id: env.id,
            src: env.src,
            dst: env.dst,
        });
        self.book_loss(env.src, &env.payload, mass);
        self.audit_event();
        Ok(())
    }

    /// Fires every pending timer of `node` now, in token order.
    pub fn fire_timers(&mut self, node: NodeId) {
        let tokens: Vec<TimerToken> = self
            .timers
            .iter()
            .filter(|(_, t)| t.node == node)
            .map(|(&tok, _)| tok)
            .collect();
        for token in tokens {
            self.fire_timer(token);
        }
    }

    /// Queues `peer` as the next peer chosen by `node`.
    pub fn script_peer(&mut self, node: NodeId, peer: NodeId) {
        self.scripts.entry(node).or_default().push_back(peer);
    }

    /// Crash-stop: the node stops, its mass and all envelopes addressed to it
    /// are booked as lost, and its timers are cancelled.
    pub fn crash(&mut self, node: NodeId) {
        if !self.alive[node.index()] {
            self.stats.redundant_crashes += 1;
            return;
        }
        self.alive[node.index()] = false;
        self.live -= 1;
        self.stats.crashes += 1;
        self.record(TraceEvent::Crash { time: self.now, node });
        self.ledger.lost += self.protocol.node_mass(&self.states[node.index()]);
        let doomed: Vec<EnvelopeId> = self
            .in_flight
            .values()
            .filter(|e| e.dst == node)
            .map(|e| e.id)
            .collect();
        for id in doomed {
            let env = self.in_flight.remove(&id).expect("listed");
            let mass = self.protocol.message_mass(&env.payload);
            self.ledger.in_flight -= mass;
            self.stats.lost_to_crash += 1;
            self.book_loss(env.src, &env.payload, mass);
        }
        self.timers.retain(|_, t| t.node != node);
        self.audit_event();
    }

    fn fire_timer(&mut self, token: TimerToken) {
        let Some(timer) = self.timers.remove(&token) else {
            return;
        };
        if !self.alive[timer.node.index()] {
            return;
        }
        self.stats.timeouts_fired += 1;
        self.record(TraceEvent::Timeout {
            time: self.now,
            node: timer.node,
            token,
        });
        self.dispatch(timer.node, |p, s, ctx| p.on_timeout(s, token, ctx));
    }

    fn deliver_envelope(&mut self, env: Envelope<P::Msg>) {
        let mass = self.protocol.message_mass(&env.payload);
        self.ledger.in_flight -= mass;
        if !self.alive[env.dst.index()] {
            self.stats.lost_to_crash += 1;
            self.record(TraceEvent::Lost {
                time: self.now,
                id: env.id,
                src: env.src,
                dst: env.dst,
            });
            self.book_loss(env.src, &env.payload, mass);
            self.audit_event();
            return;
        }
        self.stats.delivered += 1;
        self.record(TraceEvent::Deliver {
            time: self.now,
            id: env.id,
            src: env.src,
            dst: env.dst,
            channel_seq: env.channel_seq,
        });
        let Envelope { src, dst, payload, .. } = env;
        self.dispatch(dst, move |p, s, ctx| p.on_message(s, src, payload, ctx));
    }

    fn book_loss(&mut self, src: NodeId, msg: &P::Msg, mass: MassPair) {
        self.ledger.lost += mass;
        if self.protocol.detects_loss()
            && self.alive[src.index()]
            && self.protocol.on_send_failed(&mut self.states[src.index()], msg)
        {
            self.ledger.lost -= mass;
            self.ledger.recovered += mass;
        }
    }

    fn dispatch<F>(&mut self, node: NodeId, f: F)
    where
        F: FnOnce(&P, &mut P::State, &mut Ctx<'_, P::Msg>),
    {
        let actions = std::mem::take(&mut self.scratch);
        let actions = {
            let Simulation {
                protocol,
                topology,
                states,
                rng,
                scripts,
                next_token,
                now,
                ..
            } = self;
            let mut ctx = Ctx::new(node, *now, topology, rng, scripts.get_mut(&node), next_token, actions);
            f(protocol, &mut states[node.index()], &mut ctx);
            ctx.into_actions()
        };
        self.apply(node, actions);
        self.audit_event();
    }

    fn apply(&mut self, node: NodeId, mut actions: Vec<Action<P::Msg>>) {
        for action in actions.drain(..) {
            match action {
                Action::Send { dst, msg } => {
                    self.transmit(node, dst, msg);
                }
                Action::SetTimer { token, delay } => {
                    let fire_at = self.now + delay;
                    self.timers.insert(token, Timer { node, fire_at });
                    if self.config.mode == Mode::Async {
                        self.push_event(fire_at, token.0, node, EventKind::Timeout(token));
                    }
                }
                Action::CancelTimer(token) => {
                    self.timers.remove(&token);
                }
            }
        }
        self.scratch = actions;
    }

    /// Hands an envelope to the network: lost with the configured
    /// probability, otherwise scheduled for delivery.
    fn transmit(&mut self, src: NodeId, dst: NodeId, msg: P::Msg) -> Transmit {
        self.stats.messages_sent += 1;
        let id = EnvelopeId(self.next_envelope);
        self.next_envelope += 1;
        let mass = self.protocol.message_mass(&msg);
        let loss_prob = self.config.faults.loss_prob;
        if loss_prob > 0.0 && self.net_rng.gen_bool(loss_prob) {
            self.stats.lost_in_transit += 1;
            self.record(TraceEvent::Lost {
                time: self.now,
                id,
                src,
                dst,
            });
            self.book_loss(src, &msg, mass);
            return Transmit::Lost;
        }
        let channel = self.channels.entry((src, dst)).or_default();
        let channel_seq = channel.next_seq;
        channel.next_seq += 1;
        let deliver_time = match self.config.mode {
            Mode::Sync => self.now + 1.0,
            Mode::Async => {
                let sampled = self.now + self.config.delay.sample(&mut self.net_rng);
                if self.config.faults.fifo {
                    let t = fifo_adjust(sampled, channel.last_deliver);
                    channel.last_deliver = Some(t);
                    t
                } else {
                    sampled
                }
            }
        };
        self.ledger.in_flight += mass;
        if self.config.mode == Mode::Async {
            self.push_event(deliver_time, channel_seq, dst, EventKind::Deliver(id));
        }
        self.in_flight.insert(
            id,
            Envelope {
                id,
                src,
                dst,
                payload: msg,
                send_time: self.now,
                deliver_time,
                channel_seq,
            },
        );
        Transmit::Delivered
    }

    fn push_event(&mut self, time: f64, seq: u64, node: NodeId, kind: EventKind) {
        let order = self.next_order;
        self.next_order += 1;
        self.queue.push(Reverse(Event {
            time,
            seq,
            node,
            order,
            kind,
        }));
    }

    fn record(&mut self, ev: TraceEvent) {
        if let Some(trace) = &mut self.trace {
            trace.push(ev);
        }
    }

    fn audit_event(&mut self) {
        if !(self.config.audit_every_event && P::CARRIES_MASS) {
            return;
        }
        let audit = self.audit();
        self.stats.audited_events += 1;
        self.stats.worst_event_deviation = self.stats.worst_event_deviation.max(audit.relative);
        if !audit.conserved(AUDIT_TOLERANCE) {
            self.stats.audit_failures += 1;
        }
    }
}
