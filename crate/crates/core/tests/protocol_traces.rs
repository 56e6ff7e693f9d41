use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use aggsim::engine::{DelayDist, EngineConfig, Mode, Protocol, Simulation};
use aggsim::protocols::{DrgState, PpState, PushPull, PushSum, RandomGrouping, Variant};
use aggsim::scenarios::{envelope_between, interleaving_trace};
use aggsim::{AggregateFunction, NodeId, Topology};

fn graph(n: usize, seed: u64) -> Arc<Topology> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Topology::erdos_renyi(n, 5.0, &mut rng).unwrap();
    Arc::new(g.induced(&g.largest_connected_component()))
}

fn inputs(m: usize) -> Vec<f64> {
    (0..m).map(|i| (i % 17) as f64).collect()
}

fn spread<P: Protocol>(sim: &Simulation<P>) -> f64 {
    let est: Vec<f64> = sim.live_estimates().map(|e| e.value().unwrap()).collect();
    let lo = est.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = est.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

#[test]
fn back_cancel_reflection_leaves_pusher_unchanged() {
    // C pushes into A while A waits on B; C gets its own value back
    let o = interleaving_trace(Variant::BackCancel, 1.5, -3.25, 7.0).unwrap();
    assert_eq!(o.c, 7.0);
    assert_eq!(o.a, (1.5 + -3.25) / 2.0);
    assert_eq!(o.b, o.a);
    assert_eq!(o.audit.deviation.s, 0.0);
}

#[test]
fn ordered_wait_serves_buffered_push_after_own_exchange() {
    let o = interleaving_trace(Variant::OrderedWait, 1.5, -3.25, 7.0).unwrap();
    let a_mid = (1.5 + -3.25) / 2.0;
    assert_eq!(o.b, a_mid);
    assert_eq!(o.a, (a_mid + 7.0) / 2.0);
    assert_eq!(o.c, o.a);
}

#[test]
fn reflected_pull_is_counted() {
    let topo = Arc::new(Topology::complete(3));
    let states = (0..3).map(|i| PpState::new(NodeId(i), i as f64)).collect();
    let protocol = PushPull::new(Variant::BackCancel, AggregateFunction::Average);
    let mut sim = Simulation::new(protocol, topo, states, EngineConfig::sync(), 1).unwrap();
    sim.script_peer(NodeId(1), NodeId(2));
    sim.tick(NodeId(1));
    sim.script_peer(NodeId(0), NodeId(1));
    sim.tick(NodeId(0));
    let id = envelope_between(&sim, NodeId(0), NodeId(1)).unwrap();
    sim.deliver(id).unwrap();
    assert_eq!(sim.state(NodeId(1)).reflected, 1);
    let back = envelope_between(&sim, NodeId(1), NodeId(0)).unwrap();
    sim.deliver(back).unwrap();
    assert_eq!(sim.state(NodeId(0)).value, 0.0);
    assert!(sim.state(NodeId(0)).is_idle());
}

#[test]
fn highest_uid_never_initiates_under_ordered_wait() {
    let topo = graph(40, 2);
    let m = topo.len();
    let states = PushPull::init(AggregateFunction::Average, &inputs(m), m, NodeId(0)).unwrap();
    let protocol = PushPull::new(Variant::OrderedWait, AggregateFunction::Average);
    let mut sim = Simulation::new(protocol, topo, states, EngineConfig::sync(), 3).unwrap();
    let top = NodeId::from(m - 1);
    for _ in 0..50 {
        sim.step_round();
        assert_eq!(sim.state(top).next_exchange, 0);
        assert!(sim
            .in_flight()
            .all(|e| !(e.src == top && matches!(e.payload, aggsim::protocols::PpMsg::Push { .. }))));
    }
}

#[test]
fn fixed_variants_and_grouping_converge_exactly() {
    for mode in [Mode::Sync, Mode::Async] {
        let topo = graph(120, 4);
        let m = topo.len();
        let xs = inputs(m);
        let truth = xs.iter().sum::<f64>() / m as f64;
        let config = EngineConfig {
            mode,
            ..EngineConfig::default()
        };
        // back cancellation stalls when every node initiates every round
        for (variant, p) in [(Variant::BackCancel, 0.5), (Variant::OrderedWait, 1.0)] {
            let states = PushPull::init(AggregateFunction::Average, &xs, m, NodeId(0)).unwrap();
            let protocol = PushPull::new(variant, AggregateFunction::Average).with_initiate_prob(p);
            let mut sim = Simulation::new(protocol, topo.clone(), states, config.clone(), 5).unwrap();
            sim.run(1000);
            let audit = sim.drain();
            assert!(audit.conserved(1e-12), "{variant:?} {mode}");
            assert!(spread(&sim) < 1e-6 * truth, "{variant:?} {mode}: {}", spread(&sim));
        }
        let states = RandomGrouping::init(AggregateFunction::Average, &xs, m, NodeId(0)).unwrap();
        let mut sim = Simulation::new(
            RandomGrouping::new(AggregateFunction::Average, 0.2),
            topo.clone(),
            states,
            config,
            6,
        )
        .unwrap();
        sim.run(1000);
        let audit = sim.drain();
        assert!(audit.conserved(1e-12), "drg {mode}");
        assert!(spread(&sim) < 1e-6 * truth, "drg {mode}: {}", spread(&sim));
        assert!(sim.states().iter().all(DrgState::is_idle));
    }
}

#[test]
fn original_drifts_in_a_busy_network() {
    let topo = graph(200, 7);
    let m = topo.len();
    let xs = inputs(m);
    let states = PushPull::init(AggregateFunction::Average, &xs, m, NodeId(0)).unwrap();
    let protocol = PushPull::new(Variant::Original, AggregateFunction::Average);
    let mut sim = Simulation::new(protocol, topo, states, EngineConfig::sync(), 8).unwrap();
    sim.run(100);
    let audit = sim.drain();
    assert!(audit.relative > 1e-6, "{}", audit.relative);
}

#[test]
fn push_sum_counts_the_network() {
    let topo = graph(150, 9);
    let m = topo.len();
    let states = PushSum::init(AggregateFunction::Count, &vec![1.0; m], m, NodeId(0)).unwrap();
    let mut sim = Simulation::new(PushSum::new(), topo, states, EngineConfig::sync(), 10).unwrap();
    sim.run(300);
    for e in sim.live_estimates() {
        assert!((e.value().unwrap() - m as f64).abs() < 1e-6 * m as f64);
    }
}

#[test]
fn grouping_counts_the_network() {
    let topo = graph(150, 11);
    let m = topo.len();
    let states = RandomGrouping::init(AggregateFunction::Count, &vec![1.0; m], m, NodeId(0)).unwrap();
    let protocol = RandomGrouping::new(AggregateFunction::Count, 0.2);
    let mut sim = Simulation::new(protocol, topo, states, EngineConfig::sync(), 12).unwrap();
    sim.run(600);
    for e in sim.live_estimates() {
        assert!((e.value().unwrap() - m as f64).abs() < 1e-6 * m as f64);
    }
}

#[test]
fn late_pull_after_timeout_is_stale() {
    // every exchange times out long before its pull can arrive
    let topo = Arc::new(Topology::from_edges(2, [(0, 1)]).unwrap());
    let states = vec![PpState::new(NodeId(0), 4.0), PpState::new(NodeId(1), 8.0)];
    let protocol = PushPull::new(Variant::BackCancel, AggregateFunction::Average).with_timeout(Some(2.0));
    let config = EngineConfig {
        delay: DelayDist { d_min: 5.0, d_max: 5.0 },
        zero_tick_phase: true,
        ..EngineConfig::asynchronous()
    };
    let mut sim = Simulation::new(protocol, topo, states, config, 13).unwrap();
    sim.run(30);
    // both nodes are always busy, so every push is reflected and ignored
    let stale: u64 = sim.states().iter().map(|s| s.stale_pulls).sum();
    assert!(stale > 0);
    assert_eq!(sim.state(NodeId(0)).value, 4.0);
    assert_eq!(sim.state(NodeId(1)).value, 8.0);
    sim.drain();
    assert!(sim.states().iter().all(PpState::is_idle));
}
