//! Random grouping on a small graph, tracing how many groups form per round
//! and how the spread of values shrinks.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use aggsim::engine::{EngineConfig, Simulation};
use aggsim::protocols::RandomGrouping;
use aggsim::{AggregateFunction, NodeId, Topology};

fn main() -> aggsim::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let full = Topology::erdos_renyi(200, 5.0, &mut rng)?;
    let topo = Arc::new(full.induced(&full.largest_connected_component()));
    let m = topo.len();
    let inputs: Vec<f64> = (0..m).map(|i| (i % 10) as f64).collect();

    let function = AggregateFunction::Average;
    let protocol = RandomGrouping::new(function, 0.2);
    let states = RandomGrouping::init(function, &inputs, m, NodeId(0))?;
    let mut sim = Simulation::new(protocol, topo, states, EngineConfig::sync(), 1)?;

    let mut led = 0;
    for round in 1..=60 {
        sim.advance();
        let groups: u64 = sim.states().iter().map(|s| s.groups_led).sum();
        let (lo, hi) = sim
            .states()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.value), hi.max(s.value))
            });
        if round % 5 == 0 {
            println!(
                "round {round:>3}: {:>3} groups closed, values in [{lo:.6}, {hi:.6}]",
                groups - led
            );
            led = groups;
        }
    }
    let audit = sim.drain();
    println!("mass deviation after drain: {:e}", audit.relative);
    Ok(())
}
