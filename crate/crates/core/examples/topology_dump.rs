//! Generates the graph of one trial, prints its degree statistics and
//! writes it as an edge list.

use std::env;

use aggsim::experiments::{trial_topology, ExperimentConfig};

fn main() -> aggsim::Result<()> {
    let path = env::args().nth(1).unwrap_or_else(|| "topology.txt".into());
    let cfg = ExperimentConfig::default();
    let (graph, seed) = trial_topology(&cfg, 0)?;
    let stats = graph.degree_stats();
    let lcc = graph.largest_connected_component();
    println!("{} nodes, {} edges, seed {seed:#x}", graph.len(), graph.edge_count());
    println!("{stats:?}");
    println!("largest component: {} nodes", lcc.len());
    graph.save_edge_list(path.as_ref(), seed)?;
    println!("wrote {path}");
    Ok(())
}
