//! Grid sweep over the tunable protocol parameters.
//!
//! For each push-pull variant the sweep varies the probability that an idle
//! node opens an exchange; for random grouping it varies the leader
//! probability. Each cell reports mean rounds and messages to each accuracy
//! target and the reach rate.
//!
//! ```text
//! cargo run --release --example tune_parameters -- [protocol|all] [trials] [nodes]
//! ```

use std::env;

use aggsim::experiments::{run_experiment, ExperimentConfig};
use aggsim::protocols::ProtocolKind;

const INITIATE_GRID: [f64; 6] = [0.2, 0.35, 0.5, 0.65, 0.8, 1.0];
const LEADER_GRID: [f64; 7] = [0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5];

fn fmt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.1}"))
}

fn main() -> aggsim::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let which = args.first().map(String::as_str).unwrap_or("all");
    let trials: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let protocols: Vec<ProtocolKind> = if which == "all" {
        vec![
            ProtocolKind::Ppg,
            ProtocolKind::Ppbc,
            ProtocolKind::Ppow,
            ProtocolKind::Drg,
        ]
    } else {
        vec![which.parse()?]
    };

    for protocol in protocols {
        let grid: &[f64] = if protocol == ProtocolKind::Drg {
            &LEADER_GRID
        } else {
            &INITIATE_GRID
        };
        println!("{protocol} (n={n}, trials={trials})");
        println!("{:>6} {:>8} {:>10} {:>6}", "param", "eps", "rounds", "msgs/n");
        for &p in grid {
            let mut cfg = ExperimentConfig {
                protocol,
                n,
                trials,
                ..ExperimentConfig::default()
            };
            if protocol == ProtocolKind::Drg {
                cfg.drg_leader_prob = Some(p);
            } else {
                cfg.initiate_prob = Some(p);
            }
            let result = run_experiment(&cfg)?;
            for row in &result.summary {
                println!(
                    "{:>6} {:>8} {:>10} {:>6}  reach {:.2}",
                    p,
                    row.eps,
                    fmt(row.mean_time),
                    fmt(row.mean_msgs.map(|m| m / n as f64)),
                    row.reach_rate
                );
            }
        }
        println!();
    }
    Ok(())
}
