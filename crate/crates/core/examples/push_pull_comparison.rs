//! Runs the three push-pull variants side by side and prints rounds and
//! messages to each accuracy target.
//!
//! ```text
//! cargo run --release --example push_pull_comparison -- [trials] [nodes] [budget]
//! ```

use std::env;

use aggsim::experiments::{run_experiment, ExperimentConfig};
use aggsim::protocols::ProtocolKind;

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.1}"))
}

fn main() -> aggsim::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let trials: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(20);
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let budget: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1000);

    println!(
        "{:<5} {:>8} {:>9} {:>11} {:>6}",
        "", "eps", "rounds", "messages", "reach"
    );
    for protocol in [ProtocolKind::Ppg, ProtocolKind::Ppbc, ProtocolKind::Ppow] {
        let cfg = ExperimentConfig {
            protocol,
            n,
            trials,
            budget,
            ..ExperimentConfig::default()
        };
        let result = run_experiment(&cfg)?;
        for row in &result.summary {
            println!(
                "{:<5} {:>8} {:>9} {:>11} {:>6.2}",
                protocol.name(),
                row.eps,
                cell(row.mean_time),
                cell(row.mean_msgs),
                row.reach_rate
            );
        }
    }
    Ok(())
}
