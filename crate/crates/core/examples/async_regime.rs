//! The same protocol under lock-step rounds and under random delays, with
//! and without per-channel FIFO delivery.

use aggsim::engine::Mode;
use aggsim::experiments::{run_experiment, ExperimentConfig};
use aggsim::protocols::ProtocolKind;

fn main() -> aggsim::Result<()> {
    for protocol in [ProtocolKind::Psp, ProtocolKind::Ppow, ProtocolKind::Drg] {
        for (mode, fifo) in [(Mode::Sync, true), (Mode::Async, true), (Mode::Async, false)] {
            let cfg = ExperimentConfig {
                protocol,
                mode,
                fifo,
                n: 300,
                trials: 10,
                budget: 600,
                eps: vec![1e-3],
                ..ExperimentConfig::default()
            };
            let row = &run_experiment(&cfg)?.summary[0];
            println!(
                "{:<4} {:<5} fifo={:<5} time to 1e-3: {:>7}  reach {:.2}",
                protocol.name(),
                mode.name(),
                fifo,
                row.mean_time.map_or("-".into(), |t| format!("{t:.1}")),
                row.reach_rate
            );
        }
    }
    Ok(())
}
