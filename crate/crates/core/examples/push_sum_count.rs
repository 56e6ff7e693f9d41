//! Counts the nodes of a random graph with push-sum and prints the accuracy
//! curve.
//!
//! ```text
//! cargo run --release --example push_sum_count -- [nodes] [rounds]
//! ```

use std::env;

use aggsim::experiments::{prepare_trial, run_prepared, ExperimentConfig};
use aggsim::protocols::{ProtocolKind, PushSum};

fn main() -> aggsim::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let n: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let rounds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(120);

    let cfg = ExperimentConfig {
        protocol: ProtocolKind::Psp,
        n,
        ..ExperimentConfig::default()
    };
    let setup = prepare_trial(&cfg, 0)?;
    let m = setup.topology.len();
    let states = PushSum::init(cfg.aggregate, &setup.inputs, m, setup.distinguished)?;
    let result = run_prepared(PushSum::new(), states, &setup, rounds, &cfg.eps)?;

    println!("largest component: {m} of {n} nodes");
    println!("{:>6} {:>12} {:>10}", "round", "cv_rmse", "messages");
    for row in result.rows.iter().step_by(10) {
        println!("{:>6} {:>12.3e} {:>10}", row.time, row.cv_rmse, row.messages_cum);
    }
    for (eps, t) in cfg.eps.iter().zip(&result.time_to_accuracy) {
        match t {
            Some(t) => println!("cv_rmse stays below {eps:e} from round {t}"),
            None => println!("cv_rmse never settles below {eps:e}"),
        }
    }
    println!(
        "mean estimate {:.6} (truth {})",
        result.final_estimate_mean, result.truth
    );
    Ok(())
}
