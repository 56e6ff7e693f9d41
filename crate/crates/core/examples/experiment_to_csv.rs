//! Parses a configuration, runs it and writes `curves.csv` and
//! `summary.csv` into the given directory.
//!
//! ```text
//! cargo run --release --example experiment_to_csv -- [out_dir]
//! ```

use std::env;

use aggsim::experiments::{parse_config, run_experiment, write_results};

const CONFIG: &str = "
protocol = ppow
nodes = 500
trials = 8
budget = 300
mode = async
eps = 1e-1, 1e-2, 1e-3
seed = 42
";

fn main() -> aggsim::Result<()> {
    let out = env::args().nth(1).unwrap_or_else(|| "results".into());
    let overrides = [("out".to_string(), out)];
    let cfg = parse_config(CONFIG, &overrides)?;
    let result = run_experiment(&cfg)?;
    let (curves, summary) = write_results(&cfg.out, &result)?;
    println!("{}\n{}", curves.display(), summary.display());
    Ok(())
}
