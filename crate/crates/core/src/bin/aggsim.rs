use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aggsim::experiments::{self, parse_config, run_experiment, trial_topology, write_results};
use aggsim::Error;

#[derive(Parser)]
#[command(name = "aggsim", version, about = "Simulate averaging-based aggregation protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded multi-trial experiment and write curves.csv and summary.csv.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// psp, ppg, ppbc, ppow or drg.
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    nodes: Option<String>,
    /// Average node degree of the random graph.
    #[arg(long)]
    degree: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// Base seed; trial seeds are derived from it.
    #[arg(long)]
    seed: Option<String>,
    /// sync or async.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    loss_prob: Option<String>,
    #[arg(long)]
    fifo: Option<String>,
    /// `round:<t> nodes:<k>` or `at:<t>:<id>` entries, comma separated.
    #[arg(long)]
    crash_spec: Option<String>,
    /// Comma-separated accuracy targets.
    #[arg(long)]
    eps: Option<String>,
    /// Rounds (sync) or time units (async) per trial.
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Write trial 0's generated graph as an edge list.
    #[arg(long)]
    topology_out: Option<String>,
    /// Any other configuration key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>, Error> {
        let flags = [
            ("protocol", &self.protocol),
            ("nodes", &self.nodes),
            ("degree", &self.degree),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("mode", &self.mode),
            ("loss_prob", &self.loss_prob),
            ("fifo", &self.fifo),
            ("crash_spec", &self.crash_spec),
            ("eps", &self.eps),
            ("budget", &self.budget),
            ("out", &self.out),
            ("topology_out", &self.topology_out),
        ];
        let mut out: Vec<(String, String)> = flags
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::config(kv.as_str(), "--set expects KEY=VALUE"))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }
}

fn run(args: RunArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&args.config).map_err(|source| Error::Io {
        path: args.config.clone(),
        source,
    })?;
    let cfg = parse_config(&text, &args.overrides()?)?;
    if let Some(path) = &cfg.topology_out {
        let (topo, seed) = trial_topology(&cfg, 0)?;
        topo.save_edge_list(path, seed)?;
    }
    let result = run_experiment(&cfg)?;
    let (curves, summary) = write_results(&cfg.out, &result)?;
    for row in &result.summary {
        eprintln!("{}", experiments::output::summary_record(row).join(","));
    }
    eprintln!("wrote {} and {}", curves.display(), summary.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aggsim: {e}");
            ExitCode::FAILURE
        }
    }
}
