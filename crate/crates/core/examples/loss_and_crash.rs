//! Effect of message loss and crashes on push-sum, with and without the
//! loss-recovery oracle.

use aggsim::experiments::{run_experiment, ExperimentConfig};
use aggsim::protocols::ProtocolKind;

fn report(label: &str, cfg: &ExperimentConfig) -> aggsim::Result<()> {
    let result = run_experiment(cfg)?;
    let trials = result.trials.len() as f64;
    let lost = result.trials.iter().map(|t| t.audit.lost.w).sum::<f64>() / trials;
    let bias = result
        .trials
        .iter()
        .map(|t| t.final_estimate_mean / t.truth - 1.0)
        .sum::<f64>()
        / trials;
    let reach = result.summary.last().map_or(0.0, |r| r.reach_rate);
    println!(
        "{label:<28} lost weight {lost:.3}  mean bias {:+6.1}%  reach {reach:.2}",
        100.0 * bias
    );
    Ok(())
}

fn main() -> aggsim::Result<()> {
    let base = ExperimentConfig {
        protocol: ProtocolKind::Psp,
        n: 200,
        trials: 20,
        budget: 200,
        eps: vec![1e-2],
        ..ExperimentConfig::default()
    };
    report("fault free", &base)?;
    report(
        "20% loss",
        &ExperimentConfig {
            loss_prob: 0.2,
            ..base.clone()
        },
    )?;
    report(
        "20% loss, oracle recovery",
        &ExperimentConfig {
            loss_prob: 0.2,
            oracle_loss_recovery: true,
            ..base.clone()
        },
    )?;
    report(
        "10% crash at round 10",
        &ExperimentConfig {
            crash_spec: "round:10 nodes:20".parse()?,
            ..base
        },
    )?;
    Ok(())
}
