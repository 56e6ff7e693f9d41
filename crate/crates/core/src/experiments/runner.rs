//! Trial orchestration.

use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{CrashEntry, CrashSpec, ExperimentConfig};
use super::seed::{derive_seed, sub_seed, Stream};
use crate::aggregate::{AggregateFunction, NodeId};
use crate::engine::{EngineConfig, EngineStats, FaultPlan, MassAudit, Protocol, Simulation};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricsRow};
use crate::protocols::{ProtocolKind, PushPull, PushSum, RandomGrouping};
use crate::topology::Topology;

/// Everything a trial needs before the protocol is chosen.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub trial: usize,
    pub seed: u64,
    /// The generated graph before restriction.
    pub full_topology: Topology,
    /// Original ids of the largest component, in relabelled order.
    pub component: Vec<NodeId>,
    /// The largest component, relabelled to `0..m`.
    pub topology: Arc<Topology>,
    pub inputs: Vec<f64>,
    pub truth: f64,
    pub distinguished: NodeId,
    pub engine: EngineConfig,
    pub engine_seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub component_size: usize,
    pub truth: f64,
    pub rows: Vec<MetricsRow>,
    /// One entry per configured eps, in order.
    pub time_to_accuracy: Vec<Option<f64>>,
    pub messages_to_accuracy: Vec<Option<u64>>,
    /// Mean estimate over live nodes when the budget ran out (undefined
    /// estimates count as 0).
    pub final_estimate_mean: f64,
    /// Ledger audit after the final drain.
    pub audit: MassAudit,
    pub stats: EngineStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub protocol: ProtocolKind,
    pub mode: crate::engine::Mode,
    pub eps: f64,
    pub mean_time: Option<f64>,
    pub std_time: Option<f64>,
    pub mean_msgs: Option<f64>,
    pub std_msgs: Option<f64>,
    pub reach_rate: f64,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
    pub summary: Vec<SummaryRow>,
}

/// The generated (unrestricted) topology of a trial and its seed.
pub fn trial_topology(cfg: &ExperimentConfig, trial: usize) -> Result<(Topology, u64)> {
    let seed = sub_seed(derive_seed(cfg.base_seed, trial as u64), Stream::Topology);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((Topology::erdos_renyi(cfg.n, cfg.avg_degree, &mut rng)?, seed))
}

/// Picks concrete crash victims among `m` nodes. Random entries choose
/// uniformly among nodes not already scheduled to crash earlier.
pub fn resolve_crashes<R: Rng + ?Sized>(spec: &CrashSpec, m: usize, rng: &mut R) -> Result<Vec<(f64, NodeId)>> {
    let mut entries = spec.entries.clone();
    let time = |e: &CrashEntry| match *e {
        CrashEntry::Random { time, .. } | CrashEntry::At { time, .. } => time,
    };
    entries.sort_by(|a, b| time(a).total_cmp(&time(b)));
    let mut doomed = vec![false; m];
    let mut out = Vec::new();
    for e in entries {
        match e {
            CrashEntry::At { time, node } => {
                if node as usize >= m {
                    return Err(Error::config(
                        "crash_spec",
                        format!("node {node} is outside the largest component (size {m})"),
                    ));
                }
                doomed[node as usize] = true;
                out.push((time, NodeId(node)));
            }
            CrashEntry::Random { time, count } => {
                let candidates: Vec<usize> = (0..m).filter(|&i| !doomed[i]).collect();
                if count > candidates.len() {
                    return Err(Error::config(
                        "crash_spec",
                        format!("cannot crash {count} nodes at {time}: only {} remain", candidates.len()),
                    ));
                }
                let mut picked: Vec<usize> = index::sample(rng, candidates.len(), count)
                    .into_iter()
                    .map(|k| candidates[k])
                    .collect();
                picked.sort_unstable();
                for i in picked {
                    doomed[i] = true;
                    out.push((time, NodeId::from(i)));
                }
            }
        }
    }
    Ok(out)
}

/// Generates the topology, restricts it to its largest component, draws the
/// inputs and crash victims and builds the engine configuration.
pub fn prepare_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialSetup> {
    let seed = derive_seed(cfg.base_seed, trial as u64);
    let (full, _) = trial_topology(cfg, trial)?;
    let component = full.largest_connected_component();
    let topology = Arc::new(full.induced(&component));
    let m = topology.len();

    let mut input_rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, Stream::Inputs));
    let inputs: Vec<f64> = match cfg.aggregate {
        AggregateFunction::Count => vec![1.0; m],
        _ => (0..m)
            .map(|_| input_rng.gen_range(cfg.inputs.lo..cfg.inputs.hi))
            .collect(),
    };
    let truth = cfg.aggregate.truth(&inputs);

    if cfg.distinguished as usize >= m {
        return Err(Error::config(
            "distinguished",
            format!("node {} is outside the largest component (size {m})", cfg.distinguished),
        ));
    }

    let mut crash_rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, Stream::Crashes));
    let crash_schedule = resolve_crashes(&cfg.crash_spec, m, &mut crash_rng)?;
    let engine = EngineConfig {
        mode: cfg.mode,
        delay: cfg.delay,
        faults: FaultPlan {
            loss_prob: cfg.loss_prob,
            fifo: cfg.fifo,
            crash_schedule,
        },
        ..EngineConfig::default()
    };

    Ok(TrialSetup {
        trial,
        seed,
        full_topology: full,
        component,
        topology,
        inputs,
        truth,
        distinguished: NodeId(cfg.distinguished),
        engine,
        engine_seed: sub_seed(seed, Stream::Engine),
    })
}

/// Builds the simulation for a prepared trial.
pub fn build_simulation<P: Protocol>(protocol: P, states: Vec<P::State>, setup: &TrialSetup) -> Result<Simulation<P>> {
    Simulation::new(
        protocol,
        Arc::clone(&setup.topology),
        states,
        setup.engine.clone(),
        setup.engine_seed,
    )
}

/// Runs a prepared trial with an explicit protocol for `budget` periods,
/// then drains and audits.
pub fn run_prepared<P: Protocol>(
    protocol: P,
    states: Vec<P::State>,
    setup: &TrialSetup,
    budget: u64,
    eps: &[f64],
) -> Result<TrialResult> {
    let mut sim = build_simulation(protocol, states, setup)?;
    let rows = metrics::run_sampled(&mut sim, setup.truth, budget);
    let live = sim.live_count().max(1) as f64;
    let final_estimate_mean = sim.live_estimates().map(|e| e.scored()).sum::<f64>() / live;
    let audit = metrics::drain_and_audit(&mut sim);
    Ok(TrialResult {
        trial: setup.trial,
        seed: setup.seed,
        component_size: setup.topology.len(),
        truth: setup.truth,
        time_to_accuracy: eps.iter().map(|&e| metrics::time_to_accuracy(&rows, e)).collect(),
        messages_to_accuracy: eps.iter().map(|&e| metrics::messages_to_accuracy(&rows, e)).collect(),
        rows,
        final_estimate_mean,
        audit,
        stats: *sim.stats(),
    })
}

pub fn push_sum(cfg: &ExperimentConfig) -> PushSum {
    PushSum {
        oracle_loss_recovery: cfg.oracle_loss_recovery,
    }
}

pub fn push_pull(cfg: &ExperimentConfig) -> Result<PushPull> {
    let variant = cfg
        .protocol
        .push_pull_variant()
        .ok_or_else(|| Error::config("protocol", format!("{} is not a push-pull variant", cfg.protocol)))?;
    let p = PushPull::new(variant, cfg.aggregate)
        .with_timeout(cfg.effective_timeout())
        .with_initiate_prob(cfg.effective_initiate_prob());
    p.validate()?;
    Ok(p)
}

pub fn random_grouping(cfg: &ExperimentConfig) -> Result<RandomGrouping> {
    let p = RandomGrouping::new(cfg.aggregate, cfg.effective_leader_prob())
        .with_timeouts(cfg.drg_jack_timeout, cfg.drg_gam_timeout);
    p.validate()?;
    Ok(p)
}

/// Runs one trial of the configured protocol.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialResult> {
    let setup = prepare_trial(cfg, trial)?;
    let m = setup.topology.len();
    let (agg, inputs, d) = (cfg.aggregate, &setup.inputs, setup.distinguished);
    match cfg.protocol {
        ProtocolKind::Psp => {
            let states = PushSum::init(agg, inputs, m, d)?;
            run_prepared(push_sum(cfg), states, &setup, cfg.budget, &cfg.eps)
        }
        ProtocolKind::Ppg | ProtocolKind::Ppbc | ProtocolKind::Ppow => {
            let states = PushPull::init(agg, inputs, m, d)?;
            run_prepared(push_pull(cfg)?, states, &setup, cfg.budget, &cfg.eps)
        }
        ProtocolKind::Drg => {
            let states = RandomGrouping::init(agg, inputs, m, d)?;
            run_prepared(random_grouping(cfg)?, states, &setup, cfg.budget, &cfg.eps)
        }
    }
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

/// Per-eps mean and sample standard deviation over the trials that reached
/// the target, plus the fraction that did.
pub fn summarize(cfg: &ExperimentConfig, trials: &[TrialResult]) -> Vec<SummaryRow> {
    cfg.eps
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            let times: Vec<f64> = trials.iter().filter_map(|t| t.time_to_accuracy[k]).collect();
            let msgs: Vec<f64> = trials
                .iter()
                .filter_map(|t| t.messages_to_accuracy[k].map(|m| m as f64))
                .collect();
            let (mean_time, std_time) = mean_std(&times);
            let (mean_msgs, std_msgs) = mean_std(&msgs);
            SummaryRow {
                protocol: cfg.protocol,
                mode: cfg.mode,
                eps,
                mean_time,
                std_time,
                mean_msgs,
                std_msgs,
                reach_rate: times.len() as f64 / trials.len().max(1) as f64,
                trials: trials.len(),
            }
        })
        .collect()
}

/// Runs every trial (in parallel when `cfg.parallel`) and summarizes.
/// Results are in trial order either way.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let trials: Vec<TrialResult> = if cfg.parallel {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, t))
            .collect::<Result<_>>()?
    } else {
        (0..cfg.trials).map(|t| run_trial(cfg, t)).collect::<Result<_>>()?
    };
    let summary = summarize(cfg, &trials);
    Ok(ExperimentResult {
        config: cfg.clone(),
        trials,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(protocol: ProtocolKind) -> ExperimentConfig {
        ExperimentConfig {
            protocol,
            n: 40,
            avg_degree: 4.0,
            trials: 3,
            budget: 60,
            parallel: false,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn mean_std_sample() {
        assert_eq!(mean_std(&[]), (None, None));
        assert_eq!(mean_std(&[2.0]), (Some(2.0), None));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, Some(2.5));
        assert!((s.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn crash_resolution() {
        let spec: CrashSpec = "round:5 nodes:3, at:2:4".parse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = resolve_crashes(&spec, 10, &mut rng).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(out[0], (2.0, NodeId(4)));
        let mut victims: Vec<_> = out.iter().map(|c| c.1).collect();
        victims.sort();
        victims.dedup();
        assert_eq!(victims.len(), 4);
        let too_many: CrashSpec = "round:1 nodes:11".parse().unwrap();
        assert!(resolve_crashes(&too_many, 10, &mut rng).is_err());
        let outside: CrashSpec = "at:1:10".parse().unwrap();
        assert!(resolve_crashes(&outside, 10, &mut rng).is_err());
    }

    #[test]
    fn trial_is_replayable_and_independent_of_order() {
        let cfg = small(ProtocolKind::Psp);
        let a = run_trial(&cfg, 2).unwrap();
        let b = run_trial(&cfg, 2).unwrap();
        assert_eq!(a.rows, b.rows);
        let all = run_experiment(&cfg).unwrap();
        assert_eq!(all.trials[2].rows, a.rows);
        let par = run_experiment(&ExperimentConfig { parallel: true, ..cfg }).unwrap();
        for (x, y) in all.trials.iter().zip(&par.trials) {
            assert_eq!(x.rows, y.rows);
        }
    }

    #[test]
    fn every_protocol_runs() {
        for p in ProtocolKind::ALL {
            let cfg = small(p);
            let r = run_experiment(&cfg).unwrap();
            assert_eq!(r.trials.len(), 3);
            assert_eq!(r.summary.len(), cfg.eps.len());
            for t in &r.trials {
                assert_eq!(t.rows.len(), cfg.budget as usize + 1);
                assert!(t.rows.windows(2).all(|w| w[0].messages_cum <= w[1].messages_cum));
            }
        }
    }
}
