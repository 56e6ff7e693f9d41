//! Experiment configuration: a line-based `key = value` file plus overrides.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::aggregate::AggregateFunction;
use crate::engine::{DelayDist, Mode};
use crate::error::{Error, Result};
use crate::protocols::ProtocolKind;

/// Exchange timeout for the push-pull family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeoutSetting {
    /// No timer when the run is fault-free, otherwise a mode-dependent default.
    Auto,
    Never,
    After(f64),
}

impl TimeoutSetting {
    pub const AUTO_SYNC: f64 = 3.0;
    pub const AUTO_ASYNC: f64 = 6.0;

    pub fn resolve(self, mode: Mode, fault_free: bool) -> Option<f64> {
        match self {
            TimeoutSetting::Never => None,
            TimeoutSetting::After(t) => Some(t),
            TimeoutSetting::Auto if fault_free => None,
            TimeoutSetting::Auto => Some(match mode {
                Mode::Sync => Self::AUTO_SYNC,
                Mode::Async => Self::AUTO_ASYNC,
            }),
        }
    }
}

impl fmt::Display for TimeoutSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeoutSetting::Auto => f.write_str("auto"),
            TimeoutSetting::Never => f.write_str("none"),
            TimeoutSetting::After(t) => write!(f, "{t}"),
        }
    }
}

/// One crash directive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrashEntry {
    /// Crash `count` uniformly chosen live nodes at `time`.
    Random { time: f64, count: usize },
    /// Crash a specific node (component-relative id) at `time`.
    At { time: f64, node: u32 },
}

/// Parsed `crash_spec`. Entries are separated by `,` or `;`:
/// `round:<t> nodes:<k>` or `at:<t>:<id>`. `none` or empty means no crashes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrashSpec {
    pub entries: Vec<CrashEntry>,
}

impl CrashSpec {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl FromStr for CrashSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::config("crash_spec", msg);
        let mut entries = Vec::new();
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("none") {
            return Ok(CrashSpec::default());
        }
        for part in s.split([',', ';']).map(str::trim).filter(|p| !p.is_empty()) {
            if let Some(rest) = part.strip_prefix("at:") {
                let (t, id) = rest
                    .split_once(':')
                    .ok_or_else(|| bad(format!("`{part}`: expected at:<t>:<id>")))?;
                let time = parse_time(t).map_err(|m| bad(format!("`{part}`: {m}")))?;
                let node = id
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("`{part}`: node id `{id}` is not a non-negative integer")))?;
                entries.push(CrashEntry::At { time, node });
            } else if part.starts_with("round:") {
                let mut time = None;
                let mut count = None;
                for tok in part.split_whitespace() {
                    if let Some(t) = tok.strip_prefix("round:") {
                        time = Some(parse_time(t).map_err(|m| bad(format!("`{part}`: {m}")))?);
                    } else if let Some(k) = tok.strip_prefix("nodes:") {
                        count = Some(
                            k.parse()
                                .map_err(|_| bad(format!("`{part}`: node count `{k}` is not an integer")))?,
                        );
                    } else {
                        return Err(bad(format!("`{part}`: unexpected token `{tok}`")));
                    }
                }
                match (time, count) {
                    (Some(time), Some(count)) => entries.push(CrashEntry::Random { time, count }),
                    _ => return Err(bad(format!("`{part}`: expected round:<t> nodes:<k>"))),
                }
            } else {
                return Err(bad(format!(
                    "`{part}`: expected `round:<t> nodes:<k>` or `at:<t>:<id>`"
                )));
            }
        }
        Ok(CrashSpec { entries })
    }
}

impl fmt::Display for CrashSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return f.write_str("none");
        }
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match e {
                CrashEntry::Random { time, count } => write!(f, "round:{time} nodes:{count}")?,
                CrashEntry::At { time, node } => write!(f, "at:{time}:{node}")?,
            }
        }
        Ok(())
    }
}

fn parse_time(s: &str) -> std::result::Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(t) if t.is_finite() && t >= 0.0 => Ok(t),
        _ => Err(format!("time `{s}` must be a non-negative number")),
    }
}

/// Input distribution for average and sum runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputDist {
    pub lo: f64,
    pub hi: f64,
}

impl Default for InputDist {
    fn default() -> Self {
        InputDist { lo: 0.0, hi: 100.0 }
    }
}

impl FromStr for InputDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("inputs", format!("`{s}`: expected uniform:<lo>:<hi> with lo < hi"));
        let mut it = s.trim().split(':');
        if it.next() != Some("uniform") {
            return Err(bad());
        }
        let lo: f64 = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let hi: f64 = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        if it.next().is_some() || !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(bad());
        }
        Ok(InputDist { lo, hi })
    }
}

impl fmt::Display for InputDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "uniform:{}:{}", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub avg_degree: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub mode: Mode,
    pub loss_prob: f64,
    pub fifo: bool,
    pub delay: DelayDist,
    pub crash_spec: CrashSpec,
    pub aggregate: AggregateFunction,
    pub distinguished: u32,
    pub inputs: InputDist,
    pub eps: Vec<f64>,
    /// Rounds (sync) or time units (async).
    pub budget: u64,
    /// `None` picks the protocol default.
    pub drg_leader_prob: Option<f64>,
    pub drg_jack_timeout: f64,
    pub drg_gam_timeout: f64,
    pub timeout: TimeoutSetting,
    /// `None` picks the protocol default.
    pub initiate_prob: Option<f64>,
    pub oracle_loss_recovery: bool,
    pub parallel: bool,
    pub out: PathBuf,
    pub topology_out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            protocol: ProtocolKind::Psp,
            n: 1000,
            avg_degree: 5.0,
            trials: 50,
            base_seed: 1,
            mode: Mode::Sync,
            loss_prob: 0.0,
            fifo: true,
            delay: DelayDist::default(),
            crash_spec: CrashSpec::default(),
            aggregate: AggregateFunction::Count,
            distinguished: 0,
            inputs: InputDist::default(),
            eps: vec![1e-1, 1e-2, 1e-3, 1e-4],
            budget: 500,
            drg_leader_prob: None,
            drg_jack_timeout: 2.0,
            drg_gam_timeout: 4.0,
            timeout: TimeoutSetting::Auto,
            initiate_prob: None,
            oracle_loss_recovery: false,
            parallel: true,
            out: PathBuf::from("results"),
            topology_out: None,
        }
    }
}

/// Every accepted key, canonical names first. `nodes`, `degree` and `seed`
/// are aliases matching the command-line flags.
pub const KEYS: &[&str] = &[
    "protocol",
    "n",
    "avg_degree",
    "trials",
    "base_seed",
    "mode",
    "loss_prob",
    "fifo",
    "d_min",
    "d_max",
    "crash_spec",
    "aggregate",
    "distinguished",
    "inputs",
    "eps",
    "budget",
    "drg_leader_prob",
    "drg_jack_timeout",
    "drg_gam_timeout",
    "timeout",
    "initiate_prob",
    "oracle_loss_recovery",
    "parallel",
    "out",
    "topology_out",
    "nodes",
    "degree",
    "seed",
];

fn canonical(key: &str) -> &str {
    match key {
        "nodes" => "n",
        "degree" => "avg_degree",
        "seed" => "base_seed",
        k => k,
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(key, format!("`{v}` is not a valid number")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("`{v}` is not true or false"))),
    }
}

fn optional_prob(key: &str, v: &str) -> Result<Option<f64>> {
    if v.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

impl ExperimentConfig {
    /// Applies one `key = value` setting. Keys use underscores; dashes are
    /// accepted so command-line flag names work too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        let k = canonical(&key);
        match k {
            "protocol" => self.protocol = v.parse()?,
            "n" => self.n = num(k, v)?,
            "avg_degree" => self.avg_degree = num(k, v)?,
            "trials" => self.trials = num(k, v)?,
            "base_seed" => self.base_seed = num(k, v)?,
            "mode" => self.mode = v.parse()?,
            "loss_prob" => self.loss_prob = num(k, v)?,
            "fifo" => self.fifo = boolean(k, v)?,
            "d_min" => self.delay.d_min = num(k, v)?,
            "d_max" => self.delay.d_max = num(k, v)?,
            "crash_spec" => self.crash_spec = v.parse()?,
            "aggregate" => self.aggregate = v.parse()?,
            "distinguished" => self.distinguished = num(k, v)?,
            "inputs" => self.inputs = v.parse()?,
            "eps" => {
                self.eps = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| num(k, s))
                    .collect::<Result<_>>()?
            }
            "budget" => self.budget = num(k, v)?,
            "drg_leader_prob" => self.drg_leader_prob = optional_prob(k, v)?,
            "drg_jack_timeout" => self.drg_jack_timeout = num(k, v)?,
            "drg_gam_timeout" => self.drg_gam_timeout = num(k, v)?,
            "timeout" => {
                self.timeout = match v.to_ascii_lowercase().as_str() {
                    "auto" => TimeoutSetting::Auto,
                    "none" | "never" => TimeoutSetting::Never,
                    _ => TimeoutSetting::After(num(k, v)?),
                }
            }
            "initiate_prob" => self.initiate_prob = optional_prob(k, v)?,
            "oracle_loss_recovery" => self.oracle_loss_recovery = boolean(k, v)?,
            "parallel" => self.parallel = boolean(k, v)?,
            "out" => self.out = PathBuf::from(v),
            "topology_out" => {
                self.topology_out = (!v.is_empty() && !v.eq_ignore_ascii_case("none")).then(|| PathBuf::from(v))
            }
            _ => {
                return Err(Error::config(
                    key.as_str(),
                    format!("unknown key (valid keys: {})", KEYS.join(", ")),
                ))
            }
        }
        Ok(())
    }

    /// Checks every field range.
    pub fn validate(&self) -> Result<()> {
        let err = |k: &str, m: String| Err(Error::config(k, m));
        if self.n < 2 {
            return err("n", format!("need at least 2 nodes, got {}", self.n));
        }
        if !(self.avg_degree > 0.0 && self.avg_degree <= (self.n - 1) as f64) {
            return err(
                "avg_degree",
                format!("must lie in (0, n-1] = (0, {}], got {}", self.n - 1, self.avg_degree),
            );
        }
        if self.trials == 0 {
            return err("trials", "must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.loss_prob) {
            return err("loss_prob", format!("must lie in [0, 1), got {}", self.loss_prob));
        }
        self.delay.validate()?;
        if self.eps.is_empty() {
            return err("eps", "need at least one target".into());
        }
        if let Some(e) = self.eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return err("eps", format!("targets must be positive, got {e}"));
        }
        if self.budget == 0 {
            return err("budget", "must be at least 1".into());
        }
        if self.distinguished as usize >= self.n {
            return err(
                "distinguished",
                format!("{} is not a node of {}", self.distinguished, self.n),
            );
        }
        if let Some(p) = self.drg_leader_prob {
            if !(0.0..=1.0).contains(&p) {
                return err("drg_leader_prob", format!("must lie in [0, 1], got {p}"));
            }
        }
        if let Some(p) = self.initiate_prob {
            if !(p > 0.0 && p <= 1.0) {
                return err("initiate_prob", format!("must lie in (0, 1], got {p}"));
            }
        }
        for (k, t) in [
            ("drg_jack_timeout", self.drg_jack_timeout),
            ("drg_gam_timeout", self.drg_gam_timeout),
        ] {
            if !(t > 0.0 && t.is_finite()) {
                return err(k, format!("must be positive, got {t}"));
            }
        }
        if let TimeoutSetting::After(t) = self.timeout {
            if !(t > 0.0 && t.is_finite()) {
                return err("timeout", format!("must be positive, `auto` or `none`, got {t}"));
            }
        }
        if self.oracle_loss_recovery && self.protocol != ProtocolKind::Psp {
            return err(
                "oracle_loss_recovery",
                format!("only applies to psp, not {}", self.protocol),
            );
        }
        if self.aggregate == AggregateFunction::Sum && self.protocol != ProtocolKind::Psp {
            return err(
                "aggregate",
                format!("sum needs weights; {} supports average and count", self.protocol),
            );
        }
        for e in &self.crash_spec.entries {
            if let CrashEntry::At { node, .. } = *e {
                if node as usize >= self.n {
                    return err("crash_spec", format!("node {node} is not a node of {}", self.n));
                }
            }
        }
        Ok(())
    }

    pub fn is_fault_free(&self) -> bool {
        self.loss_prob == 0.0 && self.crash_spec.is_empty()
    }

    /// Default probability that an eligible push-pull node opens an exchange.
    /// Back cancellation wastes every push that meets a busy node, so it does
    /// best when only about half the nodes initiate per round.
    pub fn default_initiate_prob(protocol: ProtocolKind) -> f64 {
        match protocol {
            ProtocolKind::Ppbc => 0.5,
            _ => 1.0,
        }
    }

    pub const DEFAULT_DRG_LEADER_PROB: f64 = 0.2;

    pub fn effective_initiate_prob(&self) -> f64 {
        self.initiate_prob
            .unwrap_or_else(|| Self::default_initiate_prob(self.protocol))
    }

    pub fn effective_leader_prob(&self) -> f64 {
        self.drg_leader_prob.unwrap_or(Self::DEFAULT_DRG_LEADER_PROB)
    }

    /// The exchange timeout push-pull nodes will use.
    pub fn effective_timeout(&self) -> Option<f64> {
        self.timeout.resolve(self.mode, self.is_fault_free())
    }
}

/// Parses a configuration file and applies `overrides` on top, in order.
/// Lines are `key = value`; `#` starts a comment. Keys may not repeat
/// within the file.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(
                format!("line {}", lineno + 1),
                format!("expected `key = value`, got `{line}`"),
            )
        })?;
        let canon = canonical(&key.trim().replace('-', "_")).to_string();
        if seen.contains(&canon) {
            return Err(Error::config(canon, format!("set twice (line {})", lineno + 1)));
        }
        cfg.set(key, value)?;
        seen.push(canon);
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config("", &[]).unwrap();
        assert_eq!(cfg.n, 1000);
        assert_eq!(cfg.avg_degree, 5.0);
        assert_eq!(cfg.trials, 50);
        assert_eq!(cfg.aggregate, AggregateFunction::Count);
        assert_eq!(cfg.eps, vec![1e-1, 1e-2, 1e-3, 1e-4]);
        assert_eq!(cfg.budget, 500);
        assert_eq!(cfg.mode, Mode::Sync);
        assert!(cfg.fifo);
    }

    #[test]
    fn overrides_win() {
        let cfg = parse_config(
            "protocol = ppow\nloss_prob = 0.1 # comment\n",
            &[("loss-prob".into(), "0.05".into())],
        )
        .unwrap();
        assert_eq!(cfg.protocol, ProtocolKind::Ppow);
        assert_eq!(cfg.loss_prob, 0.05);
    }

    #[test]
    fn unknown_protocol_names_key_and_choices() {
        let e = parse_config("protocol = xyz", &[]).unwrap_err().to_string();
        assert!(e.contains("protocol"), "{e}");
        for p in ["psp", "ppg", "ppbc", "ppow", "drg"] {
            assert!(e.contains(p), "{e}");
        }
    }

    #[test]
    fn rejects_unknown_and_repeated_keys() {
        let e = parse_config("trails = 3", &[]).unwrap_err().to_string();
        assert!(e.contains("trails"), "{e}");
        let e = parse_config("n = 10\nnodes = 20", &[]).unwrap_err().to_string();
        assert!(e.contains("set twice"), "{e}");
        assert!(parse_config("just words", &[]).is_err());
    }

    #[test]
    fn range_errors_name_the_key() {
        for (text, key) in [
            ("trials = 0", "trials"),
            ("n = 1", "n"),
            ("n = 10\navg_degree = 10", "avg_degree"),
            ("loss_prob = 1.0", "loss_prob"),
            ("eps = 0.1, -1", "eps"),
            ("budget = 0", "budget"),
            ("d_min = 0", "d_min"),
            ("fifo = maybe", "fifo"),
            ("budget = lots", "budget"),
            ("protocol = ppg\noracle_loss_recovery = true", "oracle_loss_recovery"),
            ("protocol = drg\naggregate = sum", "aggregate"),
            ("initiate_prob = 0", "initiate_prob"),
            ("timeout = -2", "timeout"),
        ] {
            let e = parse_config(text, &[]).unwrap_err().to_string();
            assert!(e.contains(key), "{text}: {e}");
        }
    }

    #[test]
    fn crash_spec_grammar() {
        let s: CrashSpec = "round:50 nodes:10".parse().unwrap();
        assert_eq!(s.entries, vec![CrashEntry::Random { time: 50.0, count: 10 }]);
        let s: CrashSpec = "at:3:7, at:4.5:0; round:9 nodes:2".parse().unwrap();
        assert_eq!(
            s.entries,
            vec![
                CrashEntry::At { time: 3.0, node: 7 },
                CrashEntry::At { time: 4.5, node: 0 },
                CrashEntry::Random { time: 9.0, count: 2 },
            ]
        );
        assert!("none".parse::<CrashSpec>().unwrap().is_empty());
        for bad in ["round:5", "at:1", "at:x:1", "round:-1 nodes:2", "kill everyone"] {
            assert!(bad.parse::<CrashSpec>().is_err(), "{bad}");
        }
        let round_trip: CrashSpec = s.to_string().parse().unwrap();
        assert_eq!(round_trip, s);
    }

    #[test]
    fn timeout_resolution() {
        assert_eq!(TimeoutSetting::Auto.resolve(Mode::Sync, true), None);
        assert_eq!(TimeoutSetting::Auto.resolve(Mode::Sync, false), Some(3.0));
        assert_eq!(TimeoutSetting::Never.resolve(Mode::Async, false), None);
        assert_eq!(TimeoutSetting::After(2.5).resolve(Mode::Sync, true), Some(2.5));
    }

    #[test]
    fn inputs_grammar() {
        assert_eq!(
            "uniform:-1:1".parse::<InputDist>().unwrap(),
            InputDist { lo: -1.0, hi: 1.0 }
        );
        assert!("uniform:1:1".parse::<InputDist>().is_err());
        assert!("normal:0:1".parse::<InputDist>().is_err());
    }
}
