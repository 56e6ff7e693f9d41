//! Shared domain values: node identifiers, aggregate functions, the
//! `(sum, weight)` mass pair and node-local estimates.
//!
//! Every protocol in [`crate::protocols`] starts from the initial states
//! built here and reports its estimate through [`MassPair::estimate`] or
//! [`value_estimate`].

use std::fmt;
use std::ops::{Add, AddAssign, Sub, SubAssign};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Weight (or value) threshold below which an estimate is undefined.
///
/// Only zero and subnormal weights are excluded. A node that is rarely picked
/// halves its weight every round, so converged runs do produce weights far
/// below 1e-12 while `s / w` stays exact.
pub const EPSILON_W: f64 = f64::MIN_POSITIVE;

/// Identifier of a simulated node. Ids are contiguous in `[0, n)` and their
/// integer order is the total order used by ordered-wait push-pull.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    #[inline]
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregateFunction {
    Average,
    Sum,
    Count,
}

impl AggregateFunction {
    pub const ALL: [AggregateFunction; 3] = [Self::Average, Self::Sum, Self::Count];

    pub fn name(self) -> &'static str {
        match self {
            Self::Average => "average",
            Self::Sum => "sum",
            Self::Count => "count",
        }
    }

    /// The exact aggregate over `inputs` (for `Count`, the population size).
    pub fn truth(self, inputs: &[f64]) -> f64 {
        match self {
            Self::Average => inputs.iter().sum::<f64>() / inputs.len() as f64,
            Self::Sum => inputs.iter().sum(),
            Self::Count => inputs.len() as f64,
        }
    }
}

impl FromStr for AggregateFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "average" | "avg" => Ok(Self::Average),
            "sum" => Ok(Self::Sum),
            "count" => Ok(Self::Count),
            other => Err(Error::config(
                "aggregate",
                format!("unknown aggregate `{other}` (expected one of: average, sum, count)"),
            )),
        }
    }
}

impl fmt::Display for AggregateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Component-wise additive `(sum, weight)` pair carried by push-sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MassPair {
    pub s: f64,
    pub w: f64,
}

impl MassPair {
    pub const ZERO: MassPair = MassPair { s: 0.0, w: 0.0 };

    #[inline]
    pub const fn new(s: f64, w: f64) -> Self {
        MassPair { s, w }
    }

    #[inline]
    pub fn half(self) -> Self {
        MassPair::new(self.s * 0.5, self.w * 0.5)
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.s == 0.0 && self.w == 0.0
    }

    /// `s / w`, or undefined while the weight is below [`EPSILON_W`].
    pub fn estimate(self) -> Estimate {
        if self.w >= EPSILON_W {
            Estimate::Value(self.s / self.w)
        } else {
            Estimate::Undefined
        }
    }
}

impl Add for MassPair {
    type Output = MassPair;
    #[inline]
    fn add(self, o: MassPair) -> MassPair {
        MassPair::new(self.s + o.s, self.w + o.w)
    }
}

impl AddAssign for MassPair {
    #[inline]
    fn add_assign(&mut self, o: MassPair) {
        self.s += o.s;
        self.w += o.w;
    }
}

impl Sub for MassPair {
    type Output = MassPair;
    #[inline]
    fn sub(self, o: MassPair) -> MassPair {
        MassPair::new(self.s - o.s, self.w - o.w)
    }
}

impl SubAssign for MassPair {
    #[inline]
    fn sub_assign(&mut self, o: MassPair) {
        self.s -= o.s;
        self.w -= o.w;
    }
}

impl std::iter::Sum for MassPair {
    fn sum<I: Iterator<Item = MassPair>>(iter: I) -> MassPair {
        iter.fold(MassPair::ZERO, |a, b| a + b)
    }
}

/// A node's current guess of the aggregate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimate {
    Value(f64),
    Undefined,
}

impl Estimate {
    pub fn value(self) -> Option<f64> {
        match self {
            Estimate::Value(v) => Some(v),
            Estimate::Undefined => None,
        }
    }

    /// Value used when scoring errors: undefined estimates count as 0.
    pub fn scored(self) -> f64 {
        self.value().unwrap_or(0.0)
    }
}

/// Readout for single-value protocols (push-pull family, random grouping).
///
/// Values are averaged in the value domain; for `Count` the network size is
/// the reciprocal of the converged value.
pub fn value_estimate(value: f64, function: AggregateFunction) -> Estimate {
    match function {
        AggregateFunction::Count => {
            if value >= EPSILON_W {
                Estimate::Value(1.0 / value)
            } else {
                Estimate::Undefined
            }
        }
        AggregateFunction::Average | AggregateFunction::Sum => Estimate::Value(value),
    }
}

fn check_init(n: usize, inputs: &[f64], function: AggregateFunction) -> Result<()> {
    if n == 0 {
        return Err(Error::config("nodes", "need at least one node"));
    }
    if function != AggregateFunction::Count {
        if inputs.len() != n {
            return Err(Error::config(
                "inputs",
                format!("expected {n} input values, got {}", inputs.len()),
            ));
        }
        if let Some(bad) = inputs.iter().find(|x| !x.is_finite()) {
            return Err(Error::config("inputs", format!("non-finite input {bad}")));
        }
    }
    Ok(())
}

fn check_distinguished(n: usize, distinguished: NodeId) -> Result<()> {
    if distinguished.index() >= n {
        return Err(Error::config(
            "distinguished",
            format!("node {distinguished} is outside [0, {n})"),
        ));
    }
    Ok(())
}

/// Initial `(s, w)` pairs for push-sum.
///
/// `Average`: `(x_i, 1)` everywhere. `Sum`: `(x_i, 1)` at the distinguished
/// node and `(x_i, 0)` elsewhere. `Count`: `(1, 1)` at the distinguished node
/// and `(1, 0)` elsewhere; inputs are ignored.
pub fn init_mass_pairs(
    function: AggregateFunction,
    n: usize,
    inputs: &[f64],
    distinguished: NodeId,
) -> Result<Vec<MassPair>> {
    check_init(n, inputs, function)?;
    check_distinguished(n, distinguished)?;
    let d = distinguished.index();
    Ok((0..n)
        .map(|i| {
            let w = if i == d { 1.0 } else { 0.0 };
            match function {
                AggregateFunction::Average => MassPair::new(inputs[i], 1.0),
                AggregateFunction::Sum => MassPair::new(inputs[i], w),
                AggregateFunction::Count => MassPair::new(1.0, w),
            }
        })
        .collect())
}

/// Initial values for single-value protocols.
///
/// `Average`: `x_i`. `Count`: 1 at the distinguished node, 0 elsewhere.
/// `Sum` has no single-value initialization and is rejected.
pub fn init_values(function: AggregateFunction, n: usize, inputs: &[f64], distinguished: NodeId) -> Result<Vec<f64>> {
    check_init(n, inputs, function)?;
    check_distinguished(n, distinguished)?;
    match function {
        AggregateFunction::Average => Ok(inputs.to_vec()),
        AggregateFunction::Count => Ok((0..n)
            .map(|i| if i == distinguished.index() { 1.0 } else { 0.0 })
            .collect()),
        AggregateFunction::Sum => Err(Error::config(
            "aggregate",
            "sum needs the (sum, weight) pair; use push-sum or compute average * count",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_pairs_put_weight_on_distinguished_node() {
        let s = init_mass_pairs(AggregateFunction::Count, 3, &[], NodeId(0)).unwrap();
        assert_eq!(
            s,
            vec![
                MassPair::new(1.0, 1.0),
                MassPair::new(1.0, 0.0),
                MassPair::new(1.0, 0.0)
            ]
        );
    }

    #[test]
    fn single_node_average_is_its_input() {
        let s = init_mass_pairs(AggregateFunction::Average, 1, &[7.0], NodeId(0)).unwrap();
        assert_eq!(s, vec![MassPair::new(7.0, 1.0)]);
        assert_eq!(s[0].estimate(), Estimate::Value(7.0));
    }

    #[test]
    fn count_values_converge_to_reciprocal() {
        let mut v = init_values(AggregateFunction::Count, 3, &[], NodeId(0)).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
        // repeated pairwise averaging over all pairs until fixed point
        for _ in 0..200 {
            for i in 0..3 {
                for j in (i + 1)..3 {
                    let m = (v[i] + v[j]) / 2.0;
                    v[i] = m;
                    v[j] = m;
                }
            }
        }
        for x in &v {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
            let e = value_estimate(*x, AggregateFunction::Count).value().unwrap();
            assert!((e - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn distinguished_node_is_configurable() {
        let s = init_mass_pairs(AggregateFunction::Sum, 3, &[1.0, 2.0, 3.0], NodeId(2)).unwrap();
        assert_eq!(s[2], MassPair::new(3.0, 1.0));
        assert_eq!(s[0].w, 0.0);
        assert!(init_values(AggregateFunction::Count, 3, &[], NodeId(3)).is_err());
    }

    #[test]
    fn readouts() {
        assert_eq!(MassPair::new(10.0, 2.0).estimate(), Estimate::Value(5.0));
        assert_eq!(MassPair::new(1.0, 0.0).estimate(), Estimate::Undefined);
        assert_eq!(MassPair::new(1.0, 1e-310).estimate(), Estimate::Undefined);
        // tiny but normal weights still give the exact ratio
        assert_eq!(
            MassPair::new(3.0 * 2f64.powi(-60), 2f64.powi(-60)).estimate(),
            Estimate::Value(3.0)
        );
        let e = value_estimate(0.001, AggregateFunction::Count).value().unwrap();
        assert!((e - 1000.0).abs() < 1e-9);
        assert_eq!(value_estimate(0.0, AggregateFunction::Count), Estimate::Undefined);
        assert_eq!(value_estimate(-2.5, AggregateFunction::Average), Estimate::Value(-2.5));
    }

    #[test]
    fn converged_all_pairs_oracle_matches_reciprocal_readout() {
        // n = 1000 all-pairs averaging converges to 1/n everywhere.
        let n = 1000;
        let mut v = init_values(AggregateFunction::Count, n, &[], NodeId(0)).unwrap();
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x = mean);
        let e = value_estimate(v[17], AggregateFunction::Count).value().unwrap();
        assert!((e - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn init_errors() {
        assert!(init_mass_pairs(AggregateFunction::Count, 0, &[], NodeId(0)).is_err());
        assert!(init_mass_pairs(AggregateFunction::Average, 2, &[1.0, f64::NAN], NodeId(0)).is_err());
        assert!(init_mass_pairs(AggregateFunction::Average, 2, &[1.0], NodeId(0)).is_err());
        assert!(init_values(AggregateFunction::Sum, 2, &[1.0, 2.0], NodeId(0)).is_err());
    }

    #[test]
    fn totals_match_targets() {
        let inputs = [3.0, -1.5, 8.25, 0.0, 2.0];
        for f in AggregateFunction::ALL {
            let s: MassPair = init_mass_pairs(f, 5, &inputs, NodeId(1)).unwrap().into_iter().sum();
            match f {
                AggregateFunction::Average => {
                    assert_eq!(s.w, 5.0);
                    assert_eq!(s.s / s.w, f.truth(&inputs));
                }
                AggregateFunction::Sum => {
                    assert_eq!(s.w, 1.0);
                    assert_eq!(s.s, f.truth(&inputs));
                }
                AggregateFunction::Count => {
                    assert_eq!(s.w, 1.0);
                    assert_eq!(s.s, 5.0);
                }
            }
        }
    }

    #[test]
    fn parse_function() {
        assert_eq!("COUNT".parse::<AggregateFunction>().unwrap(), AggregateFunction::Count);
        assert!("median".parse::<AggregateFunction>().is_err());
    }
}
