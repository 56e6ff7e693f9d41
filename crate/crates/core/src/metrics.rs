//! Error metrics, convergence detection and mass auditing.

use crate::aggregate::Estimate;
use crate::engine::{MassAudit, Protocol, Simulation};
use crate::error::{Error, Result};

/// One sampled observation of a running simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub time: f64,
    /// NaN when no live node remains.
    pub rmse: f64,
    /// NaN when no live node remains or the truth is zero.
    pub cv_rmse: f64,
    /// Mass held by live nodes plus mass in flight.
    pub mass_s: f64,
    pub mass_w: f64,
    pub messages_cum: u64,
    pub buffer_max: usize,
    pub nodes_alive: usize,
}

/// Root-mean-square error of the estimates against `truth`. Undefined
/// estimates count as 0.
pub fn rmse<I>(estimates: I, truth: f64) -> Result<f64>
where
    I: IntoIterator<Item = Estimate>,
{
    let (count, sq) = estimates.into_iter().fold((0usize, 0.0), |(c, acc), e| {
        let d = e.scored() - truth;
        (c + 1, acc + d * d)
    });
    if count == 0 {
        return Err(Error::NoData);
    }
    Ok((sq / count as f64).sqrt())
}

/// Coefficient of variation of the RMSE: `rmse / |truth|`.
pub fn cv_rmse(rmse: f64, truth: f64) -> Result<f64> {
    if truth == 0.0 {
        return Err(Error::NoData);
    }
    Ok(rmse / truth.abs())
}

/// Index of the first row from which `cv_rmse <= eps` holds for every later
/// row. A trace that dips below `eps` and rises again does not count.
pub fn sustained_crossing(rows: &[MetricsRow], eps: f64) -> Option<usize> {
    let start = match rows.iter().rposition(|r| r.cv_rmse.is_nan() || r.cv_rmse > eps) {
        Some(last_bad) => last_bad + 1,
        None => 0,
    };
    (start < rows.len()).then_some(start)
}

/// Time of the sustained crossing of `eps`, or `None` if it never happens.
pub fn time_to_accuracy(rows: &[MetricsRow], eps: f64) -> Option<f64> {
    sustained_crossing(rows, eps).map(|i| rows[i].time)
}

/// Messages sent up to the sustained crossing of `eps`.
pub fn messages_to_accuracy(rows: &[MetricsRow], eps: f64) -> Option<u64> {
    sustained_crossing(rows, eps).map(|i| rows[i].messages_cum)
}

/// Observes the simulation without advancing it.
pub fn sample<P: Protocol>(sim: &Simulation<P>, truth: f64) -> MetricsRow {
    let err = rmse(sim.live_estimates(), truth).unwrap_or(f64::NAN);
    let cv = cv_rmse(err, truth).unwrap_or(f64::NAN);
    let mass = sim.system_mass();
    MetricsRow {
        time: sim.now(),
        rmse: err,
        cv_rmse: cv,
        mass_s: mass.s,
        mass_w: mass.w,
        messages_cum: sim.stats().messages_sent,
        buffer_max: sim.max_buffered(),
        nodes_alive: sim.live_count(),
    }
}

/// Runs the simulation for `periods` sampling periods and returns one row
/// per period, preceded by the row at the current time.
pub fn run_sampled<P: Protocol>(sim: &mut Simulation<P>, truth: f64, periods: u64) -> Vec<MetricsRow> {
    let mut rows = Vec::with_capacity(periods as usize + 1);
    rows.push(sample(sim, truth));
    for _ in 0..periods {
        sim.advance();
        rows.push(sample(sim, truth));
    }
    rows
}

/// Stops new activity, settles everything in progress and audits the mass
/// ledger. Auditing again without resuming reports the same totals.
pub fn drain_and_audit<P: Protocol>(sim: &mut Simulation<P>) -> MassAudit {
    sim.drain()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(time: f64, cv: f64, msgs: u64) -> MetricsRow {
        MetricsRow {
            time,
            rmse: cv,
            cv_rmse: cv,
            mass_s: 0.0,
            mass_w: 0.0,
            messages_cum: msgs,
            buffer_max: 0,
            nodes_alive: 1,
        }
    }

    #[test]
    fn symmetric_deviations() {
        let e = [Estimate::Value(9.0), Estimate::Value(11.0)];
        assert_eq!(rmse(e, 10.0).unwrap(), 1.0);
        assert_eq!(cv_rmse(1.0, 10.0).unwrap(), 0.1);
    }

    #[test]
    fn exact_estimates_give_zero() {
        let e = [Estimate::Value(3.0); 4];
        assert_eq!(rmse(e, 3.0).unwrap(), 0.0);
        assert_eq!(cv_rmse(0.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn count_at_start_penalizes_undefined() {
        let e = [Estimate::Value(1.0), Estimate::Undefined, Estimate::Undefined];
        let r = rmse(e, 3.0).unwrap();
        let oracle = ((4.0 + 9.0 + 9.0) / 3.0f64).sqrt();
        assert_eq!(r, oracle);
        assert!((r - 2.708).abs() < 5e-4);
        assert!((cv_rmse(r, 3.0).unwrap() - 0.9027).abs() < 5e-5);
    }

    #[test]
    fn no_data_cases() {
        assert!(matches!(rmse(Vec::<Estimate>::new(), 1.0), Err(Error::NoData)));
        assert!(matches!(cv_rmse(1.0, 0.0), Err(Error::NoData)));
    }

    #[test]
    fn monotone_trace_crosses_once() {
        let rows: Vec<_> = (0..30).map(|i| row(i as f64, 1.0 / (1 + i) as f64, 10 * i)).collect();
        let eps = 1.0 / 18.0;
        assert_eq!(time_to_accuracy(&rows, eps), Some(17.0));
        assert_eq!(messages_to_accuracy(&rows, eps), Some(170));
    }

    #[test]
    fn dip_does_not_count() {
        let cv = [0.9, 0.05, 0.3, 0.2, 0.08, 0.07, 0.01];
        let rows: Vec<_> = cv.iter().enumerate().map(|(i, &c)| row(i as f64, c, 0)).collect();
        assert_eq!(time_to_accuracy(&rows, 0.1), Some(4.0));
        assert_eq!(time_to_accuracy(&rows, 0.001), None);
    }

    #[test]
    fn nan_rows_block_crossing() {
        let rows = [row(0.0, 0.0, 0), row(1.0, f64::NAN, 0)];
        assert_eq!(time_to_accuracy(&rows, 0.1), None);
        assert_eq!(time_to_accuracy(&[], 0.1), None);
    }
}
