use crate::aggregate::MassPair;

/// Bookkeeping of where the system's mass is.
///
/// `node + in_flight + lost` equals `initial` at every event for protocols
/// whose payloads carry mass. Node mass is not stored here; it is summed
/// from live node states when auditing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MassLedger {
    pub initial: MassPair,
    pub in_flight: MassPair,
    pub lost: MassPair,
    /// Mass credited back to senders by oracle loss detection.
    pub recovered: MassPair,
}

impl MassLedger {
    pub fn new(initial: MassPair) -> Self {
        MassLedger {
            initial,
            ..MassLedger::default()
        }
    }

    pub fn audit(&self, node: MassPair) -> MassAudit {
        let total = node + self.in_flight + self.lost;
        MassAudit {
            node,
            in_flight: self.in_flight,
            lost: self.lost,
            initial: self.initial,
            deviation: total - self.initial,
            relative: relative_deviation(total, self.initial),
        }
    }
}

/// Snapshot of the ledger identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassAudit {
    pub node: MassPair,
    pub in_flight: MassPair,
    pub lost: MassPair,
    pub initial: MassPair,
    /// `node + in_flight + lost - initial`.
    pub deviation: MassPair,
    /// Largest component-wise deviation, relative to the initial component
    /// (absolute where the initial component is zero).
    pub relative: f64,
}

impl MassAudit {
    pub fn conserved(&self, tol: f64) -> bool {
        self.relative <= tol
    }
}

pub fn relative_deviation(total: MassPair, initial: MassPair) -> f64 {
    fn rel(x: f64, x0: f64) -> f64 {
        let scale = if x0 != 0.0 { x0.abs() } else { 1.0 };
        (x - x0).abs() / scale
    }
    rel(total.s, initial.s).max(rel(total.w, initial.w))
}
