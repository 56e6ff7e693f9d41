//! Protocol state machines.

pub mod drg;
pub mod psp;
pub mod push_pull;

use std::fmt;
use std::str::FromStr;

pub use drg::{DrgMode, DrgMsg, DrgState, RandomGrouping};
pub use psp::{PspMsg, PspState, PushSum};
pub use push_pull::{ExchangeId, PpMsg, PpState, PushPull, Variant};

use crate::error::Error;

/// Protocol selector used by configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    Psp,
    Ppg,
    Ppbc,
    Ppow,
    Drg,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 5] = [Self::Psp, Self::Ppg, Self::Ppbc, Self::Ppow, Self::Drg];

    pub fn name(self) -> &'static str {
        match self {
            Self::Psp => "psp",
            Self::Ppg => "ppg",
            Self::Ppbc => "ppbc",
            Self::Ppow => "ppow",
            Self::Drg => "drg",
        }
    }

    pub fn push_pull_variant(self) -> Option<Variant> {
        match self {
            Self::Ppg => Some(Variant::Original),
            Self::Ppbc => Some(Variant::BackCancel),
            Self::Ppow => Some(Variant::OrderedWait),
            Self::Psp | Self::Drg => None,
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::config(
                "protocol",
                format!("unknown protocol `{s}` (expected one of: psp, ppg, ppbc, ppow, drg)"),
            )
        })
    }
}
