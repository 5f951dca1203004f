//! Dislocation types revealed by etch pits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The three dislocation families distinguished by etch-pit morphology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DislocationType {
    /// Basal plane dislocation: elongated, shell-shaped pit.
    #[serde(rename = "BPD")]
    Bpd,
    /// Threading edge dislocation: small round pit with a core.
    #[serde(rename = "TED")]
    Ted,
    /// Threading screw dislocation: large round pit with a core.
    #[serde(rename = "TSD")]
    Tsd,
}

impl DislocationType {
    pub const ALL: [DislocationType; 3] =
        [DislocationType::Bpd, DislocationType::Ted, DislocationType::Tsd];

    /// COCO category id: BPD=1, TED=2, TSD=3.
    pub fn category_id(self) -> u32 {
        match self {
            DislocationType::Bpd => 1,
            DislocationType::Ted => 2,
            DislocationType::Tsd => 3,
        }
    }

    pub fn from_category_id(id: u32) -> Option<Self> {
        match id {
            1 => Some(DislocationType::Bpd),
            2 => Some(DislocationType::Ted),
            3 => Some(DislocationType::Tsd),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DislocationType::Bpd => "BPD",
            DislocationType::Ted => "TED",
            DislocationType::Tsd => "TSD",
        }
    }

    pub fn index(self) -> usize {
        self.category_id() as usize - 1
    }
}

impl fmt::Display for DislocationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DislocationType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "BPD" => Ok(DislocationType::Bpd),
            "TED" => Ok(DislocationType::Ted),
            "TSD" => Ok(DislocationType::Tsd),
            other => Err(Error::InvalidInput(format!("unknown dislocation type {other:?}"))),
        }
    }
}

/// Fixed-size per-type container indexed by [`DislocationType`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerType<T> {
    pub bpd: T,
    pub ted: T,
    pub tsd: T,
}

impl<T> PerType<T> {
    pub fn get(&self, t: DislocationType) -> &T {
        match t {
            DislocationType::Bpd => &self.bpd,
            DislocationType::Ted => &self.ted,
            DislocationType::Tsd => &self.tsd,
        }
    }

    pub fn get_mut(&mut self, t: DislocationType) -> &mut T {
        match t {
            DislocationType::Bpd => &mut self.bpd,
            DislocationType::Ted => &mut self.ted,
            DislocationType::Tsd => &mut self.tsd,
        }
    }

    pub fn from_fn(mut f: impl FnMut(DislocationType) -> T) -> Self {
        PerType {
            bpd: f(DislocationType::Bpd),
            ted: f(DislocationType::Ted),
            tsd: f(DislocationType::Tsd),
        }
    }
}
