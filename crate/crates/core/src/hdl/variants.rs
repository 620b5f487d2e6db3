use std::fmt;

use serde::{Deserialize, Serialize};

use crate::aging::AgingSample;
use crate::error::{Error, Result};

/// Battery degradation features, observable (first five) and unobtainable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    Soc,
    Dod,
    Temp,
    CRate,
    Soh,
    It,
    Ir,
    Elcn,
}

use Feature::*;

/// Observable features, in network input order.
pub const BDF: [Feature; 5] = [Soc, Dod, Temp, CRate, Soh];

impl Feature {
    /// Whether the feature is min-max scaled before entering a network.
    pub fn normalized(self) -> bool {
        !matches!(self, CRate | Soh)
    }

    pub fn is_unobtainable(self) -> bool {
        matches!(self, It | Ir | Elcn)
    }

    pub fn of_sample(self, s: &AgingSample) -> f64 {
        let (c, o) = (&s.conditions, &s.outcome);
        match self {
            Soc => c.soc_high,
            Dod => c.dod,
            Temp => c.temp_amb,
            CRate => c.c_rate,
            Soh => c.soh,
            It => o.internal_temp,
            Ir => o.internal_resistance,
            Elcn => o.elcn,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Soc => "SOC",
            Dod => "DOD",
            Temp => "Temp",
            CRate => "C rate",
            Soh => "SOH",
            It => "IT",
            Ir => "IR",
            Elcn => "ELCN",
        }
    }
}

/// First-stage network choice: which unobtainable features it predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct UbdfVariant(u8);

impl UbdfVariant {
    pub const ALL: [UbdfVariant; 6] = [
        UbdfVariant(1),
        UbdfVariant(2),
        UbdfVariant(3),
        UbdfVariant(4),
        UbdfVariant(5),
        UbdfVariant(6),
    ];

    pub fn new(id: u8) -> Result<Self> {
        if (1..=6).contains(&id) {
            Ok(UbdfVariant(id))
        } else {
            Err(Error::invalid(format!("UBDF variant {id} does not exist (1..=6)")))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn inputs(self) -> &'static [Feature] {
        &BDF
    }

    pub fn outputs(self) -> &'static [Feature] {
        match self.0 {
            1 => &[It],
            2 => &[Ir],
            3 => &[It, Ir],
            4 => &[It, Elcn],
            5 => &[Ir, Elcn],
            _ => &[It, Ir, Elcn],
        }
    }
}

impl TryFrom<u8> for UbdfVariant {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<UbdfVariant> for u8 {
    fn from(v: UbdfVariant) -> u8 {
        v.0
    }
}

impl fmt::Display for UbdfVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UBDF-{}", self.0)
    }
}

/// Second-stage network choice: which features it consumes to predict degradation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct BdpVariant(u8);

impl BdpVariant {
    pub const ALL: [BdpVariant; 10] = [
        BdpVariant(1),
        BdpVariant(2),
        BdpVariant(3),
        BdpVariant(4),
        BdpVariant(5),
        BdpVariant(6),
        BdpVariant(7),
        BdpVariant(8),
        BdpVariant(9),
        BdpVariant(10),
    ];

    pub fn new(id: u8) -> Result<Self> {
        if (1..=10).contains(&id) {
            Ok(BdpVariant(id))
        } else {
            Err(Error::invalid(format!("BDP variant {id} does not exist (1..=10)")))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn inputs(self) -> &'static [Feature] {
        match self.0 {
            1 => &[It, Elcn],
            2 => &[Ir, Elcn],
            3 => &[Soc, Dod, Temp, CRate, It],
            4 => &[Soc, Dod, Temp, CRate, Ir],
            5 => &[Soc, Dod, Temp, CRate, It, Elcn],
            6 => &[Soc, Dod, Temp, CRate, Ir, Elcn],
            7 => &[Soc, Dod, Temp, CRate, It, Soh],
            8 => &[Soc, Dod, Temp, CRate, Ir, Soh],
            9 => &[Soc, Dod, Temp, CRate, It, Soh, Elcn],
            _ => &[Soc, Dod, Temp, CRate, Ir, Soh, Elcn],
        }
    }

    /// Inputs that must come from the first stage.
    pub fn unobtainable_inputs(self) -> impl Iterator<Item = Feature> {
        self.inputs().iter().copied().filter(|f| f.is_unobtainable())
    }

    /// True when every unobtainable input is produced by `ubdf`.
    pub fn compatible_with(self, ubdf: UbdfVariant) -> bool {
        self.unobtainable_inputs().all(|f| ubdf.outputs().contains(&f))
    }
}

impl TryFrom<u8> for BdpVariant {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BdpVariant> for u8 {
    fn from(v: BdpVariant) -> u8 {
        v.0
    }
}

impl fmt::Display for BdpVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BDP-{}", self.0)
    }
}

/// All (UBDF, BDP) pairs satisfying composition closure, in id order.
pub fn compatible_pairs() -> Vec<(UbdfVariant, BdpVariant)> {
    let mut out = Vec::new();
    for u in UbdfVariant::ALL {
        for b in BdpVariant::ALL {
            if b.compatible_with(u) {
                out.push((u, b));
            }
        }
    }
    out
}
