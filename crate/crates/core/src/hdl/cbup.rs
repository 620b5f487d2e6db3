use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// SOC steps at or below this magnitude count as flat.
pub const FLAT_EPS: f64 = 1e-12;

pub const HALF_CYCLE: f64 = 0.5;

/// One half cycle extracted from a scheduled SOC trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregatedCycle {
    pub soc_top: f64,
    pub dod: f64,
    pub c_rate: f64,
    pub temp_amb: f64,
    pub soh: f64,
    pub weight: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Charge,
    Discharge,
}

impl AggregatedCycle {
    /// Observable features in network order (SOC, DOD, Temp, C rate, SOH).
    pub fn ubdf_features(&self) -> [f64; 5] {
        [self.soc_top, self.dod, self.temp_amb, self.c_rate, self.soh]
    }
}

pub fn make_ubdf_features(cycle: &AggregatedCycle) -> [f64; 5] {
    cycle.ubdf_features()
}

fn step_sign(delta: f64) -> i8 {
    if delta > FLAT_EPS {
        1
    } else if delta < -FLAT_EPS {
        -1
    } else {
        0
    }
}

/// Split an SOC trajectory into maximal monotone runs, one half cycle each.
///
/// `soc` has one more point than `temps`; interval `t` runs from `soc[t]` to
/// `soc[t + 1]` at ambient `temps[t]`. Flat intervals are dropped and break runs.
pub fn cbup(soc: &[f64], temps: &[f64], soh: f64, dt_hours: f64) -> Result<Vec<AggregatedCycle>> {
    if soc.len() != temps.len() + 1 {
        return Err(Error::Dimension {
            expected: temps.len() + 1,
            got: soc.len(),
        });
    }
    if !(dt_hours > 0.0) {
        return Err(Error::invalid("interval length must be positive"));
    }
    if soc.iter().chain(temps).any(|v| !v.is_finite()) {
        return Err(Error::invalid("SOC trajectory and temperatures must be finite"));
    }

    let mut out = Vec::new();
    let n = temps.len();
    let mut t = 0;
    while t < n {
        let sign = step_sign(soc[t + 1] - soc[t]);
        let start = t;
        while t < n && step_sign(soc[t + 1] - soc[t]) == sign {
            t += 1;
        }
        if sign == 0 {
            continue;
        }
        let len = (t - start) as f64;
        let (a, b) = (soc[start], soc[t]);
        let dod = (b - a).abs();
        out.push(AggregatedCycle {
            soc_top: a.max(b),
            dod,
            c_rate: dod / (len * dt_hours),
            temp_amb: temps[start..t].iter().sum::<f64>() / len,
            soh,
            weight: HALF_CYCLE,
            direction: if sign > 0 { Direction::Charge } else { Direction::Discharge },
        });
    }
    Ok(out)
}
