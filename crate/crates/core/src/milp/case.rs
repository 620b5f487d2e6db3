use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dispatchable unit (diesel genset).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub p_min: f64,
    pub p_max: f64,
    /// kW per hour.
    pub ramp: f64,
    /// $/kWh.
    pub cost: f64,
    /// $/h while committed.
    pub no_load_cost: f64,
    /// $ per start.
    pub startup_cost: f64,
    /// Commitment state before the first interval.
    #[serde(default)]
    pub initial_on: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bess {
    pub e_min: f64,
    pub e_max: f64,
    pub e_initial: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub eta_char: f64,
    pub eta_disc: f64,
    /// Health at the start of the day; only used when costing degradation.
    #[serde(default = "full_health")]
    pub soh: f64,
}

fn full_health() -> f64 {
    1.0
}

/// Per-interval forecasts and prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub load_kw: Vec<f64>,
    pub wind_kw: Vec<f64>,
    pub solar_kw: Vec<f64>,
    pub buy_price: Vec<f64>,
    pub sell_price: Vec<f64>,
    pub temp_c: Vec<f64>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.load_kw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load_kw.is_empty()
    }

    fn columns(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("load_kw", &self.load_kw),
            ("wind_kw", &self.wind_kw),
            ("solar_kw", &self.solar_kw),
            ("buy_price", &self.buy_price),
            ("sell_price", &self.sell_price),
            ("temp_c", &self.temp_c),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::invalid("series must contain at least one interval"));
        }
        for (name, col) in self.columns() {
            if col.len() != n {
                return Err(Error::invalid(format!("series column {name} has {} rows, expected {n}", col.len())));
            }
            if let Some(t) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("series column {name} is not finite at hour {}", t + 1)));
            }
        }
        for (name, col) in [("load_kw", &self.load_kw), ("wind_kw", &self.wind_kw), ("solar_kw", &self.solar_kw)] {
            if let Some(t) = col.iter().position(|&v| v < 0.0) {
                return Err(Error::invalid(format!("{name} is negative at hour {}", t + 1)));
            }
        }
        for t in 0..n {
            if self.sell_price[t] > self.buy_price[t] {
                return Err(Error::invalid(format!(
                    "sell price {} exceeds buy price {} at hour {}",
                    self.sell_price[t],
                    self.buy_price[t],
                    t + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrogridCase {
    pub generators: Vec<Generator>,
    pub bess: Vec<Bess>,
    /// Tie-line thermal limit, kW, both directions.
    pub tie_line: f64,
    pub reserve_fraction: f64,
    pub dt_hours: f64,
    pub series: Series,
}

fn nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

impl MicrogridCase {
    pub fn horizon(&self) -> usize {
        self.series.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.series.validate()?;
        if !(self.dt_hours > 0.0 && self.dt_hours.is_finite()) {
            return Err(Error::invalid("dt_hours must be positive"));
        }
        if !nonneg(self.tie_line) {
            return Err(Error::invalid("tie_line must be a nonnegative limit"));
        }
        if !nonneg(self.reserve_fraction) {
            return Err(Error::invalid("reserve_fraction must be nonnegative"));
        }
        for (i, g) in self.generators.iter().enumerate() {
            let ok = nonneg(g.p_min)
                && nonneg(g.p_max)
                && g.p_min <= g.p_max
                && nonneg(g.ramp)
                && g.cost.is_finite()
                && nonneg(g.no_load_cost)
                && nonneg(g.startup_cost);
            if !ok {
                return Err(Error::invalid(format!(
                    "generator {i}: need 0 <= p_min <= p_max, ramp >= 0, finite costs, nonnegative no-load and startup costs"
                )));
            }
        }
        for (i, b) in self.bess.iter().enumerate() {
            if !(b.eta_char > 0.0 && b.eta_char <= 1.0 && b.eta_disc > 0.0 && b.eta_disc <= 1.0) {
                return Err(Error::invalid(format!("bess {i}: efficiencies must be in (0, 1]")));
            }
            if !(nonneg(b.e_min) && b.e_min <= b.e_initial && b.e_initial <= b.e_max && b.e_max > 0.0 && b.e_max.is_finite()) {
                return Err(Error::invalid(format!("bess {i}: need 0 <= e_min <= e_initial <= e_max, e_max > 0")));
            }
            if !(nonneg(b.p_min) && nonneg(b.p_max) && b.p_min <= b.p_max) {
                return Err(Error::invalid(format!("bess {i}: need 0 <= p_min <= p_max")));
            }
            if !(b.soh > 0.0 && b.soh <= 1.0) {
                return Err(Error::invalid(format!("bess {i}: soh must be in (0, 1]")));
            }
        }
        Ok(())
    }

    /// Cheap necessary conditions for feasibility, checked before solving.
    pub fn check_dimensioning(&self) -> Result<()> {
        let s = &self.series;
        let gen_max: f64 = self.generators.iter().map(|g| g.p_max).sum();
        let bess_max: f64 = self.bess.iter().map(|b| b.p_max).sum();
        for t in 0..self.horizon() {
            let renew = s.wind_kw[t] + s.solar_kw[t];
            let supply = self.tie_line + gen_max + renew + bess_max;
            if s.load_kw[t] > supply + 1e-9 {
                return Err(Error::Infeasible {
                    family: "power balance".into(),
                    detail: format!("hour {}: load {} kW exceeds total supply {} kW", t + 1, s.load_kw[t], supply),
                });
            }
            let surplus = renew - s.load_kw[t];
            if surplus > self.tie_line + bess_max + 1e-9 {
                return Err(Error::Infeasible {
                    family: "power balance".into(),
                    detail: format!(
                        "hour {}: must-take renewable surplus {} kW exceeds export plus charging capacity",
                        t + 1,
                        surplus
                    ),
                });
            }
            // best case: no purchase, generators idle, full export
            let headroom = 2.0 * self.tie_line + gen_max;
            if headroom + 1e-9 < self.reserve_fraction * s.load_kw[t] {
                return Err(Error::Infeasible {
                    family: "reserve".into(),
                    detail: format!("hour {}: reserve requirement cannot be met", t + 1),
                });
            }
        }
        Ok(())
    }
}
