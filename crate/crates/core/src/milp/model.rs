use std::fmt;

use serde::{Deserialize, Serialize};

use super::case::MicrogridCase;
use crate::error::{Error, Result};

/// Bound on total BESS charge plus discharge energy over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsageCap {
    pub cap_kwh: f64,
}

impl UsageCap {
    pub fn new(cap_kwh: f64) -> Result<Self> {
        if !(cap_kwh >= 0.0 && cap_kwh.is_finite()) {
            return Err(Error::invalid(format!("usage cap {cap_kwh} must be a nonnegative number")));
        }
        Ok(UsageCap { cap_kwh })
    }
}

/// Constraint groups of the scheduling problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintFamily {
    PowerBalance,
    GeneratorLimits,
    RampUp,
    RampDown,
    Startup,
    TradeExclusivity,
    BuyLimit,
    SellLimit,
    StorageExclusivity,
    ChargeLimit,
    DischargeLimit,
    EnergyBalance,
    EnergyBounds,
    TerminalEnergy,
    Reserve,
    UsageCap,
    Dimensions,
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::PowerBalance => "power balance",
            Self::GeneratorLimits => "generator output limits",
            Self::RampUp => "ramp-up limit",
            Self::RampDown => "ramp-down limit",
            Self::Startup => "startup linking",
            Self::TradeExclusivity => "buy/sell exclusivity",
            Self::BuyLimit => "tie-line import limit",
            Self::SellLimit => "tie-line export limit",
            Self::StorageExclusivity => "charge/discharge exclusivity",
            Self::ChargeLimit => "charging power limits",
            Self::DischargeLimit => "discharging power limits",
            Self::EnergyBalance => "stored energy recursion",
            Self::EnergyBounds => "stored energy bounds",
            Self::TerminalEnergy => "terminal stored energy",
            Self::Reserve => "reserve requirement",
            Self::UsageCap => "BESS usage cap",
            Self::Dimensions => "schedule dimensions",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub family: ConstraintFamily,
}

/// Column indices of one generator at one interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenVars {
    pub p: usize,
    pub u: usize,
    pub v: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BessVars {
    pub p_char: usize,
    pub p_disc: usize,
    pub u_char: usize,
    pub u_disc: usize,
    /// Stored energy at the end of the interval.
    pub energy: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TradeVars {
    pub p_buy: usize,
    pub p_sell: usize,
    pub u_buy: usize,
    pub u_sell: usize,
}

/// Column layout, indexed `[t][unit]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub gens: Vec<Vec<GenVars>>,
    pub trade: Vec<TradeVars>,
    pub bess: Vec<Vec<BessVars>>,
}

/// The scheduling MILP in plain row form.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub case: MicrogridCase,
    pub cap: Option<UsageCap>,
    pub linear_bdc_rate: Option<f64>,
    pub layout: Layout,
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Binary columns in branching priority order.
    pub binaries: Vec<usize>,
    pub rows: Vec<Row>,
}

impl MilpModel {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.binaries.len()
    }

    pub fn is_binary(&self, col: usize) -> bool {
        self.binaries.contains(&col)
    }
}

struct Builder {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    binaries: Vec<usize>,
    rows: Vec<Row>,
}

impl Builder {
    fn var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lo);
        self.upper.push(hi);
        self.objective.len() - 1
    }

    fn binary(&mut self, cost: f64) -> usize {
        let c = self.var(cost, 0.0, 1.0);
        self.binaries.push(c);
        c
    }

    fn row(&mut self, family: ConstraintFamily, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row {
            terms,
            sense,
            rhs,
            family,
        });
    }
}

/// Build the day-ahead scheduling MILP; optional usage cap and linear degradation charge.
pub fn build_model(case: &MicrogridCase, cap: Option<UsageCap>, linear_bdc_rate: Option<f64>) -> Result<MilpModel> {
    case.validate()?;
    case.check_dimensioning()?;
    if let Some(r) = linear_bdc_rate {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::invalid(format!("linear degradation rate {r} must be nonnegative")));
        }
    }
    let dt = case.dt_hours;
    let s = &case.series;
    let horizon = case.horizon();
    let bdc = linear_bdc_rate.unwrap_or(0.0);
    let mut b = Builder {
        objective: Vec::new(),
        lower: Vec::new(),
        upper: Vec::new(),
        binaries: Vec::new(),
        rows: Vec::new(),
    };
    let mut layout = Layout {
        gens: Vec::with_capacity(horizon),
        trade: Vec::with_capacity(horizon),
        bess: Vec::with_capacity(horizon),
    };

    // columns, interval-major so branching follows time
    for t in 0..horizon {
        let gens: Vec<GenVars> = case
            .generators
            .iter()
            .map(|g| {
                let p = b.var(g.cost * dt, 0.0, g.p_max);
                let u = b.binary(g.no_load_cost * dt);
                let v = b.binary(g.startup_cost);
                GenVars { p, u, v }
            })
            .collect();
        let p_buy = b.var(s.buy_price[t] * dt, 0.0, case.tie_line);
        let p_sell = b.var(-s.sell_price[t] * dt, 0.0, case.tie_line);
        let u_buy = b.binary(0.0);
        let u_sell = b.binary(0.0);
        let bess: Vec<BessVars> = case
            .bess
            .iter()
            .map(|st| {
                let p_char = b.var(bdc * dt, 0.0, st.p_max);
                let p_disc = b.var(bdc * dt, 0.0, st.p_max);
                let u_char = b.binary(0.0);
                let u_disc = b.binary(0.0);
                let energy = b.var(0.0, st.e_min, st.e_max);
                BessVars {
                    p_char,
                    p_disc,
                    u_char,
                    u_disc,
                    energy,
                }
            })
            .collect();
        layout.gens.push(gens);
        layout.trade.push(TradeVars {
            p_buy,
            p_sell,
            u_buy,
            u_sell,
        });
        layout.bess.push(bess);
    }

    use ConstraintFamily as F;
    for t in 0..horizon {
        let tr = layout.trade[t];
        let mut bal = vec![(tr.p_buy, 1.0), (tr.p_sell, -1.0)];
        bal.extend(layout.gens[t].iter().map(|g| (g.p, 1.0)));
        for x in &layout.bess[t] {
            bal.push((x.p_disc, 1.0));
            bal.push((x.p_char, -1.0));
        }
        b.row(F::PowerBalance, bal, Sense::Eq, s.load_kw[t] - s.wind_kw[t] - s.solar_kw[t]);

        for (gi, (g, x)) in case.generators.iter().zip(&layout.gens[t]).enumerate() {
            b.row(F::GeneratorLimits, vec![(x.p, 1.0), (x.u, -g.p_max)], Sense::Le, 0.0);
            b.row(F::GeneratorLimits, vec![(x.p, 1.0), (x.u, -g.p_min)], Sense::Ge, 0.0);
            if t > 0 {
                let prev = layout.gens[t - 1][gi];
                b.row(F::RampUp, vec![(x.p, 1.0), (prev.p, -1.0)], Sense::Le, dt * g.ramp);
                b.row(F::RampDown, vec![(prev.p, 1.0), (x.p, -1.0)], Sense::Le, dt * g.ramp);
                b.row(F::Startup, vec![(x.v, 1.0), (x.u, -1.0), (prev.u, 1.0)], Sense::Ge, 0.0);
            } else {
                let init = if g.initial_on { 1.0 } else { 0.0 };
                b.row(F::Startup, vec![(x.v, 1.0), (x.u, -1.0)], Sense::Ge, -init);
            }
        }

        b.row(F::TradeExclusivity, vec![(tr.u_buy, 1.0), (tr.u_sell, 1.0)], Sense::Le, 1.0);
        b.row(F::BuyLimit, vec![(tr.p_buy, 1.0), (tr.u_buy, -case.tie_line)], Sense::Le, 0.0);
        b.row(F::SellLimit, vec![(tr.p_sell, 1.0), (tr.u_sell, -case.tie_line)], Sense::Le, 0.0);

        for (si, (st, x)) in case.bess.iter().zip(&layout.bess[t]).enumerate() {
            b.row(F::StorageExclusivity, vec![(x.u_char, 1.0), (x.u_disc, 1.0)], Sense::Le, 1.0);
            b.row(F::ChargeLimit, vec![(x.p_char, 1.0), (x.u_char, -st.p_max)], Sense::Le, 0.0);
            b.row(F::ChargeLimit, vec![(x.p_char, 1.0), (x.u_char, -st.p_min)], Sense::Ge, 0.0);
            b.row(F::DischargeLimit, vec![(x.p_disc, 1.0), (x.u_disc, -st.p_max)], Sense::Le, 0.0);
            b.row(F::DischargeLimit, vec![(x.p_disc, 1.0), (x.u_disc, -st.p_min)], Sense::Ge, 0.0);
            let mut terms = vec![
                (x.energy, 1.0),
                (x.p_disc, dt / st.eta_disc),
                (x.p_char, -dt * st.eta_char),
            ];
            let rhs = if t > 0 {
                terms.push((layout.bess[t - 1][si].energy, -1.0));
                0.0
            } else {
                st.e_initial
            };
            b.row(F::EnergyBalance, terms, Sense::Eq, rhs);
        }

        // tie-line headroom plus generator headroom, offline units included
        let mut res = vec![(tr.p_buy, -1.0), (tr.p_sell, 1.0)];
        res.extend(layout.gens[t].iter().map(|g| (g.p, -1.0)));
        let gen_max: f64 = case.generators.iter().map(|g| g.p_max).sum();
        b.row(F::Reserve, res, Sense::Ge, case.reserve_fraction * s.load_kw[t] - case.tie_line - gen_max);
    }
    for (si, st) in case.bess.iter().enumerate() {
        let last = layout.bess[horizon - 1][si].energy;
        b.row(F::TerminalEnergy, vec![(last, 1.0)], Sense::Eq, st.e_initial);
    }
    if let Some(c) = cap {
        let terms: Vec<(usize, f64)> = layout
            .bess
            .iter()
            .flatten()
            .flat_map(|x| [(x.p_char, dt), (x.p_disc, dt)])
            .collect();
        if !terms.is_empty() {
            b.row(F::UsageCap, terms, Sense::Le, c.cap_kwh);
        }
    }

    Ok(MilpModel {
        case: case.clone(),
        cap,
        linear_bdc_rate,
        layout,
        objective: b.objective,
        lower: b.lower,
        upper: b.upper,
        binaries: b.binaries,
        rows: b.rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::case::tests::one_interval;
    use crate::milp::case::Bess;

    #[test]
    fn binary_count_single_gen_single_bess() {
        let mut c = one_interval(100.0, 0.2);
        let day = |v: f64| vec![v; 24];
        c.series = crate::milp::Series {
            load_kw: day(100.0),
            wind_kw: day(0.0),
            solar_kw: day(0.0),
            buy_price: day(0.2),
            sell_price: day(0.1),
            temp_c: day(25.0),
        };
        c.bess.push(Bess {
            e_min: 30.0,
            e_max: 300.0,
            e_initial: 150.0,
            p_min: 0.0,
            p_max: 150.0,
            eta_char: 0.9,
            eta_disc: 0.9,
            soh: 1.0,
        });
        let m = build_model(&c, None, None).unwrap();
        assert_eq!(m.num_binaries(), 144);
        assert!(m.binaries.iter().all(|&b| m.lower[b] == 0.0 && m.upper[b] == 1.0));
        let capped = build_model(&c, Some(UsageCap::new(0.0).unwrap()), None).unwrap();
        assert_eq!(capped.rows.len(), m.rows.len() + 1);
        assert!(UsageCap::new(-1.0).is_err());
    }

    #[test]
    fn rejects_bad_inputs_before_solving() {
        let c = one_interval(5000.0, 0.2);
        assert!(matches!(build_model(&c, None, None), Err(Error::Infeasible { .. })));
        assert!(build_model(&one_interval(10.0, 0.2), None, Some(-0.1)).is_err());
    }
}
