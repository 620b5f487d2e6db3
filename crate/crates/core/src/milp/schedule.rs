use serde::{Deserialize, Serialize};

use super::case::MicrogridCase;
use super::model::{ConstraintFamily, UsageCap};

/// Absolute feasibility tolerance in kW / kWh.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSchedule {
    pub p: Vec<f64>,
    pub u: Vec<bool>,
    pub v: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BessSchedule {
    pub p_char: Vec<f64>,
    pub p_disc: Vec<f64>,
    pub u_char: Vec<bool>,
    pub u_disc: Vec<bool>,
    /// Stored energy at the end of each interval.
    pub energy: Vec<f64>,
}

impl BessSchedule {
    /// SOC at interval boundaries, starting with the initial state: `T + 1` points.
    pub fn soc_trajectory(&self, e_initial: f64, e_max: f64) -> Vec<f64> {
        std::iter::once(e_initial)
            .chain(self.energy.iter().copied())
            .map(|e| e / e_max)
            .collect()
    }

    /// Discharge positive, charge negative.
    pub fn net_power(&self) -> Vec<f64> {
        self.p_disc.iter().zip(&self.p_char).map(|(d, c)| d - c).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub generation: f64,
    pub no_load: f64,
    pub startup: f64,
    pub purchase: f64,
    pub sale_revenue: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSchedule {
    pub generators: Vec<GeneratorSchedule>,
    pub p_buy: Vec<f64>,
    pub p_sell: Vec<f64>,
    pub u_buy: Vec<bool>,
    pub u_sell: Vec<bool>,
    pub bess: Vec<BessSchedule>,
    /// Solver objective, including any linear degradation charge.
    pub objective: f64,
}

impl DispatchSchedule {
    pub fn horizon(&self) -> usize {
        self.p_buy.len()
    }

    /// Total charge plus discharge energy of all storage units, kWh.
    pub fn bess_throughput(&self, dt_hours: f64) -> f64 {
        self.bess
            .iter()
            .map(|b| b.p_char.iter().chain(&b.p_disc).sum::<f64>() * dt_hours)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub family: ConstraintFamily,
    /// Zero-based interval, when the constraint is per interval.
    pub interval: Option<usize>,
    pub detail: String,
}

struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn le(&mut self, family: ConstraintFamily, t: Option<usize>, lhs: f64, rhs: f64, what: &str) {
        if !(lhs <= rhs + FEAS_TOL) {
            self.out.push(Violation {
                family,
                interval: t,
                detail: format!("{what}: {lhs} > {rhs}"),
            });
        }
    }

    fn eq(&mut self, family: ConstraintFamily, t: Option<usize>, lhs: f64, rhs: f64, what: &str) {
        if !((lhs - rhs).abs() <= FEAS_TOL) {
            self.out.push(Violation {
                family,
                interval: t,
                detail: format!("{what}: {lhs} != {rhs}"),
            });
        }
    }
}

fn b(x: bool) -> f64 {
    if x {
        1.0
    } else {
        0.0
    }
}

/// Re-check every constraint of the scheduling problem by plain arithmetic.
///
/// Returns an empty list iff the schedule is feasible within [`FEAS_TOL`].
pub fn validate_schedule(case: &MicrogridCase, sched: &DispatchSchedule, cap: Option<UsageCap>) -> Vec<Violation> {
    use ConstraintFamily as F;
    let n = case.horizon();
    let dims_ok = sched.horizon() == n
        && sched.p_sell.len() == n
        && sched.u_buy.len() == n
        && sched.u_sell.len() == n
        && sched.generators.len() == case.generators.len()
        && sched.bess.len() == case.bess.len()
        && sched.generators.iter().all(|g| g.p.len() == n && g.u.len() == n && g.v.len() == n)
        && sched.bess.iter().all(|s| {
            s.p_char.len() == n && s.p_disc.len() == n && s.u_char.len() == n && s.u_disc.len() == n && s.energy.len() == n
        });
    if !dims_ok {
        return vec![Violation {
            family: F::Dimensions,
            interval: None,
            detail: format!("schedule does not match the case ({n} intervals, {} generators, {} storage units)", case.generators.len(), case.bess.len()),
        }];
    }

    let mut c = Checker { out: Vec::new() };
    let dt = case.dt_hours;
    let s = &case.series;
    for t in 0..n {
        let tt = Some(t);
        let supply = sched.p_buy[t]
            + sched.generators.iter().map(|g| g.p[t]).sum::<f64>()
            + s.wind_kw[t]
            + s.solar_kw[t]
            + sched.bess.iter().map(|x| x.p_disc[t]).sum::<f64>();
        let demand = sched.p_sell[t] + s.load_kw[t] + sched.bess.iter().map(|x| x.p_char[t]).sum::<f64>();
        c.eq(F::PowerBalance, tt, supply, demand, "supply vs demand");

        for (gi, (g, x)) in case.generators.iter().zip(&sched.generators).enumerate() {
            c.le(F::GeneratorLimits, tt, g.p_min * b(x.u[t]), x.p[t], &format!("generator {gi} minimum"));
            c.le(F::GeneratorLimits, tt, x.p[t], g.p_max * b(x.u[t]), &format!("generator {gi} maximum"));
            let prev_u = if t > 0 { x.u[t - 1] } else { g.initial_on };
            c.le(F::Startup, tt, b(x.u[t]) - b(prev_u), b(x.v[t]), &format!("generator {gi} start"));
            if t > 0 {
                c.le(F::RampUp, tt, x.p[t] - x.p[t - 1], dt * g.ramp, &format!("generator {gi} ramp up"));
                c.le(F::RampDown, tt, x.p[t - 1] - x.p[t], dt * g.ramp, &format!("generator {gi} ramp down"));
            }
        }

        c.le(F::TradeExclusivity, tt, b(sched.u_buy[t]) + b(sched.u_sell[t]), 1.0, "buy + sell flags");
        c.le(F::BuyLimit, tt, 0.0, sched.p_buy[t], "purchase sign");
        c.le(F::BuyLimit, tt, sched.p_buy[t], b(sched.u_buy[t]) * case.tie_line, "purchase");
        c.le(F::SellLimit, tt, 0.0, sched.p_sell[t], "sale sign");
        c.le(F::SellLimit, tt, sched.p_sell[t], b(sched.u_sell[t]) * case.tie_line, "sale");

        for (si, (st, x)) in case.bess.iter().zip(&sched.bess).enumerate() {
            c.le(F::StorageExclusivity, tt, b(x.u_char[t]) + b(x.u_disc[t]), 1.0, &format!("bess {si} mode flags"));
            c.le(F::ChargeLimit, tt, st.p_min * b(x.u_char[t]), x.p_char[t], &format!("bess {si} charge minimum"));
            c.le(F::ChargeLimit, tt, x.p_char[t], st.p_max * b(x.u_char[t]), &format!("bess {si} charge maximum"));
            c.le(F::DischargeLimit, tt, st.p_min * b(x.u_disc[t]), x.p_disc[t], &format!("bess {si} discharge minimum"));
            c.le(F::DischargeLimit, tt, x.p_disc[t], st.p_max * b(x.u_disc[t]), &format!("bess {si} discharge maximum"));
            let prev = if t > 0 { x.energy[t - 1] } else { st.e_initial };
            let expected = prev - dt * (x.p_disc[t] / st.eta_disc - x.p_char[t] * st.eta_char);
            c.eq(F::EnergyBalance, tt, x.energy[t], expected, &format!("bess {si} stored energy"));
            c.le(F::EnergyBounds, tt, st.e_min, x.energy[t], &format!("bess {si} minimum energy"));
            c.le(F::EnergyBounds, tt, x.energy[t], st.e_max, &format!("bess {si} maximum energy"));
        }

        let headroom = case.tie_line - sched.p_buy[t]
            + sched.p_sell[t]
            + case
                .generators
                .iter()
                .zip(&sched.generators)
                .map(|(g, x)| g.p_max - x.p[t])
                .sum::<f64>();
        c.le(F::Reserve, tt, case.reserve_fraction * s.load_kw[t], headroom, "reserve headroom");
    }
    for (si, (st, x)) in case.bess.iter().zip(&sched.bess).enumerate() {
        c.eq(F::TerminalEnergy, None, x.energy[n - 1], st.e_initial, &format!("bess {si} final energy"));
    }
    if let Some(cap) = cap {
        c.le(F::UsageCap, None, sched.bess_throughput(dt), cap.cap_kwh, "charge + discharge energy");
    }
    c.out
}

/// Operating cost by term: generation, no-load, startup, purchases, minus sales.
pub fn operation_cost(sched: &DispatchSchedule, case: &MicrogridCase) -> CostBreakdown {
    let dt = case.dt_hours;
    let s = &case.series;
    let mut k = CostBreakdown::default();
    for (g, x) in case.generators.iter().zip(&sched.generators) {
        for t in 0..sched.horizon() {
            k.generation += x.p[t] * g.cost * dt;
            k.no_load += b(x.u[t]) * g.no_load_cost * dt;
            k.startup += b(x.v[t]) * g.startup_cost;
        }
    }
    for t in 0..sched.horizon() {
        k.purchase += sched.p_buy[t] * s.buy_price[t] * dt;
        k.sale_revenue += sched.p_sell[t] * s.sell_price[t] * dt;
    }
    k.total = k.generation + k.no_load + k.startup + k.purchase - k.sale_revenue;
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::case::tests::one_interval;

    fn idle(n: usize, gens: usize) -> DispatchSchedule {
        DispatchSchedule {
            generators: (0..gens)
                .map(|_| GeneratorSchedule {
                    p: vec![0.0; n],
                    u: vec![false; n],
                    v: vec![false; n],
                })
                .collect(),
            p_buy: vec![0.0; n],
            p_sell: vec![0.0; n],
            u_buy: vec![false; n],
            u_sell: vec![false; n],
            bess: vec![],
            objective: 0.0,
        }
    }

    #[test]
    fn idle_schedule_costs_nothing() {
        let c = one_interval(0.0, 0.2);
        let s = idle(1, 1);
        assert!(validate_schedule(&c, &s, None).is_empty());
        assert_eq!(operation_cost(&s, &c).total, 0.0);
    }

    #[test]
    fn sale_hour_is_revenue() {
        let mut c = one_interval(0.0, 0.2);
        c.series.sell_price[0] = 0.10;
        c.series.solar_kw[0] = 50.0;
        let mut s = idle(1, 1);
        s.p_sell[0] = 50.0;
        s.u_sell[0] = true;
        assert!(validate_schedule(&c, &s, None).is_empty());
        assert!((operation_cost(&s, &c).total + 5.0).abs() < 1e-12);
    }

    #[test]
    fn names_violated_family() {
        let c = one_interval(100.0, 0.2);
        let mut s = idle(1, 1);
        s.p_buy[0] = 100.0;
        s.u_buy[0] = true;
        assert!(validate_schedule(&c, &s, None).is_empty());
        s.u_sell[0] = true;
        let v = validate_schedule(&c, &s, None);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].family, ConstraintFamily::TradeExclusivity);
        s.u_sell[0] = false;
        s.p_buy[0] = 90.0;
        assert_eq!(validate_schedule(&c, &s, None)[0].family, ConstraintFamily::PowerBalance);
        assert_eq!(validate_schedule(&c, &idle(2, 1), None)[0].family, ConstraintFamily::Dimensions);
    }

    #[test]
    fn soc_and_net_power() {
        let b = BessSchedule {
            p_char: vec![10.0, 0.0],
            p_disc: vec![0.0, 20.0],
            u_char: vec![true, false],
            u_disc: vec![false, true],
            energy: vec![159.0, 136.0],
        };
        assert_eq!(b.soc_trajectory(150.0, 300.0), vec![0.5, 0.53, 136.0 / 300.0]);
        assert_eq!(b.net_power(), vec![-10.0, 20.0]);
    }
}
