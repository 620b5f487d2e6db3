//! Iterative scheduling with degradation costing and a tightening BESS usage cap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hdl::{cbup, DegradationEstimator};
use crate::milp::{build_model, operation_cost, solve, CostBreakdown, DispatchSchedule, MicrogridCase, UsageCap, FEAS_TOL};

/// Battery economics used to price degradation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EconParams {
    pub capital_cost: f64,
    pub salvage_value: f64,
    pub soh_eol: f64,
    /// $/kWh of throughput for the linear benchmark.
    pub linear_bdc_rate: f64,
}

impl Default for EconParams {
    fn default() -> Self {
        EconParams {
            capital_cost: 120_000.0,
            salvage_value: 0.0,
            soh_eol: 0.8,
            linear_bdc_rate: 0.05,
        }
    }
}

impl EconParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.salvage_value >= 0.0 && self.capital_cost > self.salvage_value && self.capital_cost.is_finite()) {
            return Err(Error::invalid("need capital_cost > salvage_value >= 0"));
        }
        if !(self.soh_eol > 0.0 && self.soh_eol < 1.0) {
            return Err(Error::invalid("soh_eol must be in (0, 1)"));
        }
        if !(self.linear_bdc_rate >= 0.0 && self.linear_bdc_rate.is_finite()) {
            return Err(Error::invalid("linear_bdc_rate must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LodConfig {
    pub alpha: f64,
    pub max_iterations: usize,
    pub patience: usize,
}

impl Default for LodConfig {
    fn default() -> Self {
        LodConfig {
            alpha: 0.03,
            max_iterations: 200,
            patience: 10,
        }
    }
}

impl LodConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must be in (0, 1)"));
        }
        if self.patience == 0 || self.max_iterations == 0 {
            return Err(Error::invalid("patience and max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LodIteration {
    pub index: usize,
    pub usage_cap_kwh: Option<f64>,
    pub schedule: DispatchSchedule,
    pub bess_throughput: f64,
    pub operation: CostBreakdown,
    pub operation_cost: f64,
    pub degradation: f64,
    pub degradation_cost: f64,
    pub total_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    CapExhausted,
    MaxIterations,
    SolverError(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LodTrace {
    pub iterations: Vec<LodIteration>,
    pub best_index: usize,
    pub termination: Termination,
}

impl LodTrace {
    pub fn best(&self) -> &LodIteration {
        &self.iterations[self.best_index]
    }
}

/// Net capital consumed per unit of SOH lost, times the loss.
pub fn degradation_cost(degradation: f64, econ: &EconParams) -> f64 {
    (econ.capital_cost - econ.salvage_value) / (1.0 - econ.soh_eol) * degradation
}

/// Fixed $/kWh charge on total charge and discharge energy.
pub fn linear_bdc_cost(sched: &DispatchSchedule, dt_hours: f64, econ: &EconParams) -> f64 {
    econ.linear_bdc_rate * sched.bess_throughput(dt_hours)
}

/// SOH loss of every storage unit over the schedule, via half-cycle extraction.
pub fn schedule_degradation(case: &MicrogridCase, sched: &DispatchSchedule, est: &dyn DegradationEstimator) -> Result<f64> {
    let mut total = 0.0;
    for (unit, plan) in case.bess.iter().zip(&sched.bess) {
        let soc = plan.soc_trajectory(unit.e_initial, unit.e_max);
        let cycles = cbup(&soc, &case.series.temp_c, unit.soh, case.dt_hours)?;
        total += est.degradation(&cycles, unit.soh)?;
    }
    Ok(total)
}

fn evaluate(
    case: &MicrogridCase,
    index: usize,
    cap: Option<UsageCap>,
    schedule: DispatchSchedule,
    est: &dyn DegradationEstimator,
    econ: &EconParams,
) -> Result<LodIteration> {
    let operation = operation_cost(&schedule, case);
    let degradation = schedule_degradation(case, &schedule, est)?;
    let degradation_cost = degradation_cost(degradation, econ);
    Ok(LodIteration {
        index,
        usage_cap_kwh: cap.map(|c| c.cap_kwh),
        bess_throughput: schedule.bess_throughput(case.dt_hours),
        operation_cost: operation.total,
        operation,
        degradation,
        degradation_cost,
        total_cost: operation.total + degradation_cost,
        schedule,
    })
}

/// Plain cost-minimizing schedule; degradation is priced afterwards and never fed back.
pub fn run_traditional(case: &MicrogridCase, est: &dyn DegradationEstimator, econ: &EconParams) -> Result<LodIteration> {
    econ.validate()?;
    let s = solve(&build_model(case, None, None)?)?;
    evaluate(case, 0, None, s, est, econ)
}

/// Schedule with a linear throughput charge in the objective; degradation priced afterwards.
pub fn run_linear_bdc(case: &MicrogridCase, est: &dyn DegradationEstimator, econ: &EconParams) -> Result<LodIteration> {
    econ.validate()?;
    let s = solve(&build_model(case, None, Some(econ.linear_bdc_rate))?)?;
    evaluate(case, 0, None, s, est, econ)
}

/// Alternate scheduling and degradation costing, shrinking the usage cap by `alpha` each round.
///
/// Stops after `patience` rounds without a lower total cost, when the battery
/// goes idle, or at `max_iterations`. A solver failure after the first round
/// ends the trace early with [`Termination::SolverError`].
pub fn run_lod(case: &MicrogridCase, est: &dyn DegradationEstimator, econ: &EconParams, cfg: &LodConfig) -> Result<LodTrace> {
    econ.validate()?;
    cfg.validate()?;
    let mut iterations: Vec<LodIteration> = Vec::new();
    let mut cap: Option<UsageCap> = None;
    let mut best_index = 0;
    let mut stale = 0;
    let mut termination = Termination::MaxIterations;

    for index in 0..cfg.max_iterations {
        let solved = build_model(case, cap, None).and_then(|m| solve(&m));
        let schedule = match solved {
            Ok(s) => s,
            Err(e) if index > 0 => {
                log::warn!("iteration {index}: {e}");
                termination = Termination::SolverError(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let it = evaluate(case, index, cap, schedule, est, econ)?;
        log::debug!(
            "iteration {index}: throughput {:.3} kWh, operation ${:.4}, degradation ${:.4}",
            it.bess_throughput,
            it.operation_cost,
            it.degradation_cost
        );
        let throughput = it.bess_throughput;
        if index == 0 || it.total_cost < iterations[best_index].total_cost - 1e-9 {
            best_index = index;
            stale = 0;
        } else {
            stale += 1;
        }
        iterations.push(it);
        if throughput <= FEAS_TOL {
            termination = Termination::CapExhausted;
            break;
        }
        if stale >= cfg.patience {
            termination = Termination::Converged;
            break;
        }
        cap = Some(UsageCap::new((1.0 - cfg.alpha) * throughput)?);
    }
    Ok(LodTrace {
        iterations,
        best_index,
        termination,
    })
}
