//! Day-ahead microgrid scheduling as a mixed-integer linear program.

mod case;
mod model;
mod schedule;
mod solve;

pub use case::{Bess, Generator, MicrogridCase, Series};
pub use model::{build_model, BessVars, ConstraintFamily, GenVars, Layout, MilpModel, Row, Sense, TradeVars, UsageCap};
pub use schedule::{
    operation_cost, validate_schedule, BessSchedule, CostBreakdown, DispatchSchedule, GeneratorSchedule, Violation,
    FEAS_TOL,
};
pub use solve::{solve, solve_fixed, solve_with, SolveStats, SolverOptions};
