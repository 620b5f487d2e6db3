use microlp::{ComparisonOp, OptimizationDirection, Problem, Solution, Variable};

use super::model::{ConstraintFamily, MilpModel, Sense};
use super::schedule::{BessSchedule, DispatchSchedule, GeneratorSchedule};
use crate::error::{Error, Result};

/// Branch-and-bound settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Nodes whose bound is within this relative margin of the incumbent are pruned.
    pub rel_gap: f64,
    /// Distance from 0/1 below which a relaxed binary counts as integral.
    pub int_tol: f64,
    pub node_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rel_gap: 1e-9,
            int_tol: 1e-7,
            node_limit: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub nodes: usize,
    pub incumbent_updates: usize,
}

/// Solve with default options.
pub fn solve(model: &MilpModel) -> Result<DispatchSchedule> {
    solve_with(model, &SolverOptions::default()).map(|(s, _)| s)
}

/// Depth-first branch and bound over the LP relaxation.
///
/// Branches on the first fractional binary in the model's priority order,
/// down branch first. Nodes are solved by fixing one variable on a copy of the
/// parent LP, which reuses the parent's basis.
pub fn solve_with(model: &MilpModel, opts: &SolverOptions) -> Result<(DispatchSchedule, SolveStats)> {
    let fixed = vec![None; model.num_vars()];
    let root = match solve_lp(model, &fixed, None) {
        Ok(s) => s,
        Err(microlp::Error::Infeasible) => return Err(diagnose(model)),
        Err(e) => return Err(lp_error(e)),
    };
    let vars = columns(model.num_vars());
    let value = |s: &Solution, c: usize| s.var_value_raw(vars[c]);

    let mut stats = SolveStats::default();
    let mut best: Option<(f64, Vec<bool>)> = None;
    if let Some(cand) = rounding_heuristic(model, &root, &vars) {
        best = Some(cand);
        stats.incumbent_updates += 1;
    }

    // each entry: a parent relaxation plus the fix to apply to it
    let mut stack: Vec<(Solution, Option<(usize, f64)>)> = vec![(root, None)];
    while let Some((parent, fix)) = stack.pop() {
        let sol = match fix {
            None => parent,
            Some((col, val)) => match parent.fix_var(vars[col], val) {
                Ok(out) => match out.into_solution() {
                    Ok(s) => s,
                    Err(_) => return Err(Error::Solver("LP solve interrupted".into())),
                },
                Err(microlp::Error::Infeasible) => continue,
                Err(e) => return Err(lp_error(e)),
            },
        };
        stats.nodes += 1;
        if stats.nodes > opts.node_limit {
            return Err(Error::Solver(format!("node limit {} reached without proving optimality", opts.node_limit)));
        }
        let bound = sol.objective();
        if let Some((inc, _)) = &best {
            if bound >= inc - opts.rel_gap * inc.abs().max(1.0) {
                continue;
            }
        }
        let frac = model.binaries.iter().copied().find(|&c| {
            let x = value(&sol, c);
            (x - x.round()).abs() > opts.int_tol
        });
        match frac {
            None => {
                let pattern = model.binaries.iter().map(|&c| value(&sol, c) > 0.5).collect();
                best = Some((bound, pattern));
                stats.incumbent_updates += 1;
            }
            Some(col) => {
                if stats.nodes % 64 == 0 {
                    if let Some((obj, pat)) = rounding_heuristic(model, &sol, &vars) {
                        if best.as_ref().is_none_or(|(inc, _)| obj < *inc) {
                            best = Some((obj, pat));
                            stats.incumbent_updates += 1;
                        }
                    }
                }
                stack.push((sol.clone(), Some((col, 1.0))));
                stack.push((sol, Some((col, 0.0))));
            }
        }
    }

    let (_, pattern) = best.ok_or_else(|| Error::Infeasible {
        family: "binary restrictions".into(),
        detail: "the relaxation is feasible but no 0/1 commitment pattern is".into(),
    })?;
    let sched = polish(model, &pattern)?;
    Ok((sched, stats))
}

/// Objective of the problem with all binaries fixed, or `None` if that is infeasible.
pub fn solve_fixed(model: &MilpModel, pattern: &[bool]) -> Result<Option<DispatchSchedule>> {
    match polish(model, pattern) {
        Ok(s) => Ok(Some(s)),
        Err(Error::Infeasible { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn polish(model: &MilpModel, pattern: &[bool]) -> Result<DispatchSchedule> {
    let mut fixed = vec![None; model.num_vars()];
    for (&c, &on) in model.binaries.iter().zip(pattern) {
        fixed[c] = Some(if on { 1.0 } else { 0.0 });
    }
    let sol = match solve_lp(model, &fixed, None) {
        Ok(s) => s,
        Err(microlp::Error::Infeasible) => {
            return Err(Error::Infeasible {
                family: "binary restrictions".into(),
                detail: "fixed commitment pattern is infeasible".into(),
            })
        }
        Err(e) => return Err(lp_error(e)),
    };
    let x: Vec<f64> = columns(model.num_vars()).into_iter().map(|v| sol.var_value_raw(v)).collect();
    Ok(extract(model, &x, pattern))
}

fn extract(model: &MilpModel, x: &[f64], pattern: &[bool]) -> DispatchSchedule {
    let mut bin = vec![false; model.num_vars()];
    for (&c, &on) in model.binaries.iter().zip(pattern) {
        bin[c] = on;
    }
    // clip solver noise into the column bounds
    let val = |c: usize| x[c].clamp(model.lower[c], model.upper[c]);
    let l = &model.layout;
    let n = l.trade.len();
    let generators = (0..model.case.generators.len())
        .map(|g| GeneratorSchedule {
            p: (0..n).map(|t| val(l.gens[t][g].p)).collect(),
            u: (0..n).map(|t| bin[l.gens[t][g].u]).collect(),
            v: (0..n).map(|t| bin[l.gens[t][g].v]).collect(),
        })
        .collect();
    let bess = (0..model.case.bess.len())
        .map(|s| BessSchedule {
            p_char: (0..n).map(|t| val(l.bess[t][s].p_char)).collect(),
            p_disc: (0..n).map(|t| val(l.bess[t][s].p_disc)).collect(),
            u_char: (0..n).map(|t| bin[l.bess[t][s].u_char]).collect(),
            u_disc: (0..n).map(|t| bin[l.bess[t][s].u_disc]).collect(),
            energy: (0..n).map(|t| val(l.bess[t][s].energy)).collect(),
        })
        .collect();
    let objective = model
        .objective
        .iter()
        .enumerate()
        .map(|(c, k)| k * if model.is_binary(c) { if bin[c] { 1.0 } else { 0.0 } } else { val(c) })
        .sum();
    DispatchSchedule {
        generators,
        p_buy: l.trade.iter().map(|v| val(v.p_buy)).collect(),
        p_sell: l.trade.iter().map(|v| val(v.p_sell)).collect(),
        u_buy: l.trade.iter().map(|v| bin[v.u_buy]).collect(),
        u_sell: l.trade.iter().map(|v| bin[v.u_sell]).collect(),
        bess,
        objective,
    }
}

/// Handles for columns `0..n`; the LP engine numbers variables in creation order.
fn columns(n: usize) -> Vec<Variable> {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    (0..n).map(|_| p.add_var(0.0, (0.0, 0.0))).collect()
}

/// Build and solve the LP relaxation; `fixed[c]` pins column `c`, `skip` drops one family.
fn solve_lp(model: &MilpModel, fixed: &[Option<f64>], skip: Option<ConstraintFamily>) -> std::result::Result<Solution, microlp::Error> {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Variable> = (0..model.num_vars())
        .map(|c| {
            let bounds = match fixed[c] {
                Some(v) => (v, v),
                None => (model.lower[c], model.upper[c]),
            };
            p.add_var(model.objective[c], bounds)
        })
        .collect();
    for r in &model.rows {
        if Some(r.family) == skip {
            continue;
        }
        let op = match r.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Ge => ComparisonOp::Ge,
            Sense::Eq => ComparisonOp::Eq,
        };
        p.add_constraint(r.terms.iter().map(|&(c, k)| (vars[c], k)).collect::<Vec<_>>(), op, r.rhs);
    }
    match p.solve()?.into_solution() {
        Ok(s) => Ok(s),
        Err(_) => Err(microlp::Error::InternalError("LP solve interrupted".into())),
    }
}

/// Round a relaxation to a commitment pattern and re-solve the continuous part.
fn rounding_heuristic(model: &MilpModel, sol: &Solution, vars: &[Variable]) -> Option<(f64, Vec<bool>)> {
    let x = |c: usize| sol.var_value_raw(vars[c]);
    let l = &model.layout;
    let mut on = vec![false; model.num_vars()];
    let eps = 1e-9;
    for t in 0..l.trade.len() {
        for (g, gv) in l.gens[t].iter().enumerate() {
            on[gv.u] = x(gv.u) > eps || x(gv.p) > eps;
            let prev = if t > 0 { on[l.gens[t - 1][g].u] } else { model.case.generators[g].initial_on };
            on[gv.v] = on[gv.u] && !prev;
        }
        let tr = l.trade[t];
        let (b, s) = (x(tr.u_buy).max(x(tr.p_buy)), x(tr.u_sell).max(x(tr.p_sell)));
        on[tr.u_buy] = b >= s;
        on[tr.u_sell] = s > b;
        for bv in &l.bess[t] {
            let (c, d) = (x(bv.u_char), x(bv.u_disc));
            if c.max(d) > eps {
                on[bv.u_char] = c >= d;
                on[bv.u_disc] = d > c;
            }
        }
    }
    let pattern: Vec<bool> = model.binaries.iter().map(|&c| on[c]).collect();
    let s = polish(model, &pattern).ok()?;
    Some((s.objective, pattern))
}

/// Find a constraint family whose removal makes the relaxation feasible.
fn diagnose(model: &MilpModel) -> Error {
    use ConstraintFamily as F;
    let fixed = vec![None; model.num_vars()];
    for fam in [
        F::UsageCap,
        F::TerminalEnergy,
        F::Reserve,
        F::RampUp,
        F::RampDown,
        F::GeneratorLimits,
        F::ChargeLimit,
        F::DischargeLimit,
        F::EnergyBalance,
        F::PowerBalance,
    ] {
        if model.rows.iter().any(|r| r.family == fam) && solve_lp(model, &fixed, Some(fam)).is_ok() {
            return Error::Infeasible {
                family: fam.to_string(),
                detail: "the problem becomes feasible when this constraint family is dropped".into(),
            };
        }
    }
    Error::Infeasible {
        family: "multiple".into(),
        detail: "no single constraint family explains the infeasibility".into(),
    }
}

fn lp_error(e: microlp::Error) -> Error {
    match e {
        microlp::Error::Unbounded => Error::Solver("relaxation is unbounded".into()),
        other => Error::Solver(other.to_string()),
    }
}
