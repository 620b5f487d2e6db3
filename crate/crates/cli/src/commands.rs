use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use degradesched_core::aging::{default_grid, generate_dataset, CycleConditions};
use degradesched_core::hdl::{
    comparison_table, select_best_combination, train_benchmarks, train_pair, AccuracyRow, BdpVariant,
    DegradationEstimator, DegradationModel, ModelArtifact, UbdfVariant, ZeroDegradation,
};
use degradesched_core::lod::{run_linear_bdc, run_lod, run_traditional, EconParams, LodConfig, LodIteration, Termination};
use degradesched_core::milp::{CostBreakdown, MicrogridCase};
use degradesched_core::nn::TrainConfig;
use degradesched_core::Error;

use crate::error::{CliError, Result};
use crate::example_day::example_day;
use crate::formats::*;
use crate::manifest::RunManifest;
use crate::{Mode, ReportArgs, ScheduleArgs, SimulateArgs, TrainArgs};

pub const DATASET_FILE: &str = "dataset.csv";
pub const DATASET_META_FILE: &str = "dataset.meta.json";
pub const MODEL_FILE: &str = "model.json";
pub const UBDF_REPORT: &str = "ubdf_accuracy.csv";
pub const BDP_REPORT: &str = "bdp_accuracy.csv";
pub const PAIR_REPORT: &str = "pair_accuracy.csv";
pub const COMPARISON_REPORT: &str = "comparison.csv";
pub const SELECTION_FILE: &str = "selection.json";
pub const SCHEDULE_FILE: &str = "schedule.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const INFEASIBLE_FILE: &str = "infeasibility.json";
pub const BESS_COMPARISON_FILE: &str = "bess_comparison.csv";
pub const COST_SERIES_FILE: &str = "cost_iterations.csv";

pub fn simulate_aging(a: &SimulateArgs) -> Result<()> {
    let mut manifest = RunManifest::new("simulate-aging", Some(a.seed), a);
    let grid: Vec<CycleConditions> = match &a.grid {
        Some(p) => {
            manifest.input(p)?;
            read_json(p)?
        }
        None => default_grid(),
    };
    let t = Instant::now();
    let ds = generate_dataset(&grid, a.noise, a.seed)?;
    manifest.time("simulate", t.elapsed().as_secs_f64());
    create_dir(&a.out)?;
    write_dataset(&a.out.join(DATASET_FILE), &ds)?;
    manifest.write(&a.out, &[DATASET_FILE, DATASET_META_FILE])?;
    println!("{} rows", ds.samples.len());
    Ok(())
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        initial_lr: a.lr.unwrap_or(d.initial_lr),
        lr_decay_factor: a.lr_decay.unwrap_or(d.lr_decay_factor),
        decay_every_epochs: a.decay_every.unwrap_or(d.decay_every_epochs),
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        epochs: a.epochs.unwrap_or(d.epochs),
        train_fraction: a.train_fraction.unwrap_or(d.train_fraction),
        seed: a.seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Serialize, Deserialize)]
struct SelectionSummary {
    ubdf: UbdfVariant,
    bdp: BdpVariant,
    accuracy: [f64; 4],
    failures: Vec<degradesched_core::hdl::VariantFailure>,
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let cfg = train_config(a)?;
    let pair = match (a.ubdf, a.bdp) {
        (Some(u), Some(b)) => {
            let (u, b) = (UbdfVariant::new(u)?, BdpVariant::new(b)?);
            if !b.compatible_with(u) {
                return Err(CliError::Usage(format!(
                    "{b} needs {:?} but {u} only predicts {:?}",
                    b.unobtainable_inputs().map(|f| f.name()).collect::<Vec<_>>(),
                    u.outputs().iter().map(|f| f.name()).collect::<Vec<_>>()
                )));
            }
            Some((u, b))
        }
        _ if a.variant_search => None,
        _ => return Err(CliError::Usage("pass --variant-search or both --ubdf and --bdp".into())),
    };
    let mut manifest = RunManifest::new("train", Some(a.seed), a);
    manifest.input(&a.dataset)?;
    manifest.input(&meta_path(&a.dataset))?;
    let ds = read_dataset(&a.dataset)?;
    create_dir(&a.out)?;
    let mut outputs = vec![MODEL_FILE];

    let t = Instant::now();
    let model = match pair {
        Some((u, b)) => {
            let (model, acc) = train_pair(&ds, u, b, &cfg)?;
            println!("{u} + {b}: accuracy at 5/10/15/20% = {:?}", acc.accuracy);
            model
        }
        None => {
            let sel = select_best_combination(&ds, &cfg)?;
            let r = &sel.report;
            write_accuracy(&a.out.join(UBDF_REPORT), &r.ubdf)?;
            write_accuracy(&a.out.join(BDP_REPORT), &r.bdp)?;
            let pairs: Vec<AccuracyRow> = r
                .pairs
                .iter()
                .map(|p| AccuracyRow {
                    model_id: format!("{}/{}", p.ubdf, p.bdp),
                    accuracy: p.accuracy,
                })
                .collect();
            write_accuracy(&a.out.join(PAIR_REPORT), &pairs)?;
            write_json(
                &a.out.join(SELECTION_FILE),
                &SelectionSummary {
                    ubdf: r.selected.0,
                    bdp: r.selected.1,
                    accuracy: r.selected_accuracy(),
                    failures: r.failures.clone(),
                },
            )?;
            outputs.extend([UBDF_REPORT, BDP_REPORT, PAIR_REPORT, SELECTION_FILE]);
            println!(
                "selected {} + {}: accuracy at 5/10/15/20% = {:?}",
                r.selected.0,
                r.selected.1,
                r.selected_accuracy()
            );
            sel.model
        }
    };
    manifest.time("train", t.elapsed().as_secs_f64());

    if a.with_benchmarks {
        let t = Instant::now();
        let bench = train_benchmarks(&ds, &cfg)?;
        let rows = comparison_table(&ds, &cfg, &model, &bench)?;
        write_accuracy(&a.out.join(COMPARISON_REPORT), &rows)?;
        outputs.push(COMPARISON_REPORT);
        manifest.time("benchmarks", t.elapsed().as_secs_f64());
        for r in &rows {
            println!("{:8} {:?}", r.model_id, r.accuracy);
        }
    }

    let mut artifact = ModelArtifact::from(&model);
    artifact.manifest = Some(crate::manifest::MANIFEST_FILE.to_owned());
    write_json(&a.out.join(MODEL_FILE), &artifact)?;
    manifest.write(&a.out, &outputs)
}

pub fn load_model(path: &Path) -> Result<DegradationModel> {
    let artifact: ModelArtifact = read_json(path)?;
    DegradationModel::try_from(artifact).map_err(|e| CliError::format(path, e.to_string()))
}

/// Table-style result of one scheduling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: String,
    pub total_cost: f64,
    pub operation_cost: f64,
    pub degradation_cost: f64,
    pub degradation: f64,
    pub bess_throughput_kwh: f64,
    /// Optimization-loop wall time; varies between runs.
    pub solve_seconds: f64,
    pub iterations: usize,
    pub best_iteration: usize,
    pub termination: Option<Termination>,
    pub cost_breakdown: CostBreakdown,
    pub degradation_priced: bool,
}

impl Summary {
    fn new(mode: Mode, it: &LodIteration, seconds: f64, iterations: usize, termination: Option<Termination>, priced: bool) -> Self {
        Summary {
            mode: mode.name().to_owned(),
            total_cost: it.total_cost,
            operation_cost: it.operation_cost,
            degradation_cost: it.degradation_cost,
            degradation: it.degradation,
            bess_throughput_kwh: it.bess_throughput,
            solve_seconds: seconds,
            iterations,
            best_iteration: it.index,
            termination,
            cost_breakdown: it.operation,
            degradation_priced: priced,
        }
    }
}

fn econ(a: &ScheduleArgs) -> Result<EconParams> {
    let d = EconParams::default();
    let e = EconParams {
        capital_cost: a.capital_cost.unwrap_or(d.capital_cost),
        salvage_value: a.salvage_value.unwrap_or(d.salvage_value),
        soh_eol: a.soh_eol.unwrap_or(d.soh_eol),
        linear_bdc_rate: a.linear_bdc_rate.unwrap_or(d.linear_bdc_rate),
    };
    e.validate()?;
    Ok(e)
}

fn lod_config(a: &ScheduleArgs) -> Result<LodConfig> {
    let d = LodConfig::default();
    let c = LodConfig {
        alpha: a.alpha.unwrap_or(d.alpha),
        max_iterations: a.max_iterations.unwrap_or(d.max_iterations),
        patience: a.patience.unwrap_or(d.patience),
    };
    c.validate()?;
    Ok(c)
}

#[derive(Serialize)]
struct Infeasibility<'a> {
    family: &'a str,
    detail: &'a str,
}

pub fn schedule(a: &ScheduleArgs) -> Result<()> {
    let econ = econ(a)?;
    let lod_cfg = lod_config(a)?;
    let mut manifest = RunManifest::new("schedule", None, a);
    let case: MicrogridCase = match &a.case {
        Some(p) => {
            manifest.input(p)?;
            read_case(p)?
        }
        None => example_day()?,
    };
    let model = match &a.model {
        Some(p) => {
            manifest.input(p)?;
            Some(load_model(p)?)
        }
        None if a.mode == Mode::Lod => return Err(CliError::Usage("--mode lod requires --model".into())),
        None => {
            log::warn!("no --model given; degradation is not priced");
            None
        }
    };
    let est: &dyn DegradationEstimator = match &model {
        Some(m) => m,
        None => &ZeroDegradation,
    };
    create_dir(&a.out)?;

    let t = Instant::now();
    let result = match a.mode {
        Mode::Traditional => run_traditional(&case, est, &econ).map(|it| (it, None)),
        Mode::LinearBdc => run_linear_bdc(&case, est, &econ).map(|it| (it, None)),
        Mode::Lod => run_lod(&case, est, &econ, &lod_cfg).map(|tr| (tr.best().clone(), Some(tr))),
    };
    let seconds = t.elapsed().as_secs_f64();
    let (best, trace) = match result {
        Ok(r) => r,
        Err(Error::Infeasible { family, detail }) => {
            write_json(
                &a.out.join(INFEASIBLE_FILE),
                &Infeasibility {
                    family: &family,
                    detail: &detail,
                },
            )?;
            manifest.write(&a.out, &[INFEASIBLE_FILE])?;
            return Err(Error::Infeasible { family, detail }.into());
        }
        Err(e) => return Err(e.into()),
    };
    manifest.time("solve", seconds);

    let mut outputs = vec![SCHEDULE_FILE, SUMMARY_FILE];
    write_schedule(&a.out.join(SCHEDULE_FILE), &case, &best.schedule)?;
    let summary = match &trace {
        Some(tr) => {
            write_trace(&a.out.join(TRACE_FILE), tr)?;
            outputs.push(TRACE_FILE);
            Summary::new(a.mode, &best, seconds, tr.iterations.len(), Some(tr.termination.clone()), true)
        }
        None => Summary::new(a.mode, &best, seconds, 1, None, model.is_some()),
    };
    write_json(&a.out.join(SUMMARY_FILE), &summary)?;
    manifest.write(&a.out, &outputs)?;
    println!(
        "{}: total ${:.2} = operation ${:.2} + degradation ${:.2} ({} iteration(s))",
        summary.mode, summary.total_cost, summary.operation_cost, summary.degradation_cost, summary.iterations
    );
    Ok(())
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let mut manifest = RunManifest::new("report", None, a);
    for p in [&a.traditional, &a.linear_bdc, &a.lod] {
        manifest.input(p)?;
    }
    let traditional = read_bess_power(&a.traditional)?;
    let linear = read_bess_power(&a.linear_bdc)?;
    let lod = read_bess_power(&a.lod)?;
    create_dir(&a.out)?;
    write_bess_comparison(&a.out.join(BESS_COMPARISON_FILE), &traditional, &linear, &lod)?;
    let mut outputs = vec![BESS_COMPARISON_FILE];
    if let Some(p) = &a.trace {
        manifest.input(p)?;
        let rows = read_trace(p)?;
        write_trace_rows(&a.out.join(COST_SERIES_FILE), &rows)?;
        outputs.push(COST_SERIES_FILE);
    }
    manifest.write(&a.out, &outputs)
}
