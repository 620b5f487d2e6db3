//! On-disk formats: aging dataset, case file, schedules, LOD traces, reports.
//!
//! Readers reject rather than coerce: headers must match exactly, every row
//! has the same width, numbers must be finite and horizons are 24 intervals.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use degradesched_core::aging::{AgingDataset, AgingSample, CycleConditions, CycleOutcome, DatasetMeta};
use degradesched_core::hdl::AccuracyRow;
use degradesched_core::lod::{LodIteration, LodTrace};
use degradesched_core::milp::{Bess, DispatchSchedule, Generator, MicrogridCase, Series};

use crate::error::{CliError, Result};

pub const HORIZON: usize = 24;

pub const DATASET_HEADER: [&str; 9] = ["soc", "dod", "temp", "c_rate", "soh", "it", "ir", "elcn", "degradation"];
pub const SERIES_HEADER: [&str; 7] = ["hour", "load_kw", "wind_kw", "solar_kw", "buy_price", "sell_price", "temp_c"];
pub const SCHEDULE_HEADER: [&str; 10] = [
    "hour", "gen_kw", "u_gen", "v_gen", "p_buy", "p_sell", "p_char", "p_disc", "soc", "energy_kwh",
];
pub const TRACE_HEADER: [&str; 6] = [
    "iteration",
    "usage_cap_kwh",
    "throughput_kwh",
    "operation_cost",
    "degradation_cost",
    "total_cost",
];
pub const REPORT_HEADER: [&str; 5] = ["model_id", "tol05", "tol10", "tol15", "tol20"];

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::format(path, e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::format(path, e.to_string()))?;
    text.push('\n');
    write_file(path, text)
}

/// Raw cells of a CSV whose header must equal `header`.
fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let got = rdr.headers().map_err(|e| CliError::format(path, e.to_string()))?;
    if got.iter().ne(header.iter().copied()) {
        return Err(CliError::format(
            path,
            format!("header must be `{}`, got `{}`", header.join(","), got.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::format(path, e.to_string()))?;
        rows.push(rec.iter().map(str::to_owned).collect());
    }
    Ok(rows)
}

fn number(path: &Path, row: usize, column: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| CliError::format(path, format!("row {}, column {column}: `{cell}` is not a number", row + 1)))?;
    if !v.is_finite() {
        return Err(CliError::format(path, format!("row {}, column {column}: non-finite value", row + 1)));
    }
    Ok(v)
}

fn numeric_rows(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    read_table(path, header)?
        .iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .zip(header)
                .map(|(cell, col)| number(path, r, col, cell))
                .collect()
        })
        .collect()
}

fn check_hours(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    if rows.len() != HORIZON {
        return Err(CliError::format(path, format!("expected {HORIZON} hourly rows, got {}", rows.len())));
    }
    for (t, row) in rows.iter().enumerate() {
        if row[0] != t as f64 {
            return Err(CliError::format(path, format!("row {} has hour {}, expected {t}", t + 1, row[0])));
        }
    }
    Ok(())
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = w.into_inner().map_err(|e| CliError::format(path, e.to_string()))?;
    write_file(path, bytes)
}

fn put<I, S>(path: &Path, w: &mut csv::Writer<Vec<u8>>, record: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(record).map_err(|e| CliError::format(path, e.to_string()))
}

// ---- aging dataset ----

/// `dataset.csv` -> `dataset.meta.json`
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn write_dataset(path: &Path, ds: &AgingDataset) -> Result<()> {
    let mut w = csv_writer();
    put(path, &mut w, DATASET_HEADER)?;
    for s in &ds.samples {
        let (c, o) = (&s.conditions, &s.outcome);
        let row = [c.soc_high, c.dod, c.temp_amb, c.c_rate, c.soh, o.internal_temp, o.internal_resistance, o.elcn, o.degradation];
        put(path, &mut w, row.map(|v| v.to_string()))?;
    }
    finish(path, w)?;
    write_json(&meta_path(path), &ds.meta)
}

/// Reads the CSV and its metadata sidecar; the sidecar row count must match.
pub fn read_dataset(path: &Path) -> Result<AgingDataset> {
    let rows = numeric_rows(path, &DATASET_HEADER)?;
    if rows.is_empty() {
        return Err(CliError::format(path, "dataset has no rows"));
    }
    let mut samples = Vec::with_capacity(rows.len());
    for (r, v) in rows.iter().enumerate() {
        let conditions = CycleConditions::new(v[0], v[1], v[2], v[3], v[4])
            .map_err(|e| CliError::format(path, format!("row {}: {e}", r + 1)))?;
        if v[5..].iter().any(|&x| x < 0.0) {
            return Err(CliError::format(path, format!("row {}: negative state or label", r + 1)));
        }
        samples.push(AgingSample {
            conditions,
            outcome: CycleOutcome {
                internal_temp: v[5],
                internal_resistance: v[6],
                elcn: v[7],
                degradation: v[8],
            },
        });
    }
    let mpath = meta_path(path);
    let meta: DatasetMeta = read_json(&mpath)?;
    if meta.row_count != samples.len() {
        return Err(CliError::format(
            &mpath,
            format!("row_count {} but the dataset has {} rows", meta.row_count, samples.len()),
        ));
    }
    Ok(AgingDataset { samples, meta })
}

// ---- case file ----

#[derive(Deserialize)]
#[serde(untagged)]
enum SeriesSource {
    Inline(Series),
    File(PathBuf),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    generators: Vec<Generator>,
    bess: Vec<Bess>,
    tie_line: f64,
    reserve_fraction: f64,
    dt_hours: f64,
    series: SeriesSource,
}

/// Case JSON with the series inline or as a CSV path relative to the case file.
pub fn read_case(path: &Path) -> Result<MicrogridCase> {
    let raw: CaseFile = read_json(path)?;
    let series = match raw.series {
        SeriesSource::Inline(s) => s,
        SeriesSource::File(p) => {
            let p = if p.is_relative() { path.parent().unwrap_or(Path::new(".")).join(p) } else { p };
            read_series(&p)?
        }
    };
    let case = MicrogridCase {
        generators: raw.generators,
        bess: raw.bess,
        tie_line: raw.tie_line,
        reserve_fraction: raw.reserve_fraction,
        dt_hours: raw.dt_hours,
        series,
    };
    check_case(path, case)
}

pub fn parse_case(path: &Path, text: &str) -> Result<MicrogridCase> {
    let case: MicrogridCase = serde_json::from_str(text).map_err(|e| CliError::format(path, e.to_string()))?;
    check_case(path, case)
}

fn check_case(path: &Path, case: MicrogridCase) -> Result<MicrogridCase> {
    if case.horizon() != HORIZON {
        return Err(CliError::format(path, format!("series must cover {HORIZON} hours, got {}", case.horizon())));
    }
    case.validate().map_err(|e| CliError::format(path, e.to_string()))?;
    Ok(case)
}

pub fn read_series(path: &Path) -> Result<Series> {
    let rows = numeric_rows(path, &SERIES_HEADER)?;
    check_hours(path, &rows)?;
    let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
    Ok(Series {
        load_kw: col(1),
        wind_kw: col(2),
        solar_kw: col(3),
        buy_price: col(4),
        sell_price: col(5),
        temp_c: col(6),
    })
}

// ---- schedules ----

/// One row per hour; generator and storage columns are fleet totals.
pub fn write_schedule(path: &Path, case: &MicrogridCase, s: &DispatchSchedule) -> Result<()> {
    let e_max: f64 = case.bess.iter().map(|b| b.e_max).sum();
    let mut w = csv_writer();
    put(path, &mut w, SCHEDULE_HEADER)?;
    for t in 0..s.horizon() {
        let gen_kw: f64 = s.generators.iter().map(|g| g.p[t]).sum();
        let u_gen = s.generators.iter().filter(|g| g.u[t]).count();
        let v_gen = s.generators.iter().filter(|g| g.v[t]).count();
        let p_char: f64 = s.bess.iter().map(|b| b.p_char[t]).sum();
        let p_disc: f64 = s.bess.iter().map(|b| b.p_disc[t]).sum();
        let energy: f64 = s.bess.iter().map(|b| b.energy[t]).sum();
        let soc = if e_max > 0.0 { energy / e_max } else { 0.0 };
        put(
            path,
            &mut w,
            [
                t.to_string(),
                gen_kw.to_string(),
                u_gen.to_string(),
                v_gen.to_string(),
                s.p_buy[t].to_string(),
                s.p_sell[t].to_string(),
                p_char.to_string(),
                p_disc.to_string(),
                soc.to_string(),
                energy.to_string(),
            ],
        )?;
    }
    finish(path, w)
}

/// Net storage power per hour from a schedule CSV, discharge positive.
pub fn read_bess_power(path: &Path) -> Result<Vec<f64>> {
    let rows = numeric_rows(path, &SCHEDULE_HEADER)?;
    check_hours(path, &rows)?;
    Ok(rows.iter().map(|r| r[7] - r[6]).collect())
}

// ---- LOD trace ----

pub fn write_trace(path: &Path, trace: &LodTrace) -> Result<()> {
    write_trace_rows(path, &trace.iterations.iter().map(TraceRow::from).collect::<Vec<_>>())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub usage_cap_kwh: Option<f64>,
    pub throughput_kwh: f64,
    pub operation_cost: f64,
    pub degradation_cost: f64,
    pub total_cost: f64,
}

impl From<&LodIteration> for TraceRow {
    fn from(it: &LodIteration) -> Self {
        TraceRow {
            iteration: it.index,
            usage_cap_kwh: it.usage_cap_kwh,
            throughput_kwh: it.bess_throughput,
            operation_cost: it.operation_cost,
            degradation_cost: it.degradation_cost,
            total_cost: it.total_cost,
        }
    }
}

pub fn write_trace_rows(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv_writer();
    put(path, &mut w, TRACE_HEADER)?;
    for r in rows {
        put(
            path,
            &mut w,
            [
                r.iteration.to_string(),
                r.usage_cap_kwh.map_or(String::new(), |c| c.to_string()),
                r.throughput_kwh.to_string(),
                r.operation_cost.to_string(),
                r.degradation_cost.to_string(),
                r.total_cost.to_string(),
            ],
        )?;
    }
    finish(path, w)
}

/// The cap column is empty for the uncapped first iteration.
pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let rows = read_table(path, &TRACE_HEADER)?;
    if rows.is_empty() {
        return Err(CliError::format(path, "trace has no rows"));
    }
    let mut out = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let num = |k: usize| number(path, r, TRACE_HEADER[k], &row[k]);
        let iteration = num(0)?;
        if iteration != r as f64 {
            return Err(CliError::format(path, format!("row {} has iteration {iteration}, expected {r}", r + 1)));
        }
        out.push(TraceRow {
            iteration: r,
            usage_cap_kwh: if row[1].trim().is_empty() { None } else { Some(num(1)?) },
            throughput_kwh: num(2)?,
            operation_cost: num(3)?,
            degradation_cost: num(4)?,
            total_cost: num(5)?,
        });
    }
    Ok(out)
}

// ---- accuracy reports ----

pub fn write_accuracy(path: &Path, rows: &[AccuracyRow]) -> Result<()> {
    let mut w = csv_writer();
    put(path, &mut w, REPORT_HEADER)?;
    for r in rows {
        let mut rec = vec![r.model_id.clone()];
        rec.extend(r.accuracy.iter().map(|a| a.to_string()));
        put(path, &mut w, rec)?;
    }
    finish(path, w)
}

pub fn read_accuracy(path: &Path) -> Result<Vec<AccuracyRow>> {
    let rows = read_table(path, &REPORT_HEADER)?;
    rows.iter()
        .enumerate()
        .map(|(r, row)| {
            let mut accuracy = [0.0; 4];
            for k in 0..4 {
                accuracy[k] = number(path, r, REPORT_HEADER[k + 1], &row[k + 1])?;
            }
            Ok(AccuracyRow {
                model_id: row[0].clone(),
                accuracy,
            })
        })
        .collect()
}

/// Hourly net storage power of the three scheduling modes side by side.
pub fn write_bess_comparison(path: &Path, traditional: &[f64], linear: &[f64], lod: &[f64]) -> Result<()> {
    let mut w = csv_writer();
    put(path, &mut w, ["hour", "p_bess_traditional", "p_bess_linear", "p_bess_lod"])?;
    for t in 0..traditional.len() {
        put(
            path,
            &mut w,
            [t.to_string(), traditional[t].to_string(), linear[t].to_string(), lod[t].to_string()],
        )?;
    }
    finish(path, w)
}
