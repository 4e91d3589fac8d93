// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: scenario runs, verification suites and tables.
//!
//! Exit codes: 0 success, 1 other errors or failed checks, 2 schema
//! violations, 3 estimation failure, 4 capacity errors.

pub mod report;
pub mod scenario;
pub mod table;
pub mod verify;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::bounds::{self, BoundReport};
use crate::error::{Error, Result};
use crate::fisher::{self, Qfim};
use crate::netspace::{resource_expectation, GeneratorSpec, NetworkState};
use crate::probes::ProbeFamily;
use report::{Cell, Table};
use scenario::{Scenario, Task};

#[derive(Debug, Parser)]
#[command(name = "qsn", version, about = "Fisher information and Cramér–Rao bounds for quantum sensor networks")]
pub struct Cli {
    /// Directory for report files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a scenario file and write a JSON report and a CSV table.
    Run { scenario: PathBuf },
    /// Run a property suite.
    Verify {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(verify::Suite::ALL.map(verify::Suite::name)))]
        suite: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Sweep a closed-form family and emit CSV.
    Table {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(table::Family::ALL.map(table::Family::name)))]
        family: String,
        /// `key=lo:hi:step`
        #[arg(long)]
        sweep: Option<String>,
        /// Fixed parameter `key=value`; repeatable.
        #[arg(long = "set")]
        set: Vec<String>,
    },
}

/// Everything computed for one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub name: String,
    pub json: Value,
    pub table: Table,
    /// Reduced-QFIM diagnosis when estimation fails.
    pub failure: Option<String>,
    pub crb: Option<f64>,
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array(m.row_iter().map(|r| json!(r.iter().copied().collect::<Vec<f64>>())).collect())
}

/// Largest total particle number in the support of `state`.
fn support_particles(state: &NetworkState) -> usize {
    state.support(1e-12).into_iter().map(|i| state.layout().total_particles(i)).max().unwrap_or(0)
}

fn is_symmetric_pattern(f: &DMatrix<f64>) -> bool {
    let d = f.nrows();
    let tol = 1e-9 * f.amax().max(1.0);
    (0..d).all(|i| (f[(i, i)] - f[(0, 0)]).abs() <= tol)
        && (0..d).all(|i| (0..d).all(|j| i == j || d < 2 || (f[(i, j)] - f[(0, 1)]).abs() <= tol))
}

/// Closed forms whose premises hold for this scenario.
fn applicable_bounds(s: &Scenario, spec: &GeneratorSpec, state: &NetworkState, qfim: &Qfim) -> Vec<BoundReport> {
    let mut out = Vec::new();
    let (Some(hi), Some(lo)) = (spec.lambda_max(), spec.lambda_min()) else {
        return out;
    };
    let d = s.network.count;
    let mu = s.mu;
    let n_max = support_particles(state);
    match &s.task {
        Task::SingleFunction { v } => {
            let equal = v.iter().all(|x| (x.abs() - v[0].abs()).abs() < 1e-12);
            if let (true, ProbeFamily::Ghz { n }) = (equal, &s.probe) {
                out.extend(bounds::ghz_sum(d, *n, hi, lo, mu).ok());
            }
            if equal && n_max > 0 {
                out.extend(bounds::local_sum(d, n_max, hi, lo, mu).ok());
            }
            out.extend(bounds::weighted_ghz_bound(v, n_max, hi, lo, mu).ok());
            if n_max > 0 {
                out.extend(bounds::local_optimal(v, n_max, hi, lo, mu).ok());
                // the GNS needs a vacuum in every sensor
                if state.layout().sensors().iter().all(|sp| sp.vacuum_index().is_some()) {
                    out.extend(bounds::gns_bound(d, n_max, hi, lo, mu).ok());
                }
            }
        }
        Task::EstimatePhi { weights } => {
            let f = qfim.matrix();
            let uniform = weights.iter().all(|w| (w - 1.0 / d as f64).abs() < 1e-12);
            if uniform && is_symmetric_pattern(f) && f[(0, 0)] > 0.0 {
                let v = f[(0, 0)] / 4.0;
                let j = if d > 1 { f[(0, 1)] / f[(0, 0)] } else { 0.0 };
                out.extend(bounds::imaging_symmetric(v, j, d, mu).ok());
            }
        }
        Task::LinearFunctions { m, weights } => {
            let f = qfim.matrix();
            let half = weights.iter().all(|w| (w - 0.5).abs() < 1e-12);
            if d == 2 && half && (f[(0, 0)] - 1.0).abs() < 1e-9 && (f[(1, 1)] - 1.0).abs() < 1e-9 {
                let alpha = m[0][1].atan2(m[0][0]);
                let beta = m[1][0].atan2(m[1][1]);
                let matches = (alpha.cos() - m[0][0]).abs() < 1e-12 && (beta.cos() - m[1][1]).abs() < 1e-12;
                if let (true, Ok(mut r)) = (matches, bounds::two_qubit_nonorthogonal(alpha, beta, f[(0, 1)], mu)) {
                    // the closed form is the unweighted trace; scale to W = ½·1
                    r.value *= 0.5;
                    r.inputs.insert("weight".into(), json!(0.5));
                    out.push(r);
                }
            }
        }
    }
    out
}

/// Builds state, QFIM, reduction, weighted bound and closed forms.
pub fn evaluate_scenario(s: &Scenario, name: &str) -> Result<ScenarioReport> {
    let layout = s.layout()?;
    let state = s.probe.build(&layout).map_err(|e| match e {
        Error::DimensionMismatch(m) | Error::InvalidArgument(m) => Error::Schema(m),
        other => other,
    })?;
    let qfim = fisher::qfim_pure_commuting(&state)?;
    let (reparam, weighting) = s.task_matrices()?;
    let task_qfim = match &reparam {
        Some(m) => fisher::reparam(&qfim, m)?,
        None => qfim.clone(),
    };
    let reduced = fisher::reduce(&task_qfim, &weighting)?;
    let (crb, failure) = match fisher::weighted_crb(&reduced, s.mu) {
        Ok(x) => (Some(x), None),
        Err(Error::EstimationFailure(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    let spec = layout.generators()[0].spec.clone();
    let closed = applicable_bounds(s, &spec, &state, &qfim);

    let mut table = Table::new(&["quantity", "formula", "value"]);
    table.push(vec![Cell::from("weighted QCRB"), Cell::from("qfim-pipeline"), Cell::from(crb.unwrap_or(f64::NAN))]);
    for b in &closed {
        table.push(vec![Cell::from(b.name.clone()), Cell::from(b.formula.clone()), Cell::from(b.value)]);
    }
    let json = json!({
        "scenario": name,
        "mu": s.mu,
        "parameters": layout.num_params(),
        "dimension": layout.total_dim(),
        "resource": resource_expectation(&state),
        "support_particles": support_particles(&state),
        "qfim": matrix_json(qfim.matrix()),
        "task_qfim": matrix_json(task_qfim.matrix()),
        "kept": reduced.kept,
        "discarded": reduced.discarded,
        "reduced_qfim": matrix_json(reduced.reduced_qfim.matrix()),
        "reduced_weighting": reduced.reduced_weighting,
        "estimation_failure": failure.is_some(),
        "diagnosis": failure,
        "weighted_crb": crb,
        "bounds": closed,
    });
    Ok(ScenarioReport { name: name.to_string(), json, table, failure, crb })
}

/// Paths written by [`run_scenario`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ScenarioReport,
    pub json_path: PathBuf,
    pub csv_path: PathBuf,
}

/// Reads a scenario, writes `<name>.json` and `<name>.csv`. An estimation
/// failure still writes both files before returning the error.
pub fn run_scenario(path: &Path, out: Option<&Path>) -> Result<RunOutput> {
    let s = Scenario::load(path)?;
    let name = s
        .output
        .name
        .clone()
        .or_else(|| path.file_stem().map(|x| x.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "scenario".into());
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| s.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let report = evaluate_scenario(&s, &name)?;
    std::fs::create_dir_all(&dir)?;
    let json_path = dir.join(format!("{name}.json"));
    let csv_path = dir.join(format!("{name}.csv"));
    let mut text = serde_json::to_string_pretty(&report.json).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(&json_path, text)?;
    std::fs::write(&csv_path, report.table.to_csv())?;
    if let Some(diag) = &report.failure {
        return Err(Error::EstimationFailure(diag.clone()));
    }
    Ok(RunOutput { report, json_path, csv_path })
}

fn parse_params(set: &[String]) -> Result<BTreeMap<String, f64>> {
    set.iter()
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("--set {kv:?} is not key=value")))?;
            let x = v
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("--set {kv:?}: value is not a number")))?;
            Ok((k.trim().to_string(), x))
        })
        .collect()
}

fn execute(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Run { scenario } => {
            let out = run_scenario(scenario, cli.out.as_deref())?;
            print!("{}", out.report.table.to_csv());
            eprintln!("wrote {} and {}", out.json_path.display(), out.csv_path.display());
            Ok(true)
        }
        Command::Verify { suite, trials, seed, step } => {
            let suite = verify::Suite::parse(suite)?;
            let summary = verify::run(suite, &verify::VerifyOptions { trials: *trials, seed: *seed, step: *step })?;
            println!("{}", summary.line());
            for note in &summary.notes {
                println!("  {note}");
            }
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir)?;
                let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
                std::fs::write(dir.join(format!("verify-{}.json", summary.suite)), text + "\n")?;
            }
            Ok(summary.passed())
        }
        Command::Table { family, sweep, set } => {
            let family = table::Family::parse(family)?;
            let sweep = sweep.as_deref().map(table::Sweep::parse).transpose()?;
            let t = table::table(family, sweep, &parse_params(set)?)?;
            match &cli.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    let path = dir.join(format!("{}.csv", family.name()));
                    std::fs::write(&path, t.to_csv())?;
                    eprintln!("wrote {}", path.display());
                }
                None => print!("{}", t.to_csv()),
            }
            Ok(true)
        }
    }
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
