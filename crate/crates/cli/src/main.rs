//! `anc`: runs, calibrates and sweeps the active noise control simulations
//! described by a JSON config.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anc_core::algorithms::Algorithm;
use anc_core::exec::{configure_threads, Execution};
use anc_core::harness::output::{write_json, write_summary_csv, write_sweep_plot, write_trace_csv, write_trace_plot};
use anc_core::harness::{
    c_from_reference, calibrate_lambda_with, frequency_sweep, nlms_reference, run_all, run_with_plant, CCalibration,
    CalibrationPlan, LambdaCalibration, MetricsTrace, Plant, RunMeta, Scenario,
};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;
use serde_json::Value;

use crate::config::ConfigFile;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<anc_core::Error> for CliError {
    fn from(e: anc_core::Error) -> Self {
        match e.root() {
            anc_core::Error::Io(_) => CliError::Io(e.to_string()),
            anc_core::Error::InvalidScenario(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "anc", version, about = "Multichannel active noise control simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured algorithm(s) at `frequency_hz` and write traces.
    Run(Common),
    /// Calibrate `C` and `lambda` at `frequency_hz` and report both.
    Calibrate(Common),
    /// Calibrate and run all algorithms over `frequencies_hz`.
    Sweep(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set seed=7` or `--set medium.c=340`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write gnuplot data and scripts.
    #[arg(long)]
    plot: bool,
    /// Output directory; overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Radiation ratio to calibrate for; overrides `target_ratio`.
    #[arg(long)]
    target_ratio: Option<f64>,
}

/// Loaded config plus everything derived from the command line.
struct Context {
    cfg: ConfigFile,
    doc: Value,
    out: PathBuf,
    exec: Execution,
    plot: bool,
}

impl Context {
    fn new(common: &Common) -> Result<Self, CliError> {
        let env_seed = std::env::var(config::SEED_ENV).ok();
        let (mut cfg, mut doc) = config::load(&common.config, &common.overrides, env_seed)?;
        if let Some(r) = common.target_ratio {
            cfg.target_ratio = r;
            doc["target_ratio"] = Value::from(r);
        }
        let exec = match common.jobs {
            Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
            Some(1) => Execution::Sequential,
            Some(n) => {
                if !configure_threads(n) {
                    warn!("could not size the worker pool to {n} threads");
                }
                Execution::Parallel
            }
            None => Execution::Parallel,
        };
        let exec = if Execution::parallel_available() { exec } else { Execution::Sequential };
        let out = common.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
        fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
        Ok(Self { cfg, doc, out, exec, plot: common.plot })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_traces(&self, name: &str, traces: &[&MetricsTrace]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| io_error(&path, e))?;
        write_trace_csv(BufWriter::new(file), traces)?;
        Ok(path)
    }
}

#[derive(Serialize)]
struct RunOutput<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a Value,
    scenario: &'a Scenario,
    c_calibration: Option<&'a CCalibration>,
    lambda_calibration: Option<&'a LambdaCalibration>,
    runs: Vec<&'a RunMeta>,
}

fn cmd_run(ctx: &Context) -> Result<(), CliError> {
    let scenario = ctx.cfg.scenario(ctx.cfg.frequency_hz)?;
    let plan =
        CalibrationPlan { target_ratio: ctx.cfg.target_ratio, c_target: ctx.cfg.c_target, lambda: ctx.cfg.lambda };
    let (scenario, c_cal, l_cal, traces) = match ctx.cfg.algorithm.single() {
        None => {
            let exp = run_all(&scenario, plan, ctx.exec)?;
            (exp.scenario, exp.c_calibration, exp.lambda_calibration, exp.traces)
        }
        Some(alg) => run_single(&scenario, alg, plan)?,
    };

    for t in &traces {
        let m = &t.meta;
        println!(
            "{:<10} {:>8.1} Hz  P_red {:>8.2} dB  epsilon {:.4e}{}",
            m.algorithm.as_str(),
            m.frequency_hz,
            m.converged_p_red_db,
            m.converged_epsilon,
            if m.plateau.reached { "" } else { "  (no plateau)" }
        );
    }
    let refs: Vec<&MetricsTrace> = traces.iter().collect();
    let csv = ctx.write_traces("trace.csv", &refs)?;
    let meta = RunOutput {
        version: env!("CARGO_PKG_VERSION"),
        command: "run",
        config: &ctx.doc,
        scenario: &scenario,
        c_calibration: c_cal.as_ref(),
        lambda_calibration: l_cal.as_ref(),
        runs: traces.iter().map(|t| &t.meta).collect(),
    };
    write_json(&ctx.path("meta.json"), &meta)?;
    if ctx.plot {
        write_trace_plot(&ctx.out, "trace", &refs, scenario.moving_average_window)?;
    }
    info!("wrote {}", csv.display());
    Ok(())
}

type SingleRun = (Scenario, Option<CCalibration>, Option<LambdaCalibration>, Vec<MetricsTrace>);

/// One algorithm, calibrating only what it needs.
fn run_single(scenario: &Scenario, alg: Algorithm, plan: CalibrationPlan) -> Result<SingleRun, CliError> {
    let plant = Plant::build(scenario)?;
    let mut s = Scenario { algorithm: alg, ..scenario.clone() };
    let (mut c_cal, mut l_cal) = (None, None);
    match alg {
        Algorithm::Nlms => {}
        Algorithm::Penalty => match plan.lambda {
            Some(l) => s.lambda = l,
            None => {
                let reference = nlms_reference(scenario, &plant)?;
                let (cal, _) = calibrate_lambda_with(scenario, &plant, &reference, plan.target_ratio)?;
                s.lambda = cal.lambda;
                l_cal = Some(cal);
            }
        },
        Algorithm::Riemannian => {
            if s.c_target.is_none() {
                let reference = nlms_reference(scenario, &plant)?;
                let cal = c_from_reference(&reference, plan.target_ratio)?;
                s.c_target = Some(cal.c);
                c_cal = Some(cal);
            }
        }
    }
    let trace = run_with_plant(&s, &plant)?;
    Ok((s, c_cal, l_cal, vec![trace]))
}

#[derive(Serialize)]
struct CalibrationOutput<'a> {
    version: &'static str,
    frequency_hz: f64,
    seed: u64,
    target_ratio: f64,
    #[serde(rename = "C")]
    c: f64,
    lambda: f64,
    /// Converged Riemannian radiation over NLMS radiation at `C`.
    c_ratio: f64,
    /// Converged penalty radiation over NLMS radiation at `lambda`.
    lambda_ratio: f64,
    epsilon_nlms: f64,
    c_calibration: &'a CCalibration,
    lambda_calibration: &'a LambdaCalibration,
}

fn cmd_calibrate(ctx: &Context) -> Result<(), CliError> {
    let scenario = ctx.cfg.scenario(ctx.cfg.frequency_hz)?;
    let ratio = ctx.cfg.target_ratio;
    let plant = Plant::build(&scenario)?;
    let reference = nlms_reference(&scenario, &plant)?;
    let eps_nlms = reference.meta.converged_epsilon;
    let c_cal = c_from_reference(&reference, ratio)?;
    let (l_cal, _) = calibrate_lambda_with(&scenario, &plant, &reference, ratio)?;
    let check = run_with_plant(
        &Scenario { algorithm: Algorithm::Riemannian, switch: None, c_target: Some(c_cal.c), ..scenario.clone() },
        &plant,
    )?;
    let out = CalibrationOutput {
        version: env!("CARGO_PKG_VERSION"),
        frequency_hz: scenario.frequency,
        seed: scenario.seed,
        target_ratio: ratio,
        c: c_cal.c,
        lambda: l_cal.lambda,
        c_ratio: check.meta.converged_epsilon / eps_nlms,
        lambda_ratio: l_cal.ratio,
        epsilon_nlms: eps_nlms,
        c_calibration: &c_cal,
        lambda_calibration: &l_cal,
    };
    println!("frequency {} Hz, seed {}, target ratio {}", out.frequency_hz, out.seed, ratio);
    println!("C      = {:.6e}  (riemannian ratio {:.4})", out.c, out.c_ratio);
    println!(
        "lambda = {:.6e}  (penalty ratio {:.4}, {} steps{})",
        out.lambda,
        out.lambda_ratio,
        l_cal.steps,
        if l_cal.converged { "" } else { ", not converged" }
    );
    if !l_cal.monotone {
        warn!("penalty radiation was not monotone in lambda over the bisection samples");
    }
    write_json(&ctx.path("calibration.json"), &out)?;
    Ok(())
}

#[derive(Serialize)]
struct SweepCellMeta<'a> {
    frequency_hz: f64,
    seed: u64,
    c_calibration: Option<&'a CCalibration>,
    lambda_calibration: Option<&'a LambdaCalibration>,
    runs: Vec<&'a RunMeta>,
    errors: &'a [String],
    trace_file: Option<String>,
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a Value,
    target_ratio: f64,
    cells: Vec<SweepCellMeta<'a>>,
}

fn cmd_sweep(ctx: &Context) -> Result<(), CliError> {
    let freqs = ctx.cfg.sweep_frequencies()?;
    let base = ctx.cfg.scenario(freqs[0])?;
    let result = frequency_sweep(freqs, &base, ctx.cfg.target_ratio, ctx.exec)?;
    let rows = result.rows();

    let summary = ctx.path("summary.csv");
    let file = File::create(&summary).map_err(|e| io_error(&summary, e))?;
    write_summary_csv(BufWriter::new(file), &rows)?;

    let trace_dir = ctx.path("traces");
    fs::create_dir_all(&trace_dir).map_err(|e| io_error(&trace_dir, e))?;
    let mut cells = Vec::with_capacity(result.cells.len());
    for cell in &result.cells {
        let trace_file = if cell.traces.is_empty() {
            None
        } else {
            let name = format!("traces/trace_{}Hz.csv", cell.frequency_hz);
            let refs: Vec<&MetricsTrace> = cell.traces.iter().collect();
            ctx.write_traces(&name, &refs)?;
            Some(name)
        };
        for e in &cell.errors {
            eprintln!("warning: {} Hz: {e}", cell.frequency_hz);
        }
        cells.push(SweepCellMeta {
            frequency_hz: cell.frequency_hz,
            seed: cell.seed,
            c_calibration: cell.c_calibration.as_ref(),
            lambda_calibration: cell.lambda_calibration.as_ref(),
            runs: cell.traces.iter().map(|t| &t.meta).collect(),
            errors: &cell.errors,
            trace_file,
        });
    }
    write_json(
        &ctx.path("meta.json"),
        &SweepOutput {
            version: env!("CARGO_PKG_VERSION"),
            command: "sweep",
            config: &ctx.doc,
            target_ratio: ctx.cfg.target_ratio,
            cells,
        },
    )?;
    if ctx.plot {
        write_sweep_plot(&ctx.out, "sweep", &rows)?;
    }

    println!("{:>10}  {:<10} {:>10}  {:>12}", "freq_hz", "algorithm", "P_red_dB", "epsilon");
    for r in &rows {
        let fmt = |v: Option<f64>, p: usize| v.map_or("failed".to_string(), |v| format!("{v:.p$}"));
        println!(
            "{:>10.1}  {:<10} {:>10}  {:>12}",
            r.frequency_hz,
            r.algorithm.as_str(),
            fmt(r.p_red_db_mean100, 2),
            r.epsilon_mean100.map_or("failed".to_string(), |v| format!("{v:.4e}"))
        );
    }
    if result.succeeded() == 0 {
        return Err(CliError::Numeric("every sweep cell failed".into()));
    }
    Ok(())
}

type Handler = fn(&Context) -> Result<(), CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (common, command): (&Common, Handler) = match &cli.command {
        Command::Run(c) => (c, cmd_run),
        Command::Calibrate(c) => (c, cmd_calibrate),
        Command::Sweep(c) => (c, cmd_sweep),
    };
    match Context::new(common).and_then(|ctx| command(&ctx)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
