use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::calibrate::{c_from_reference, calibrate_lambda_with, nlms_reference, CCalibration, LambdaCalibration};
use super::run::{run_with_plant, to_db, MetricsTrace};
use super::scenario::{AmplitudeSwitch, Plant, Scenario};
use crate::algorithms::Algorithm;
use crate::error::{Error, Result};
use crate::exec::{cell_seed, map_cells, Execution};

/// Which calibrations [`run_all`] performs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPlan {
    pub target_ratio: f64,
    /// Fixed `C`; calibrated when `None`.
    pub c_target: Option<f64>,
    /// Fixed `lambda`; calibrated when `None`.
    pub lambda: Option<f64>,
}

impl Default for CalibrationPlan {
    fn default() -> Self {
        Self { target_ratio: super::calibrate::DEFAULT_TARGET_RATIO, c_target: None, lambda: None }
    }
}

/// All three algorithms on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub scenario: Scenario,
    pub c_calibration: Option<CCalibration>,
    pub lambda_calibration: Option<LambdaCalibration>,
    pub c_target: f64,
    pub lambda: f64,
    /// In the order nlms, penalty, riemannian.
    pub traces: Vec<MetricsTrace>,
}

impl Experiment {
    pub fn trace(&self, algorithm: Algorithm) -> &MetricsTrace {
        self.traces.iter().find(|t| t.meta.algorithm == algorithm).expect("experiment holds every algorithm")
    }
}

/// Calibrates on the scenario without its amplitude switch, then runs
/// NLMS, penalty NLMS and Riemannian NLMS on the scenario as given.
pub fn run_all(scenario: &Scenario, plan: CalibrationPlan, exec: Execution) -> Result<Experiment> {
    let plant = Plant::build(scenario)?;
    let reference = nlms_reference(scenario, &plant)?;
    let c_calibration = match plan.c_target {
        Some(_) => None,
        None => Some(c_from_reference(&reference, plan.target_ratio)?),
    };
    let c_target = plan.c_target.unwrap_or_else(|| c_calibration.as_ref().map_or(f64::NAN, |c| c.c));
    let (lambda_calibration, calibration_trace) = match plan.lambda {
        Some(_) => (None, None),
        None => {
            let (cal, trace) = calibrate_lambda_with(scenario, &plant, &reference, plan.target_ratio)?;
            (Some(cal), Some(trace))
        }
    };
    let lambda = plan.lambda.unwrap_or_else(|| lambda_calibration.as_ref().map_or(f64::NAN, |l| l.lambda));

    let configured = Scenario { lambda, c_target: Some(c_target), ..scenario.clone() };
    let switched = scenario.switch.is_some();
    let traces = map_cells(exec, &Algorithm::ALL, |_, &alg| -> Result<MetricsTrace> {
        // Without a switch the calibration runs are exactly the runs we need.
        match alg {
            Algorithm::Nlms if !switched => return Ok(reference.clone()),
            Algorithm::Penalty if !switched => {
                if let Some(t) = &calibration_trace {
                    return Ok(t.clone());
                }
            }
            _ => {}
        }
        run_with_plant(&Scenario { algorithm: alg, ..configured.clone() }, &plant)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Experiment { scenario: configured, c_calibration, lambda_calibration, c_target, lambda, traces })
}

/// Runs all three algorithms with the primary amplitudes replaced by
/// `new_amplitudes` at `switch_iteration`. Calibration uses the unswitched
/// scenario.
pub fn amplitude_switch_experiment(
    base: &Scenario,
    switch_iteration: usize,
    new_amplitudes: Vec<Complex64>,
    plan: CalibrationPlan,
    exec: Execution,
) -> Result<Experiment> {
    let scenario = Scenario {
        switch: Some(AmplitudeSwitch { iteration: switch_iteration, amplitudes: new_amplitudes }),
        ..base.clone()
    };
    scenario.validate()?;
    run_all(&scenario, plan, exec)
}

/// One summary line per (frequency, algorithm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub frequency_hz: f64,
    pub algorithm: Algorithm,
    pub p_red_db_mean100: Option<f64>,
    pub epsilon_mean100: Option<f64>,
    pub lambda: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub delta_reg: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub frequency_hz: f64,
    pub seed: u64,
    pub c_calibration: Option<CCalibration>,
    pub lambda_calibration: Option<LambdaCalibration>,
    pub traces: Vec<MetricsTrace>,
    /// Failures of this cell, by stage.
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    /// Rows ordered by (frequency, algorithm); failed runs have empty metrics.
    pub fn rows(&self) -> Vec<SweepRow> {
        let mut rows = Vec::new();
        for cell in &self.cells {
            for alg in Algorithm::ALL {
                let trace = cell.traces.iter().find(|t| t.meta.algorithm == alg);
                rows.push(SweepRow {
                    frequency_hz: cell.frequency_hz,
                    algorithm: alg,
                    p_red_db_mean100: trace.map(|t| to_db(t.meta.converged_p_red)),
                    epsilon_mean100: trace.map(|t| t.meta.converged_epsilon),
                    lambda: trace.and_then(|t| t.meta.lambda),
                    c: trace.and_then(|t| t.meta.c_target),
                    delta_reg: trace.map(|t| t.meta.delta_reg),
                    seed: cell.seed,
                });
            }
        }
        rows.sort_by(|a, b| a.frequency_hz.total_cmp(&b.frequency_hz).then(a.algorithm.cmp(&b.algorithm)));
        rows
    }

    pub fn succeeded(&self) -> usize {
        self.cells.iter().map(|c| c.traces.len()).sum()
    }
}

/// Seed of sweep cell `index`.
pub fn sweep_seed(base_seed: u64, index: usize) -> u64 {
    cell_seed(base_seed, index as u64)
}

/// Calibrates and runs all three algorithms at every frequency. Frequencies
/// are independent cells and run in parallel under [`Execution::Parallel`];
/// failures are recorded per cell and do not stop the sweep. Any amplitude
/// switch in `base` is ignored.
pub fn frequency_sweep(
    frequencies: &[f64],
    base: &Scenario,
    target_ratio: f64,
    exec: Execution,
) -> Result<SweepResult> {
    if frequencies.is_empty() {
        return Err(Error::InvalidScenario("empty frequency list".into()));
    }
    if let Some(f) = frequencies.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
        return Err(Error::InvalidScenario(format!("frequencies must be > 0, got {f}")));
    }
    let cells = map_cells(exec, frequencies, |i, &f| {
        let seed = sweep_seed(base.seed, i);
        let scenario = Scenario { switch: None, ..base.at_frequency(f, seed) };
        sweep_cell(&scenario, target_ratio)
    });
    Ok(SweepResult { cells })
}

fn sweep_cell(scenario: &Scenario, target_ratio: f64) -> SweepCell {
    let mut cell = SweepCell {
        frequency_hz: scenario.frequency,
        seed: scenario.seed,
        c_calibration: None,
        lambda_calibration: None,
        traces: Vec::new(),
        errors: Vec::new(),
    };
    let fail = |cell: &mut SweepCell, stage: &str, e: Error| {
        warn!("{} Hz {stage}: {e}", scenario.frequency);
        cell.errors.push(format!("{stage}: {e}"));
    };
    let plant = match Plant::build(scenario) {
        Ok(p) => p,
        Err(e) => {
            fail(&mut cell, "plant", e);
            return cell;
        }
    };
    let reference = match nlms_reference(scenario, &plant) {
        Ok(t) => t,
        Err(e) => {
            fail(&mut cell, "nlms", e);
            return cell;
        }
    };
    match calibrate_lambda_with(scenario, &plant, &reference, target_ratio) {
        Ok((cal, trace)) => {
            cell.lambda_calibration = Some(cal);
            cell.traces.push(trace);
        }
        Err(e) => fail(&mut cell, "penalty", e),
    }
    let riemannian = c_from_reference(&reference, target_ratio).and_then(|cal| {
        let c = cal.c;
        cell.c_calibration = Some(cal);
        run_with_plant(&Scenario { algorithm: Algorithm::Riemannian, c_target: Some(c), ..scenario.clone() }, &plant)
    });
    match riemannian {
        Ok(t) => cell.traces.push(t),
        Err(e) => fail(&mut cell, "riemannian", e),
    }
    cell.traces.insert(0, reference);
    cell.traces.sort_by_key(|t| t.meta.algorithm);
    cell
}
