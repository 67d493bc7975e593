use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::run::{run_with_plant, MetricsTrace, Plateau};
use super::scenario::{Plant, Scenario};
use crate::algorithms::Algorithm;
use crate::error::{Error, Result};

/// Default radiation ratio against plain NLMS.
pub const DEFAULT_TARGET_RATIO: f64 = 0.5;
/// Relative tolerance on the achieved ratio.
pub const LAMBDA_TOLERANCE: f64 = 0.02;
pub const MAX_BISECTION_STEPS: usize = 40;
/// Search interval for lambda, relative to `||G^H G||_2 / ||A||_2`.
pub const LAMBDA_SPAN: (f64, f64) = (1e-6, 1e6);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CCalibration {
    #[serde(rename = "C")]
    pub c: f64,
    pub target_ratio: f64,
    /// Converged radiation of the NLMS reference.
    pub epsilon_nlms: f64,
    /// Mean `||x||^2` over the same frames.
    pub x_power: f64,
    pub plateau: Plateau,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSample {
    pub lambda: f64,
    pub epsilon: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaCalibration {
    pub lambda: f64,
    /// Achieved `epsilon(lambda) / epsilon_nlms`.
    pub ratio: f64,
    pub target_ratio: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub steps: usize,
    pub converged: bool,
    /// Whether the ratio was non-increasing in lambda over all samples.
    pub monotone: bool,
    pub samples: Vec<LambdaSample>,
}

/// The scenario used for calibration: plain NLMS, no amplitude switch.
fn reference_scenario(scenario: &Scenario) -> Scenario {
    Scenario { algorithm: Algorithm::Nlms, switch: None, ..scenario.clone() }
}

/// Plain NLMS run that the calibrations are measured against.
pub fn nlms_reference(scenario: &Scenario, plant: &Plant) -> Result<MetricsTrace> {
    run_with_plant(&reference_scenario(scenario), plant)
}

/// `C = ratio * epsilon_nlms / x_power` from a converged NLMS run.
pub fn c_from_reference(reference: &MetricsTrace, target_ratio: f64) -> Result<CCalibration> {
    check_ratio(target_ratio)?;
    let meta = &reference.meta;
    if meta.algorithm != Algorithm::Nlms {
        return Err(Error::Calibration(format!("reference run is {}, not nlms", meta.algorithm)));
    }
    let c = target_ratio * meta.converged_epsilon / meta.converged_x_power;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Calibration(format!(
            "NLMS reference radiates {:e}; cannot derive a positive C",
            meta.converged_epsilon
        )));
    }
    let warning = (!meta.plateau.reached).then(|| {
        format!("NLMS P_red not on a plateau (relative change {:.3} over the last tenth)", meta.plateau.relative_change)
    });
    if let Some(w) = &warning {
        warn!("{} Hz: {w}", meta.frequency_hz);
    }
    Ok(CCalibration {
        c,
        target_ratio,
        epsilon_nlms: meta.converged_epsilon,
        x_power: meta.converged_x_power,
        plateau: meta.plateau,
        warning,
    })
}

pub fn calibrate_c(scenario: &Scenario) -> Result<CCalibration> {
    calibrate_c_with_ratio(scenario, DEFAULT_TARGET_RATIO)
}

pub fn calibrate_c_with_ratio(scenario: &Scenario, target_ratio: f64) -> Result<CCalibration> {
    let plant = Plant::build(scenario)?;
    c_from_reference(&nlms_reference(scenario, &plant)?, target_ratio)
}

pub fn calibrate_lambda(scenario: &Scenario, target_ratio: f64) -> Result<LambdaCalibration> {
    let plant = Plant::build(scenario)?;
    let reference = nlms_reference(scenario, &plant)?;
    Ok(calibrate_lambda_with(scenario, &plant, &reference, target_ratio)?.0)
}

/// Bisection on `log lambda` for the penalty weight whose converged
/// radiation is `target_ratio` times that of `reference`. Also returns the
/// penalty trace at the chosen lambda.
pub fn calibrate_lambda_with(
    scenario: &Scenario,
    plant: &Plant,
    reference: &MetricsTrace,
    target_ratio: f64,
) -> Result<(LambdaCalibration, MetricsTrace)> {
    check_ratio(target_ratio)?;
    let eps_nlms = reference.meta.converged_epsilon;
    if !(eps_nlms > 0.0) {
        return Err(Error::Calibration(format!("NLMS reference radiates {eps_nlms:e}")));
    }
    let scale = plant.ghg_norm / plant.radiation.max_eigenvalue();
    let (lambda_lo, lambda_hi) = (LAMBDA_SPAN.0 * scale, LAMBDA_SPAN.1 * scale);
    let base = Scenario { algorithm: Algorithm::Penalty, ..reference_scenario(scenario) };

    let mut samples = Vec::new();
    let mut evaluate = |lambda: f64| -> Result<(LambdaSample, MetricsTrace)> {
        let trace = run_with_plant(&Scenario { lambda, ..base.clone() }, plant)?;
        let epsilon = trace.meta.converged_epsilon;
        let s = LambdaSample { lambda, epsilon, ratio: epsilon / eps_nlms };
        debug!("lambda {lambda:e}: ratio {:.4}", s.ratio);
        samples.push(s);
        Ok((s, trace))
    };
    let within = |s: &LambdaSample| (s.ratio / target_ratio - 1.0).abs() <= LAMBDA_TOLERANCE;

    let (lo, lo_trace) = evaluate(lambda_lo)?;
    let mut found = within(&lo).then_some((lo, lo_trace));
    let mut steps = 0;
    if found.is_none() {
        let (hi, hi_trace) = evaluate(lambda_hi)?;
        if within(&hi) {
            found = Some((hi, hi_trace));
        } else if !(lo.ratio > target_ratio && hi.ratio < target_ratio) {
            return Err(Error::Calibration(format!(
                "lambda interval [{lambda_lo:e}, {lambda_hi:e}] does not bracket ratio {target_ratio}: \
                 endpoint ratios {:.4} and {:.4}",
                lo.ratio, hi.ratio
            )));
        }
    }
    let (mut log_lo, mut log_hi) = (lambda_lo.ln(), lambda_hi.ln());
    let mut last = None;
    while found.is_none() && steps < MAX_BISECTION_STEPS {
        steps += 1;
        let mid = (0.5 * (log_lo + log_hi)).exp();
        let (s, trace) = evaluate(mid)?;
        if within(&s) {
            found = Some((s, trace));
        } else {
            if s.ratio > target_ratio {
                log_lo = mid.ln();
            } else {
                log_hi = mid.ln();
            }
            last = Some((s, trace));
        }
    }
    let converged = found.is_some();
    let (chosen, trace) = match found.or(last) {
        Some(v) => v,
        None => unreachable!("bisection ran at least one step"),
    };
    if !converged {
        warn!("lambda bisection stopped after {steps} steps at ratio {:.4} (target {target_ratio})", chosen.ratio);
    }

    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let monotone = sorted.windows(2).all(|w| w[1].ratio <= w[0].ratio);
    if !monotone {
        warn!("radiation ratio is not monotone in lambda over the sampled points");
    }
    info!(
        "{} Hz: lambda {:e}, ratio {:.4} after {} samples",
        scenario.frequency,
        chosen.lambda,
        chosen.ratio,
        samples.len()
    );
    Ok((
        LambdaCalibration {
            lambda: chosen.lambda,
            ratio: chosen.ratio,
            target_ratio,
            lambda_lo,
            lambda_hi,
            steps,
            converged,
            monotone,
            samples,
        },
        trace,
    ))
}

fn check_ratio(r: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidScenario(format!("target ratio must lie in (0, 1], got {r}")));
    }
    Ok(())
}
