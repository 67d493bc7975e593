use std::sync::Arc;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::scenario::{Plant, Scenario};
use super::signals::SignalSource;
use crate::algorithms::{safeguard_mute, Algorithm, ControlFilter, MutedUpdate, Nlms, PenaltyNlms, RiemannianNlms};
use crate::cxla::{norm_sqr, ComplexMatrix};
use crate::error::{Error, Result};
use crate::exec::cell_seed;
use crate::manifold::GeneralizedStiefel;

/// Abort a Riemannian run once `||W^H A_tilde W - I||_F` exceeds this.
pub const FEASIBILITY_ABORT: f64 = 1e-6;

/// Plateau check: relative change allowed between the means of the last two
/// tenths of the run.
pub const PLATEAU_TOLERANCE: f64 = 0.01;

/// Stream index used to derive the Riemannian start from the scenario seed.
const START_STREAM: u64 = 0x0053_5441_5254;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub n: usize,
    /// `||e||^2 / ||d||^2`
    pub p_red: f64,
    /// `y^H A y` of the emitted `y`.
    pub epsilon: f64,
    /// `C ||x||^2` (Riemannian only).
    pub epsilon_target: Option<f64>,
    pub mu: Option<f64>,
    pub muted: bool,
    pub feasibility_residual: Option<f64>,
    /// `||x||^2`
    pub x_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub relative_change: f64,
    pub reached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub algorithm: Algorithm,
    pub frequency_hz: f64,
    pub seed: u64,
    pub gamma: f64,
    pub lambda: Option<f64>,
    pub c_target: Option<f64>,
    pub delta_reg: f64,
    pub norm_term: f64,
    pub window: usize,
    /// Means over the last `window` frames.
    pub converged_p_red: f64,
    pub converged_p_red_db: f64,
    pub converged_epsilon: f64,
    pub converged_x_power: f64,
    pub plateau: Plateau,
    pub muted_frames: usize,
    pub silent_frames: usize,
    pub retraction_failures: usize,
    pub max_feasibility_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTrace {
    pub meta: RunMeta,
    pub records: Vec<TraceRecord>,
}

impl MetricsTrace {
    pub fn p_red(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.p_red).collect()
    }

    pub fn epsilon(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.epsilon).collect()
    }
}

pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Causal moving average: entry `n` is the mean of `values[n+1-w ..= n]`,
/// using fewer values during the first `w - 1` frames.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..values.len())
        .map(|n| {
            let lo = (n + 1).saturating_sub(w);
            values[lo..=n].iter().sum::<f64>() / (n + 1 - lo) as f64
        })
        .collect()
}

/// Mean of the last `window` entries.
pub fn tail_mean(values: &[f64], window: usize) -> f64 {
    let lo = values.len().saturating_sub(window.max(1));
    let tail = &values[lo..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Compares the mean P_red of the last tenth of the run with the tenth
/// before it.
pub fn plateau(p_red: &[f64]) -> Plateau {
    let seg = p_red.len() / 10;
    if seg == 0 {
        return Plateau { relative_change: f64::NAN, reached: false };
    }
    let n = p_red.len();
    let last = p_red[n - seg..].iter().sum::<f64>() / seg as f64;
    let prev = p_red[n - 2 * seg..n - seg].iter().sum::<f64>() / seg as f64;
    let relative_change = (last - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
    Plateau { relative_change, reached: relative_change < PLATEAU_TOLERANCE }
}

/// Runs `scenario.algorithm` for `n_iterations` frames.
pub fn run(scenario: &Scenario) -> Result<MetricsTrace> {
    let plant = Plant::build(scenario)?;
    run_with_plant(scenario, &plant)
}

/// As [`run`], reusing matrices already built for this scenario's frequency.
pub fn run_with_plant(scenario: &Scenario, plant: &Plant) -> Result<MetricsTrace> {
    scenario.validate()?;
    let g = plant.g.clone();
    let params = scenario.cost_params(plant);
    let (l, r) = (scenario.geometry.secondary_count(), scenario.geometry.reference_count);
    let radiation = plant.radiation.clone();

    let mut riemannian_c = None;
    let mut filter: Box<dyn ControlFilter> = match scenario.algorithm {
        Algorithm::Nlms => Box::new(Nlms::new(g.clone(), params, ComplexMatrix::zeros(l, r))?),
        Algorithm::Penalty => {
            Box::new(PenaltyNlms::new(g.clone(), Arc::new(radiation.a().clone()), params, ComplexMatrix::zeros(l, r))?)
        }
        Algorithm::Riemannian => {
            let c = scenario
                .c_target
                .ok_or_else(|| Error::InvalidScenario("riemannian run needs c_target; calibrate it first".into()))?;
            riemannian_c = Some(c);
            let manifold = GeneralizedStiefel::new(Arc::new(radiation.with_target(c)?), r)?;
            let start = manifold.feasible_point(cell_seed(scenario.seed, START_STREAM))?;
            Box::new(RiemannianNlms::new(g.clone(), manifold, params, start)?)
        }
    };
    let guarded = riemannian_c.is_some() && scenario.safeguard;
    let signals = SignalSource::new(scenario, plant.p.clone())?;
    let mut records = Vec::with_capacity(scenario.n_iterations);
    let (mut muted_frames, mut silent_frames, mut retraction_failures) = (0, 0, 0);
    let mut max_residual: Option<f64> = None;

    for n in 0..scenario.n_iterations {
        let frame = signals.frame(n);
        let x_power = norm_sqr(&frame.x);
        let (y, muted, predicted_error) = if guarded {
            let s = safeguard_mute(&frame.x, filter.weights(), &g, &plant.p).map_err(|e| e.at(n))?;
            (s.y, s.muted, Some(s.predicted_error))
        } else {
            (filter.drive(&frame.x).map_err(|e| e.at(n))?, false, None)
        };
        let e = frame.error(&g, &y).map_err(|e| e.at(n))?;
        let p_red = norm_sqr(&e) / norm_sqr(&frame.d);
        let epsilon = radiation.exterior_radiation_power(&y).map_err(|e| e.at(n))?;
        let residual = filter.feasibility_residual();

        let update_error = if muted {
            muted_frames += 1;
            match scenario.muted_update {
                MutedUpdate::Predicted => predicted_error,
                MutedUpdate::Measured => Some(e),
                MutedUpdate::Skip => None,
            }
        } else {
            Some(e)
        };
        let report = match update_error {
            Some(err) => filter.step(&frame.x, &err).map_err(|e| e.at(n))?,
            None => Default::default(),
        };
        silent_frames += report.silent as usize;
        retraction_failures += report.retraction_failed as usize;

        if let Some(res) = residual {
            max_residual = Some(max_residual.map_or(res, |m: f64| m.max(res)));
            if !(res <= FEASIBILITY_ABORT) {
                return Err(Error::Infeasible { residual: res, tolerance: FEASIBILITY_ABORT }.at(n));
            }
        }
        records.push(TraceRecord {
            n,
            p_red,
            epsilon,
            epsilon_target: riemannian_c.map(|c| c * x_power),
            mu: report.mu,
            muted,
            feasibility_residual: residual,
            x_power,
        });
    }
    if retraction_failures > 0 {
        warn!("{retraction_failures} retraction failures in {} run", scenario.algorithm);
    }

    let window = scenario.moving_average_window;
    let p: Vec<f64> = records.iter().map(|r| r.p_red).collect();
    let eps: Vec<f64> = records.iter().map(|r| r.epsilon).collect();
    let xp: Vec<f64> = records.iter().map(|r| r.x_power).collect();
    let converged_p_red = tail_mean(&p, window);
    let plateau = plateau(&p);
    if !plateau.reached {
        debug!(
            "{} at {} Hz: P_red not on a plateau (change {:.3})",
            scenario.algorithm, scenario.frequency, plateau.relative_change
        );
    }
    let meta = RunMeta {
        algorithm: scenario.algorithm,
        frequency_hz: scenario.frequency,
        seed: scenario.seed,
        gamma: params.gamma,
        lambda: (scenario.algorithm == Algorithm::Penalty).then_some(params.lambda),
        c_target: riemannian_c,
        delta_reg: radiation.delta(),
        norm_term: filter.norm_term(),
        window,
        converged_p_red,
        converged_p_red_db: to_db(converged_p_red),
        converged_epsilon: tail_mean(&eps, window),
        converged_x_power: tail_mean(&xp, window),
        plateau,
        muted_frames,
        silent_frames,
        retraction_failures,
        max_feasibility_residual: max_residual,
    };
    info!(
        "{} {} Hz: P_red {:.2} dB, epsilon {:.4e}, muted {}",
        meta.algorithm, meta.frequency_hz, meta.converged_p_red_db, meta.converged_epsilon, muted_frames
    );
    Ok(MetricsTrace { meta, records })
}
