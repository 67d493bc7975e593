//! Experiment orchestration: scenarios, frame synthesis, runs with metric
//! traces, calibration of `C` and `lambda`, sweeps and result files.

mod calibrate;
mod experiments;
pub mod output;
mod run;
mod scenario;
mod signals;

pub use calibrate::{
    c_from_reference, calibrate_c, calibrate_c_with_ratio, calibrate_lambda, calibrate_lambda_with, nlms_reference,
    CCalibration, LambdaCalibration, LambdaSample, DEFAULT_TARGET_RATIO, LAMBDA_SPAN, LAMBDA_TOLERANCE,
    MAX_BISECTION_STEPS,
};
pub use experiments::{
    amplitude_switch_experiment, frequency_sweep, run_all, sweep_seed, CalibrationPlan, Experiment, SweepCell,
    SweepResult, SweepRow,
};
pub use run::{
    moving_average, plateau, run, run_with_plant, tail_mean, to_db, MetricsTrace, Plateau, RunMeta, TraceRecord,
    FEASIBILITY_ABORT, PLATEAU_TOLERANCE,
};
pub use scenario::{build_default_scenario, default_geometry, AmplitudeSwitch, GammaRule, Plant, RingLayout, Scenario};
pub use signals::{synthesize_frame, FrameSignals, SignalSource};
