//! Adaptive control-filter updates for one frequency bin.
//!
//! All three filters minimize the instantaneous cost
//! `sigma(W) = ||d + G W x||^2 + gamma ||W x||^2`:
//!
//! * [`Nlms`]: `W <- W - mu (G^H e + gamma W x) x^H`,
//!   `mu = mu0 / (||G^H G + gamma I||_2 ||x||^2)`.
//! * [`PenaltyNlms`]: adds `lambda y^H A y` to the cost, giving
//!   `W <- W - mu (G^H e + (gamma I + lambda A) W x) x^H` with `lambda A`
//!   included in the norm term.
//! * [`RiemannianNlms`]: keeps `W` on `{W^H A_tilde W = I}`. The gradient
//!   `2 (G^H e + gamma W x) x^H` is projected onto the tangent space and the
//!   step is retracted; the step size carries a factor 1/2 that cancels the 2
//!   in the gradient, so the effective step matches plain NLMS.

use std::sync::Arc;

use log::{debug, trace};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cxla::{norm_sqr, spectral_norm, ComplexMatrix, ComplexVector};
use crate::error::{Error, Result};
use crate::manifold::{GeneralizedStiefel, StiefelPoint};

/// Frames with `||x||^2` below this fraction of the running mean are skipped.
pub const SILENT_FRAME_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Nlms,
    Penalty,
    Riemannian,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Nlms, Algorithm::Penalty, Algorithm::Riemannian];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Nlms => "nlms",
            Algorithm::Penalty => "penalty",
            Algorithm::Riemannian => "riemannian",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nlms" => Ok(Algorithm::Nlms),
            "penalty" => Ok(Algorithm::Penalty),
            "riemannian" => Ok(Algorithm::Riemannian),
            other => Err(Error::InvalidScenario(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Regularization weight on `||W x||^2`.
    pub gamma: f64,
    /// Penalty weight on the exterior radiation (penalty variant only).
    pub lambda: f64,
    /// Normalized step size in `(0, 2)`.
    pub mu0: f64,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidScenario(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidScenario(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.mu0 > 0.0 && self.mu0 < 2.0) {
            return Err(Error::InvalidScenario(format!("mu0 must lie in (0, 2), got {}", self.mu0)));
        }
        Ok(())
    }
}

/// What feeds the update on a frame the safeguard muted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutedUpdate {
    /// The predicted error `P_hat x + G W x`, as if `W x` had been emitted.
    #[default]
    Predicted,
    /// The measured error of the muted frame (`y = 0`).
    Measured,
    /// No update on muted frames.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    /// Step size used, `None` when the frame was skipped.
    pub mu: Option<f64>,
    pub silent: bool,
    pub retraction_failed: bool,
}

/// Common interface of the three update laws.
pub trait ControlFilter: Send {
    fn weights(&self) -> &ComplexMatrix;

    /// Applies one update from reference `x` and error `e`.
    fn step(&mut self, x: &[Complex64], e: &[Complex64]) -> Result<StepReport>;

    /// Frames processed, including skipped ones.
    fn iteration(&self) -> usize;

    /// The cached spectral norm in the step-size denominator.
    fn norm_term(&self) -> f64;

    /// `||W^H A_tilde W - I||_F` for constrained filters.
    fn feasibility_residual(&self) -> Option<f64> {
        None
    }

    /// Driving signals `W x`.
    fn drive(&self, x: &[Complex64]) -> Result<ComplexVector> {
        self.weights().mul_vec(x)
    }
}

/// `||d + G W x||^2 + gamma ||W x||^2`
pub fn sigma_cost(w: &ComplexMatrix, x: &[Complex64], d: &[Complex64], g: &ComplexMatrix, gamma: f64) -> Result<f64> {
    let y = w.mul_vec(x)?;
    let gy = g.mul_vec(&y)?;
    if gy.len() != d.len() {
        return Err(Error::shape("sigma_cost", gy.len(), d.len()));
    }
    let e: ComplexVector = d.iter().zip(&gy).map(|(a, b)| a + b).collect();
    Ok(norm_sqr(&e) + gamma * norm_sqr(&y))
}

/// `(G^H e + gamma W x) x^H`, the conjugate (Wirtinger) gradient of sigma
/// at the frame that produced `e`.
pub fn euclid_grad_sigma(
    w: &ComplexMatrix,
    x: &[Complex64],
    e: &[Complex64],
    g: &ComplexMatrix,
    gamma: f64,
) -> Result<ComplexMatrix> {
    let z = descent_direction(w, x, e, g, gamma, None)?;
    Ok(ComplexMatrix::outer(&z, x))
}

/// `G^H e + gamma W x (+ lambda A W x)`
fn descent_direction(
    w: &ComplexMatrix,
    x: &[Complex64],
    e: &[Complex64],
    g: &ComplexMatrix,
    gamma: f64,
    penalty: Option<(&ComplexMatrix, f64)>,
) -> Result<ComplexVector> {
    if w.rows() != g.cols() {
        return Err(Error::shape("gradient", format!("W with {} rows", g.cols()), w.rows()));
    }
    let mut z = g.adjoint_mul_vec(e)?;
    let wx = w.mul_vec(x)?;
    for (zi, &yi) in z.iter_mut().zip(&wx) {
        *zi += yi * gamma;
    }
    if let Some((a, lambda)) = penalty {
        let awx = a.mul_vec(&wx)?;
        for (zi, &v) in z.iter_mut().zip(&awx) {
            *zi += v * lambda;
        }
    }
    Ok(z)
}

/// `||G^H G + gamma I (+ lambda A)||_2`
pub fn norm_term(g: &ComplexMatrix, gamma: f64, penalty: Option<(&ComplexMatrix, f64)>) -> Result<f64> {
    let mut m = g.adjoint_mul(g)?.add_diagonal(gamma);
    if let Some((a, lambda)) = penalty {
        m = m.try_add(&a.scale(lambda))?;
    }
    let n = spectral_norm(&m)?;
    if !(n > 0.0) {
        return Err(Error::InvalidScenario(format!("step-size norm term must be positive, got {n}")));
    }
    Ok(n)
}

/// Tracks the running mean of `||x||^2` and flags near-silent frames.
#[derive(Debug, Clone, Default)]
struct SilentFrameGuard {
    mean_power: f64,
    frames: u64,
}

impl SilentFrameGuard {
    fn admit(&mut self, power: f64) -> bool {
        let silent = !(power > 0.0) || (self.frames > 0 && power < SILENT_FRAME_RATIO * self.mean_power);
        self.frames += 1;
        self.mean_power += (power - self.mean_power) / self.frames as f64;
        !silent
    }
}

fn check_frame(w: &ComplexMatrix, g: &ComplexMatrix, x: &[Complex64], e: &[Complex64]) -> Result<()> {
    if x.len() != w.cols() {
        return Err(Error::shape("reference signal", w.cols(), x.len()));
    }
    if e.len() != g.rows() {
        return Err(Error::shape("error signal", g.rows(), e.len()));
    }
    Ok(())
}

fn check_plant(g: &ComplexMatrix, w: &ComplexMatrix) -> Result<()> {
    if g.cols() != w.rows() {
        return Err(Error::shape("control filter", format!("{} rows (loudspeakers)", g.cols()), w.rows()));
    }
    Ok(())
}

/// Plain NLMS.
#[derive(Debug, Clone)]
pub struct Nlms {
    w: ComplexMatrix,
    g: Arc<ComplexMatrix>,
    params: CostParams,
    norm: f64,
    iteration: usize,
    guard: SilentFrameGuard,
}

impl Nlms {
    pub fn new(g: Arc<ComplexMatrix>, params: CostParams, w0: ComplexMatrix) -> Result<Self> {
        params.validate()?;
        check_plant(&g, &w0)?;
        let norm = norm_term(&g, params.gamma, None)?;
        Ok(Self { w: w0, g, params, norm, iteration: 0, guard: SilentFrameGuard::default() })
    }
}

impl ControlFilter for Nlms {
    fn weights(&self) -> &ComplexMatrix {
        &self.w
    }

    fn step(&mut self, x: &[Complex64], e: &[Complex64]) -> Result<StepReport> {
        check_frame(&self.w, &self.g, x, e)?;
        self.iteration += 1;
        let power = norm_sqr(x);
        if !self.guard.admit(power) {
            debug!("nlms: silent frame {} skipped", self.iteration - 1);
            return Ok(StepReport { silent: true, ..Default::default() });
        }
        let mu = self.params.mu0 / (self.norm * power);
        let z = descent_direction(&self.w, x, e, &self.g, self.params.gamma, None)?;
        self.w.rank_one_update(Complex64::new(-mu, 0.0), &z, x)?;
        Ok(StepReport { mu: Some(mu), ..Default::default() })
    }

    fn iteration(&self) -> usize {
        self.iteration
    }

    fn norm_term(&self) -> f64 {
        self.norm
    }
}

/// NLMS on `sigma + lambda y^H A y`.
#[derive(Debug, Clone)]
pub struct PenaltyNlms {
    w: ComplexMatrix,
    g: Arc<ComplexMatrix>,
    a: Arc<ComplexMatrix>,
    params: CostParams,
    norm: f64,
    iteration: usize,
    guard: SilentFrameGuard,
}

impl PenaltyNlms {
    pub fn new(g: Arc<ComplexMatrix>, a: Arc<ComplexMatrix>, params: CostParams, w0: ComplexMatrix) -> Result<Self> {
        params.validate()?;
        check_plant(&g, &w0)?;
        if a.shape() != (g.cols(), g.cols()) {
            return Err(Error::shape("radiation matrix", format!("{0}x{0}", g.cols()), format!("{:?}", a.shape())));
        }
        let norm = norm_term(&g, params.gamma, Some((&a, params.lambda)))?;
        Ok(Self { w: w0, g, a, params, norm, iteration: 0, guard: SilentFrameGuard::default() })
    }
}

impl ControlFilter for PenaltyNlms {
    fn weights(&self) -> &ComplexMatrix {
        &self.w
    }

    fn step(&mut self, x: &[Complex64], e: &[Complex64]) -> Result<StepReport> {
        check_frame(&self.w, &self.g, x, e)?;
        self.iteration += 1;
        let power = norm_sqr(x);
        if !self.guard.admit(power) {
            debug!("penalty nlms: silent frame {} skipped", self.iteration - 1);
            return Ok(StepReport { silent: true, ..Default::default() });
        }
        let mu = self.params.mu0 / (self.norm * power);
        let z = descent_direction(&self.w, x, e, &self.g, self.params.gamma, Some((&self.a, self.params.lambda)))?;
        self.w.rank_one_update(Complex64::new(-mu, 0.0), &z, x)?;
        Ok(StepReport { mu: Some(mu), ..Default::default() })
    }

    fn iteration(&self) -> usize {
        self.iteration
    }

    fn norm_term(&self) -> f64 {
        self.norm
    }
}

/// NLMS constrained to the generalized Stiefel manifold of the radiation
/// model, so that `epsilon = C ||x||^2` holds on every frame.
#[derive(Debug, Clone)]
pub struct RiemannianNlms {
    point: StiefelPoint,
    manifold: GeneralizedStiefel,
    g: Arc<ComplexMatrix>,
    params: CostParams,
    norm: f64,
    iteration: usize,
    guard: SilentFrameGuard,
    /// 0.5 for the frame after a failed retraction, otherwise 1.
    step_scale: f64,
}

impl RiemannianNlms {
    pub fn new(
        g: Arc<ComplexMatrix>,
        manifold: GeneralizedStiefel,
        params: CostParams,
        start: StiefelPoint,
    ) -> Result<Self> {
        params.validate()?;
        check_plant(&g, start.w())?;
        if start.w().shape() != (manifold.rows(), manifold.cols()) {
            return Err(Error::shape(
                "riemannian start",
                format!("{}x{}", manifold.rows(), manifold.cols()),
                format!("{:?}", start.w().shape()),
            ));
        }
        let norm = norm_term(&g, params.gamma, None)?;
        Ok(Self {
            point: start,
            manifold,
            g,
            params,
            norm,
            iteration: 0,
            guard: SilentFrameGuard::default(),
            step_scale: 1.0,
        })
    }

    pub fn point(&self) -> &StiefelPoint {
        &self.point
    }

    pub fn manifold(&self) -> &GeneralizedStiefel {
        &self.manifold
    }

    /// `P_W(2 (G^H e + gamma W x) x^H)`
    pub fn riemannian_gradient(&self, x: &[Complex64], e: &[Complex64]) -> Result<ComplexMatrix> {
        check_frame(self.point.w(), &self.g, x, e)?;
        let z = descent_direction(self.point.w(), x, e, &self.g, self.params.gamma, None)?;
        let mut u = ComplexMatrix::zeros(self.manifold.rows(), self.manifold.cols());
        u.rank_one_update(Complex64::new(2.0, 0.0), &z, x)?;
        self.manifold.project_tangent(&self.point, &u)
    }
}

impl ControlFilter for RiemannianNlms {
    fn weights(&self) -> &ComplexMatrix {
        self.point.w()
    }

    fn step(&mut self, x: &[Complex64], e: &[Complex64]) -> Result<StepReport> {
        check_frame(self.point.w(), &self.g, x, e)?;
        self.iteration += 1;
        let power = norm_sqr(x);
        if !self.guard.admit(power) {
            debug!("riemannian nlms: silent frame {} skipped", self.iteration - 1);
            return Ok(StepReport { silent: true, ..Default::default() });
        }
        let mu = self.step_scale * self.params.mu0 / (2.0 * self.norm * power);
        let grad = self.riemannian_gradient(x, e)?;
        match self.manifold.retract(&self.point, &grad.scale(-mu)) {
            Ok(next) => {
                self.point = next;
                self.step_scale = 1.0;
                Ok(StepReport { mu: Some(mu), ..Default::default() })
            }
            Err(Error::RankDeficient { .. }) => {
                trace!("retraction failed at frame {}; keeping W", self.iteration - 1);
                self.step_scale = 0.5;
                Ok(StepReport { mu: Some(mu), retraction_failed: true, ..Default::default() })
            }
            Err(e) => Err(e),
        }
    }

    fn iteration(&self) -> usize {
        self.iteration
    }

    fn norm_term(&self) -> f64 {
        self.norm
    }

    fn feasibility_residual(&self) -> Option<f64> {
        Some(self.point.feasibility_residual())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafeguardDecision {
    /// Driving signals to emit: `W x`, or zero when muted.
    pub y: ComplexVector,
    pub muted: bool,
    /// `P_hat x`
    pub predicted_primary: ComplexVector,
    /// `P_hat x + G W x`
    pub predicted_error: ComplexVector,
}

/// Predicts the primary noise and error from `x` and mutes the output when
/// the control would make things worse (`||e_hat||^2 > ||d_hat||^2`).
pub fn safeguard_mute(
    x: &[Complex64],
    w: &ComplexMatrix,
    g: &ComplexMatrix,
    p_hat: &ComplexMatrix,
) -> Result<SafeguardDecision> {
    let d_hat = p_hat.mul_vec(x)?;
    let wx = w.mul_vec(x)?;
    let gy = g.mul_vec(&wx)?;
    if gy.len() != d_hat.len() {
        return Err(Error::shape("safeguard", d_hat.len(), gy.len()));
    }
    let e_hat: ComplexVector = d_hat.iter().zip(&gy).map(|(a, b)| a + b).collect();
    let muted = norm_sqr(&e_hat) > norm_sqr(&d_hat);
    let y = if muted { vec![Complex64::new(0.0, 0.0); wx.len()] } else { wx };
    Ok(SafeguardDecision { y, muted, predicted_primary: d_hat, predicted_error: e_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::{RadiationModel, Regularization};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn scalar(v: f64) -> Arc<ComplexMatrix> {
        Arc::new(ComplexMatrix::from_rows(&[vec![c(v)]]).unwrap())
    }

    #[test]
    fn cost_examples() {
        let g = ComplexMatrix::from_fn(2, 3, |i, j| Complex64::new(i as f64 + 0.5, j as f64));
        let x = vec![c(1.0), Complex64::new(0.0, 2.0)];
        let d = vec![c(3.0), c(-1.0)];
        let zero = ComplexMatrix::zeros(3, 2);
        assert_eq!(sigma_cost(&zero, &x, &d, &g, 0.3).unwrap(), 10.0);

        // scalar perfect cancellation: G = 2, x = 1, d = 4, W = -2
        let w = ComplexMatrix::from_rows(&[vec![c(-2.0)]]).unwrap();
        assert_eq!(sigma_cost(&w, &[c(1.0)], &[c(4.0)], &scalar(2.0), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn gradient_examples() {
        let g = ComplexMatrix::identity(2);
        let w = ComplexMatrix::from_fn(2, 2, |i, j| Complex64::new(i as f64, j as f64));
        let zero_x = vec![c(0.0); 2];
        assert_eq!(euclid_grad_sigma(&w, &zero_x, &[c(1.0), c(2.0)], &g, 0.5).unwrap(), ComplexMatrix::zeros(2, 2));
        let x = vec![c(1.0), Complex64::new(0.5, -1.0)];
        let d = [c(0.3), c(-2.0)];
        let wx = w.mul_vec(&x).unwrap();
        let e: Vec<_> = d.iter().zip(&wx).map(|(a, b)| a + b).collect();
        let grad = euclid_grad_sigma(&w, &x, &e, &g, 0.0).unwrap();
        assert!(grad.distance(&ComplexMatrix::outer(&e, &x)) < 1e-15);
    }

    #[test]
    fn nlms_scalar_deadbeat() {
        let params = CostParams { gamma: 0.0, lambda: 0.0, mu0: 1.0 };
        let w0 = ComplexMatrix::from_rows(&[vec![Complex64::new(0.3, -0.2)]]).unwrap();
        let mut f = Nlms::new(scalar(1.0), params, w0).unwrap();
        let x = [Complex64::new(0.7, 0.4)];
        let d = [Complex64::new(-1.5, 2.0)];
        let e0 = [d[0] + f.weights()[(0, 0)] * x[0]];
        f.step(&x, &e0).unwrap();
        let e1 = d[0] + f.weights()[(0, 0)] * x[0];
        assert!(e1.norm() < 1e-15);
    }

    #[test]
    fn zero_error_is_fixed_point() {
        let params = CostParams { gamma: 0.0, lambda: 0.0, mu0: 1.0 };
        let g = Arc::new(ComplexMatrix::from_fn(2, 3, |i, j| Complex64::new(1.0 + i as f64, j as f64 * 0.1)));
        let w0 = ComplexMatrix::from_fn(3, 1, |i, _| c(i as f64));
        let mut f = Nlms::new(g, params, w0.clone()).unwrap();
        f.step(&[c(1.0)], &[c(0.0), c(0.0)]).unwrap();
        assert_eq!(f.weights(), &w0);
    }

    #[test]
    fn silent_frames_are_skipped() {
        let params = CostParams { gamma: 0.1, lambda: 0.0, mu0: 1.0 };
        let w0 = ComplexMatrix::from_rows(&[vec![c(0.5)]]).unwrap();
        let mut f = Nlms::new(scalar(1.0), params, w0.clone()).unwrap();
        let r = f.step(&[c(0.0)], &[c(1.0)]).unwrap();
        assert!(r.silent && r.mu.is_none());
        assert_eq!(f.weights(), &w0);
        f.step(&[c(1.0)], &[c(1.0)]).unwrap();
        assert!(f.step(&[c(1e-7)], &[c(1.0)]).unwrap().silent);
        assert!(!f.step(&[c(1e-5)], &[c(1.0)]).unwrap().silent);
    }

    #[test]
    fn shape_errors_surface() {
        let params = CostParams { gamma: 0.0, lambda: 0.0, mu0: 1.0 };
        assert!(Nlms::new(scalar(1.0), params, ComplexMatrix::zeros(2, 1)).is_err());
        let mut f = Nlms::new(scalar(1.0), params, ComplexMatrix::zeros(1, 1)).unwrap();
        assert!(f.step(&[c(1.0), c(1.0)], &[c(1.0)]).is_err());
        assert!(f.step(&[c(1.0)], &[c(1.0), c(2.0)]).is_err());
    }

    #[test]
    fn params_validation() {
        let ok = CostParams { gamma: 0.0, lambda: 0.0, mu0: 1.0 };
        assert!(ok.validate().is_ok());
        assert!(CostParams { mu0: 2.0, ..ok }.validate().is_err());
        assert!(CostParams { mu0: 0.0, ..ok }.validate().is_err());
        assert!(CostParams { gamma: -1.0, ..ok }.validate().is_err());
        assert!(CostParams { lambda: f64::NAN, ..ok }.validate().is_err());
    }

    #[test]
    fn safeguard_examples() {
        let g = ComplexMatrix::identity(2);
        let p_hat = ComplexMatrix::from_fn(2, 1, |i, _| c(1.0 + i as f64));
        let x = [c(2.0)];
        // G W x = -d_hat
        let w = ComplexMatrix::from_fn(2, 1, |i, _| c(-(1.0 + i as f64)));
        let keep = safeguard_mute(&x, &w, &g, &p_hat).unwrap();
        assert!(!keep.muted);
        assert_eq!(keep.y, vec![c(-2.0), c(-4.0)]);
        assert!(norm_sqr(&keep.predicted_error) == 0.0);
        // G W x = +d_hat
        let mute = safeguard_mute(&x, &w.scale(-1.0), &g, &p_hat).unwrap();
        assert!(mute.muted);
        assert_eq!(mute.y, vec![c(0.0), c(0.0)]);
    }

    #[test]
    fn riemannian_zero_gradient_keeps_point() {
        let model = RadiationModel::from_matrix(ComplexMatrix::identity(3), Regularization::Off).unwrap();
        let manifold = GeneralizedStiefel::new(Arc::new(model), 1).unwrap();
        let start = manifold.feasible_point(4).unwrap();
        let g = Arc::new(ComplexMatrix::from_fn(2, 3, |i, j| Complex64::new(i as f64 - j as f64, 0.5)));
        let params = CostParams { gamma: 0.0, lambda: 0.0, mu0: 1.0 };
        let mut f = RiemannianNlms::new(g, manifold, params, start.clone()).unwrap();
        f.step(&[c(1.0)], &[c(0.0), c(0.0)]).unwrap();
        assert!(f.weights().distance(start.w()) <= 1e-10);
    }
}
