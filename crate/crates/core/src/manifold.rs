//! Generalized Stiefel manifold `{W in C^{L x R} : W^H A_tilde W = I_R}`.
//!
//! With `A_tilde = A / C`, every point satisfies
//! `(W x)^H A (W x) = C ||x||^2` for all `x`, which is how the radiation
//! constraint is enforced on the control filter.

use std::sync::Arc;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::acoustics::RadiationModel;
use crate::cxla::{qr_positive, sylvester_spd, ComplexMatrix};
use crate::error::{Error, Result};
use crate::Complex64;

/// Feasibility required of a freshly certified point.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Retries of the random start before giving up.
const MAX_START_ATTEMPTS: u64 = 16;

/// A control filter known to lie on the manifold, together with its
/// feasibility residual `||W^H A_tilde W - I||_F` at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    w: ComplexMatrix,
    residual: f64,
}

impl StiefelPoint {
    pub fn w(&self) -> &ComplexMatrix {
        &self.w
    }

    pub fn feasibility_residual(&self) -> f64 {
        self.residual
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.w
    }
}

#[derive(Debug, Clone)]
pub struct GeneralizedStiefel {
    model: Arc<RadiationModel>,
    cols: usize,
}

impl GeneralizedStiefel {
    pub fn new(model: Arc<RadiationModel>, cols: usize) -> Result<Self> {
        let rows = model.size();
        if cols == 0 || rows < cols {
            return Err(Error::shape("GeneralizedStiefel", format!("1 <= R <= L = {rows}"), format!("R = {cols}")));
        }
        Ok(Self { model, cols })
    }

    pub fn model(&self) -> &RadiationModel {
        &self.model
    }

    pub fn rows(&self) -> usize {
        self.model.size()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn check_shape(&self, m: &ComplexMatrix, context: &'static str) -> Result<()> {
        if m.shape() != (self.rows(), self.cols) {
            return Err(Error::shape(
                context,
                format!("{}x{}", self.rows(), self.cols),
                format!("{}x{}", m.rows(), m.cols()),
            ));
        }
        Ok(())
    }

    /// `||W^H A_tilde W - I_R||_F`
    pub fn residual(&self, w: &ComplexMatrix) -> Result<f64> {
        self.check_shape(w, "residual")?;
        let aw = self.model.a_tilde() * w;
        let gram = w.adjoint_mul(&aw)?;
        Ok(gram.distance(&ComplexMatrix::identity(self.cols)))
    }

    /// Certifies `w` as a point of the manifold.
    pub fn point(&self, w: ComplexMatrix) -> Result<StiefelPoint> {
        let residual = self.residual(&w)?;
        if !(residual <= FEASIBILITY_TOL) {
            return Err(Error::Infeasible { residual, tolerance: FEASIBILITY_TOL });
        }
        Ok(StiefelPoint { w, residual })
    }

    /// Orthogonal projection onto the tangent space at `point`:
    /// `U - A_tilde W H`, where `H` is the Hermitian solution of
    /// `S H + H S = W^H A_tilde U + U^H A_tilde W` with
    /// `S = W^H A_tilde^H A_tilde W`.
    pub fn project_tangent(&self, point: &StiefelPoint, u: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_shape(u, "project_tangent")?;
        let aw = self.model.a_tilde() * &point.w;
        let s = aw.adjoint_mul(&aw)?;
        let b = aw.adjoint_mul(u)?;
        let h = sylvester_spd(&s, &b)?;
        u.try_sub(&(&aw * &h))
    }

    /// `||W^H A_tilde V + V^H A_tilde W||_F`, zero for tangent `V`.
    pub fn tangency_residual(&self, point: &StiefelPoint, v: &ComplexMatrix) -> Result<f64> {
        self.check_shape(v, "tangency_residual")?;
        let aw = self.model.a_tilde() * &point.w;
        let m = aw.adjoint_mul(v)?;
        Ok((&m + &m.adjoint()).frobenius_norm())
    }

    /// QR retraction `A_tilde^{-1/2} qf(A_tilde^{1/2} (W + V))`.
    ///
    /// The returned point carries its recomputed residual; certification
    /// against a tolerance is the caller's decision.
    pub fn retract(&self, point: &StiefelPoint, v: &ComplexMatrix) -> Result<StiefelPoint> {
        self.check_shape(v, "retract")?;
        let moved = point.w.try_add(v)?;
        self.orthonormalize(&moved)
    }

    fn orthonormalize(&self, b: &ComplexMatrix) -> Result<StiefelPoint> {
        let (q, _) = qr_positive(&(self.model.sqrt_a_tilde() * b))?;
        let w = self.model.inv_sqrt_a_tilde() * &q;
        let residual = self.residual(&w)?;
        if residual > FEASIBILITY_TOL {
            debug!("retraction residual {residual:e} above {FEASIBILITY_TOL:e}");
        }
        Ok(StiefelPoint { w, residual })
    }

    /// Maps an arbitrary full-rank `L x R` matrix onto the manifold.
    pub fn feasible_point_from(&self, b: &ComplexMatrix) -> Result<StiefelPoint> {
        self.check_shape(b, "feasible_point_from")?;
        let p = self.orthonormalize(b)?;
        self.point(p.w)
    }

    /// Seeded random start: i.i.d. standard complex Gaussian entries mapped
    /// onto the manifold. A rank-deficient draw retries with `seed + 1`.
    pub fn feasible_point(&self, seed: u64) -> Result<StiefelPoint> {
        let mut last_err = None;
        for attempt in 0..MAX_START_ATTEMPTS {
            let s = seed.wrapping_add(attempt);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let b = ComplexMatrix::from_fn(self.rows(), self.cols, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            });
            match self.feasible_point_from(&b) {
                Ok(p) => return Ok(p),
                Err(e @ Error::RankDeficient { .. }) => {
                    warn!("rank-deficient random start with seed {s}, retrying");
                    last_err = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err.expect("at least one attempt"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::Regularization;

    fn identity_manifold(l: usize, r: usize) -> GeneralizedStiefel {
        let model = RadiationModel::from_matrix(ComplexMatrix::identity(l), Regularization::Off).unwrap();
        GeneralizedStiefel::new(Arc::new(model), r).unwrap()
    }

    #[test]
    fn canonical_columns_are_fixed_when_a_is_identity() {
        let m = identity_manifold(5, 2);
        let b = ComplexMatrix::from_fn(
            5,
            2,
            |i, j| {
                if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            },
        );
        let p = m.feasible_point_from(&b).unwrap();
        assert!(p.w().distance(&b) < 1e-15);
    }

    #[test]
    fn seeded_start_is_deterministic() {
        let m = identity_manifold(6, 2);
        assert_eq!(m.feasible_point(9).unwrap(), m.feasible_point(9).unwrap());
        assert_ne!(m.feasible_point(9).unwrap(), m.feasible_point(10).unwrap());
    }

    #[test]
    fn shape_rules() {
        let model = Arc::new(RadiationModel::from_matrix(ComplexMatrix::identity(2), Regularization::Off).unwrap());
        assert!(GeneralizedStiefel::new(model.clone(), 3).is_err());
        assert!(GeneralizedStiefel::new(model.clone(), 0).is_err());
        let m = GeneralizedStiefel::new(model, 2).unwrap();
        assert!(m.point(ComplexMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn zero_matrix_is_not_on_manifold() {
        let m = identity_manifold(4, 2);
        assert!(matches!(m.point(ComplexMatrix::zeros(4, 2)), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn retract_zero_is_identity() {
        let m = identity_manifold(6, 2);
        let p = m.feasible_point(1).unwrap();
        let q = m.retract(&p, &ComplexMatrix::zeros(6, 2)).unwrap();
        assert!(q.w().distance(p.w()) <= 1e-10);
    }

    #[test]
    fn normal_direction_projects_to_zero() {
        let m = identity_manifold(6, 2);
        let p = m.feasible_point(2).unwrap();
        let v = m.project_tangent(&p, p.w()).unwrap();
        assert!(v.frobenius_norm() < 1e-12);
    }
}
