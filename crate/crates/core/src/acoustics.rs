//! Free-field point-source model: Green's functions, transfer matrices and
//! the exterior radiation matrix `A`.
//!
//! Time dependence is `exp(-j omega t)`, so outgoing waves carry
//! `exp(+j k r)`. The 2D kernel is `(j/4) H0^(1)(k r)` and the 3D kernel is
//! `exp(j k r) / (4 pi r)`.

use std::f64::consts::PI;

use log::debug;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cxla::{herm_eig, quadratic_form, ComplexMatrix};
use crate::error::{Error, Result};
use crate::specfun::{bessel_j0, bessel_y0, sph_bessel_j0};

/// Source/receiver pairs closer than this are treated as coincident.
pub const MIN_DISTANCE: f64 = 1e-9;

pub type Position = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Medium {
    /// Speed of sound, m/s.
    pub c: f64,
    /// Density, kg/m^3.
    pub rho: f64,
}

impl Medium {
    pub fn new(c: f64, rho: f64) -> Result<Self> {
        let m = Self { c, rho };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite() && self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "medium needs c > 0 and rho > 0, got c={} rho={}",
                self.c, self.rho
            )));
        }
        Ok(())
    }
}

impl Default for Medium {
    /// Air: 343 m/s, 1.3 kg/m^3.
    fn default() -> Self {
        Self { c: 343.0, rho: 1.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dimension {
    Two,
    Three,
}

impl Dimension {
    pub fn coords(self) -> usize {
        match self {
            Dimension::Two => 2,
            Dimension::Three => 3,
        }
    }
}

impl TryFrom<u8> for Dimension {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            2 => Ok(Dimension::Two),
            3 => Ok(Dimension::Three),
            other => Err(format!("dimension must be 2 or 3, got {other}")),
        }
    }
}

impl From<Dimension> for u8 {
    fn from(d: Dimension) -> u8 {
        d.coords() as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub dimension: Dimension,
    pub primary_positions: Vec<Position>,
    pub secondary_positions: Vec<Position>,
    pub error_positions: Vec<Position>,
    pub reference_count: usize,
}

impl ArrayGeometry {
    pub fn secondary_count(&self) -> usize {
        self.secondary_positions.len()
    }

    pub fn error_count(&self) -> usize {
        self.error_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dimension.coords();
        let roles = [
            ("primary", &self.primary_positions),
            ("secondary", &self.secondary_positions),
            ("error", &self.error_positions),
        ];
        for (role, list) in roles {
            if list.is_empty() {
                return Err(Error::InvalidScenario(format!("no {role} positions")));
            }
            for (i, p) in list.iter().enumerate() {
                if p.len() != dim || p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidScenario(format!(
                        "{role} position {i} must have {dim} finite coordinates, got {p:?}"
                    )));
                }
            }
            for i in 0..list.len() {
                for j in 0..i {
                    if distance(&list[i], &list[j]) <= MIN_DISTANCE {
                        return Err(Error::InvalidScenario(format!("{role} positions {j} and {i} coincide")));
                    }
                }
            }
        }
        if self.reference_count == 0 {
            return Err(Error::InvalidScenario("reference_count must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyPoint {
    pub frequency: f64,
    /// `2 pi f / c`, rad/m.
    pub wavenumber: f64,
}

impl FrequencyPoint {
    pub fn new(frequency: f64, medium: &Medium) -> Result<Self> {
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(Error::InvalidScenario(format!("frequency must be positive, got {frequency}")));
        }
        Ok(Self { frequency, wavenumber: 2.0 * PI * frequency / medium.c })
    }
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Free-field Green's function from `src` to `rcv`.
pub fn greens_function(src: &[f64], rcv: &[f64], fp: &FrequencyPoint, dimension: Dimension) -> Result<Complex64> {
    let d = distance(src, rcv);
    if d <= MIN_DISTANCE {
        return Err(Error::Singularity { source_index: 0, receiver_index: 0 });
    }
    let kd = fp.wavenumber * d;
    Ok(match dimension {
        Dimension::Two => {
            // (j/4)(J0 + j Y0)
            Complex64::new(-bessel_y0(kd)? / 4.0, bessel_j0(kd)? / 4.0)
        }
        Dimension::Three => Complex64::from_polar(1.0 / (4.0 * PI * d), kd),
    })
}

/// `(#receivers x #sources)` matrix of Green's functions.
pub fn build_transfer_matrix(
    sources: &[Position],
    receivers: &[Position],
    fp: &FrequencyPoint,
    dimension: Dimension,
) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::zeros(receivers.len(), sources.len());
    for (m, rcv) in receivers.iter().enumerate() {
        for (l, src) in sources.iter().enumerate() {
            out[(m, l)] = greens_function(src, rcv, fp, dimension).map_err(|e| match e {
                Error::Singularity { .. } => Error::Singularity { source_index: l, receiver_index: m },
                other => other,
            })?;
        }
    }
    Ok(out)
}

/// How `A` is made safely positive definite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    /// If `lambda_min <= floor = relative * lambda_max`, add
    /// `2 floor - lambda_min` to the diagonal.
    EigenFloor {
        relative: f64,
    },
    Off,
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::EigenFloor { relative: 1e-10 }
    }
}

/// Exterior radiation model of a loudspeaker array: the Hermitian matrix `A`
/// with `epsilon = y^H A y`, plus the scaled matrix `A / C` that defines the
/// constraint manifold and its square roots.
#[derive(Debug, Clone)]
pub struct RadiationModel {
    a: ComplexMatrix,
    delta: f64,
    target: f64,
    a_tilde: ComplexMatrix,
    sqrt_a: ComplexMatrix,
    inv_sqrt_a: ComplexMatrix,
    sqrt_a_tilde: ComplexMatrix,
    inv_sqrt_a_tilde: ComplexMatrix,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
}

impl RadiationModel {
    /// Wraps an arbitrary Hermitian matrix (after regularization) with `C = 1`.
    pub fn from_matrix(a: ComplexMatrix, regularization: Regularization) -> Result<Self> {
        if !a.is_square() || a.rows() == 0 {
            return Err(Error::shape("RadiationModel", "non-empty square matrix", format!("{:?}", a.shape())));
        }
        let a = a.hermitian_part();
        let mut eig = herm_eig(&a)?;
        let (mut lo, hi) = (eig.min_eigenvalue(), eig.max_eigenvalue());
        let mut delta = 0.0;
        let mut a = a;
        if let Regularization::EigenFloor { relative } = regularization {
            let floor = relative * hi;
            if lo <= floor {
                delta = 2.0 * floor - lo;
                debug!("radiation matrix regularized: lambda_min={lo:e}, delta={delta:e}");
                a = a.add_diagonal(delta);
                eig = herm_eig(&a)?;
                lo = eig.min_eigenvalue();
            }
        }
        if !(lo > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: lo });
        }
        let sqrt_a = eig.map_spectrum(f64::sqrt);
        let inv_sqrt_a = eig.map_spectrum(|l| 1.0 / l.sqrt());
        Ok(Self {
            a_tilde: a.clone(),
            sqrt_a_tilde: sqrt_a.clone(),
            inv_sqrt_a_tilde: inv_sqrt_a.clone(),
            a,
            delta,
            target: 1.0,
            sqrt_a,
            inv_sqrt_a,
            min_eigenvalue: lo,
            max_eigenvalue: eig.max_eigenvalue(),
        })
    }

    /// Same `A` with constraint level `C`: `A_tilde = A / C`.
    pub fn with_target(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidScenario(format!("radiation target C must be positive, got {c}")));
        }
        let root = c.sqrt();
        Ok(Self {
            target: c,
            a_tilde: self.a.scale(1.0 / c),
            sqrt_a_tilde: self.sqrt_a.scale(1.0 / root),
            inv_sqrt_a_tilde: self.inv_sqrt_a.scale(root),
            ..self.clone()
        })
    }

    /// `A` including any diagonal regularization.
    pub fn a(&self) -> &ComplexMatrix {
        &self.a
    }

    pub fn a_tilde(&self) -> &ComplexMatrix {
        &self.a_tilde
    }

    pub fn sqrt_a_tilde(&self) -> &ComplexMatrix {
        &self.sqrt_a_tilde
    }

    pub fn inv_sqrt_a_tilde(&self) -> &ComplexMatrix {
        &self.inv_sqrt_a_tilde
    }

    /// Constraint level `C`.
    pub fn target(&self) -> f64 {
        self.target
    }

    /// Diagonal loading added to make `A` positive definite.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn size(&self) -> usize {
        self.a.rows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// `||A||_2`
    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }

    /// `y^H A y`
    pub fn exterior_radiation_power(&self, y: &[Complex64]) -> Result<f64> {
        exterior_radiation_power(y, self)
    }
}

/// Radiation matrix of point sources at `secondary_positions`:
/// `A[l, l'] = kernel(k |r_l - r_l'|) / (8 c rho k)` with `J0` in 2D and the
/// spherical `j0` in 3D.
pub fn build_radiation_matrix(
    secondary_positions: &[Position],
    fp: &FrequencyPoint,
    medium: &Medium,
    dimension: Dimension,
    regularization: Regularization,
) -> Result<RadiationModel> {
    RadiationModel::from_matrix(raw_radiation_matrix(secondary_positions, fp, medium, dimension)?, regularization)
}

/// Unregularized `A`, exactly real-symmetric.
pub fn raw_radiation_matrix(
    secondary_positions: &[Position],
    fp: &FrequencyPoint,
    medium: &Medium,
    dimension: Dimension,
) -> Result<ComplexMatrix> {
    let l = secondary_positions.len();
    if l == 0 {
        return Err(Error::shape("build_radiation_matrix", ">= 1 loudspeaker", 0));
    }
    medium.validate()?;
    let k = fp.wavenumber;
    let scale = 1.0 / (8.0 * medium.c * medium.rho * k);
    let mut a = ComplexMatrix::zeros(l, l);
    for i in 0..l {
        a[(i, i)] = Complex64::new(scale, 0.0);
        for j in 0..i {
            let kd = k * distance(&secondary_positions[i], &secondary_positions[j]);
            let kernel = match dimension {
                Dimension::Two => bessel_j0(kd)?,
                Dimension::Three => sph_bessel_j0(kd)?,
            };
            let v = Complex64::new(scale * kernel, 0.0);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(a)
}

/// `Re(y^H A y)`.
pub fn exterior_radiation_power(y: &[Complex64], model: &RadiationModel) -> Result<f64> {
    let q = quadratic_form(&model.a, y)?;
    debug_assert!(
        q.im.abs() <= 1e-12 * q.norm().max(f64::MIN_POSITIVE) + 1e-300,
        "quadratic form of Hermitian A has imaginary part {}",
        q.im
    );
    Ok(q.re)
}
