use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::acoustics::{
    build_radiation_matrix, build_transfer_matrix, ArrayGeometry, Dimension, FrequencyPoint, Medium, Position,
    RadiationModel, Regularization,
};
use crate::algorithms::{Algorithm, CostParams, MutedUpdate};
use crate::cxla::{spectral_norm, ComplexMatrix};
use crate::error::{Error, Result};

/// Loudspeakers on concentric rings, evenly spaced within each ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingLayout {
    pub radii: Vec<f64>,
    pub split: Vec<usize>,
    pub offsets_deg: Vec<f64>,
}

impl Default for RingLayout {
    fn default() -> Self {
        Self { radii: vec![1.0, 1.2], split: vec![6, 6], offsets_deg: vec![15.0, 45.0] }
    }
}

impl RingLayout {
    pub fn positions(&self) -> Result<Vec<Position>> {
        if self.radii.len() != self.split.len() || self.radii.len() != self.offsets_deg.len() {
            return Err(Error::InvalidScenario(format!(
                "ring layout lists differ in length: radii {}, split {}, offsets {}",
                self.radii.len(),
                self.split.len(),
                self.offsets_deg.len()
            )));
        }
        let mut out = Vec::new();
        for ((&r, &count), &offset) in self.radii.iter().zip(&self.split).zip(&self.offsets_deg) {
            if !(r > 0.0 && r.is_finite()) || count == 0 || !offset.is_finite() {
                return Err(Error::InvalidScenario(format!("bad ring: radius {r}, count {count}, offset {offset}")));
            }
            for i in 0..count {
                let theta = (offset + 360.0 * i as f64 / count as f64).to_radians();
                out.push(vec![r * theta.cos(), r * theta.sin()]);
            }
        }
        Ok(out)
    }
}

/// Primary-source amplitudes change at `iteration`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeSwitch {
    pub iteration: usize,
    #[serde(with = "amplitudes")]
    pub amplitudes: Vec<Complex64>,
}

/// How `gamma` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaRule {
    /// Multiple of `lambda_max(G^H G)`.
    Relative(f64),
    Absolute(f64),
}

impl Default for GammaRule {
    fn default() -> Self {
        GammaRule::Relative(1e-4)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub medium: Medium,
    /// Hz
    pub frequency: f64,
    #[serde(with = "amplitudes")]
    pub source_amplitudes: Vec<Complex64>,
    /// Sensor SNR in dB; `None` disables sensor noise.
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub n_iterations: usize,
    pub switch: Option<AmplitudeSwitch>,
    pub algorithm: Algorithm,
    pub gamma: GammaRule,
    pub mu0: f64,
    /// Penalty weight (penalty algorithm only).
    pub lambda: f64,
    /// Radiation target `C` (Riemannian only).
    pub c_target: Option<f64>,
    pub moving_average_window: usize,
    /// Output muting for the Riemannian filter.
    pub safeguard: bool,
    pub muted_update: MutedUpdate,
    pub regularization: Regularization,
}

/// The default two-dimensional setup: two primary sources, four error
/// microphones on a 1 m square, twelve loudspeakers on two rings.
pub fn default_geometry() -> ArrayGeometry {
    ArrayGeometry {
        dimension: Dimension::Two,
        primary_positions: vec![vec![-3.0, 0.5], vec![3.0, 0.0]],
        secondary_positions: RingLayout::default().positions().expect("default layout is valid"),
        error_positions: vec![vec![0.5, 0.5], vec![0.5, -0.5], vec![-0.5, 0.5], vec![-0.5, -0.5]],
        reference_count: 2,
    }
}

pub fn build_default_scenario(frequency: f64) -> Result<Scenario> {
    let s = Scenario {
        geometry: default_geometry(),
        medium: Medium::default(),
        frequency,
        source_amplitudes: vec![Complex64::new(10.0, 0.0), Complex64::new(5.0, 0.0)],
        snr_db: Some(40.0),
        seed: 1,
        n_iterations: 50_000,
        switch: None,
        algorithm: Algorithm::Riemannian,
        gamma: GammaRule::default(),
        mu0: 1.0,
        lambda: 0.0,
        c_target: None,
        moving_average_window: 100,
        safeguard: true,
        muted_update: MutedUpdate::default(),
        regularization: Regularization::default(),
    };
    s.validate()?;
    Ok(s)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        self.geometry.validate()?;
        self.medium.validate()?;
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return bad(format!("frequency must be > 0, got {}", self.frequency));
        }
        let sources = self.geometry.primary_positions.len();
        if self.geometry.reference_count != sources {
            return bad(format!(
                "each reference microphone observes one source: reference_count {} != {} sources",
                self.geometry.reference_count, sources
            ));
        }
        if self.geometry.reference_count > self.geometry.secondary_count() {
            return bad("more reference channels than loudspeakers".into());
        }
        check_amplitudes(&self.source_amplitudes, sources, "source_amplitudes")?;
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return bad(format!("snr_db must be finite or null, got {snr}"));
            }
        }
        if self.n_iterations == 0 {
            return bad("n_iterations must be >= 1".into());
        }
        if let Some(sw) = &self.switch {
            if sw.iteration >= self.n_iterations {
                return bad(format!("switch iteration {} must be < n_iterations {}", sw.iteration, self.n_iterations));
            }
            check_amplitudes(&sw.amplitudes, sources, "switch amplitudes")?;
        }
        match self.gamma {
            GammaRule::Relative(v) | GammaRule::Absolute(v) if !(v >= 0.0 && v.is_finite()) => {
                return bad(format!("gamma must be >= 0, got {v}"));
            }
            _ => {}
        }
        CostParams { gamma: 0.0, lambda: self.lambda, mu0: self.mu0 }.validate()?;
        if let Some(c) = self.c_target {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("c_target must be > 0, got {c}"));
            }
        }
        if self.moving_average_window == 0 {
            return bad("moving_average_window must be >= 1".into());
        }
        Ok(())
    }

    /// Step parameters for a plant built from this scenario.
    pub fn cost_params(&self, plant: &Plant) -> CostParams {
        CostParams { gamma: plant.gamma, lambda: self.lambda, mu0: self.mu0 }
    }

    pub fn frequency_point(&self) -> Result<FrequencyPoint> {
        FrequencyPoint::new(self.frequency, &self.medium)
    }

    /// Same scenario at another frequency and seed.
    pub fn at_frequency(&self, frequency: f64, seed: u64) -> Self {
        Self { frequency, seed, ..self.clone() }
    }
}

fn check_amplitudes(a: &[Complex64], sources: usize, what: &str) -> Result<()> {
    if a.len() != sources {
        return Err(Error::InvalidScenario(format!("{what}: expected {sources} values, got {}", a.len())));
    }
    if a.iter().any(|z| !z.is_finite() || z.norm() == 0.0) {
        return Err(Error::InvalidScenario(format!("{what} must be finite and nonzero: {a:?}")));
    }
    Ok(())
}

/// Frequency-dependent matrices of a scenario. Shared read-only by all runs
/// at that frequency.
#[derive(Debug, Clone)]
pub struct Plant {
    pub frequency: FrequencyPoint,
    /// Secondary paths, `M x L`.
    pub g: Arc<ComplexMatrix>,
    /// Primary paths, `M x S`.
    pub p: Arc<ComplexMatrix>,
    /// Radiation model with `C = 1`.
    pub radiation: Arc<RadiationModel>,
    /// Resolved `gamma`.
    pub gamma: f64,
    /// `||G^H G||_2`
    pub ghg_norm: f64,
}

impl Plant {
    pub fn build(s: &Scenario) -> Result<Self> {
        s.validate()?;
        let fp = s.frequency_point()?;
        let geo = &s.geometry;
        let g = build_transfer_matrix(&geo.secondary_positions, &geo.error_positions, &fp, geo.dimension)?;
        let p = build_transfer_matrix(&geo.primary_positions, &geo.error_positions, &fp, geo.dimension)?;
        let radiation =
            build_radiation_matrix(&geo.secondary_positions, &fp, &s.medium, geo.dimension, s.regularization)?;
        let ghg_norm = spectral_norm(&g.adjoint_mul(&g)?)?;
        let gamma = match s.gamma {
            GammaRule::Relative(r) => r * ghg_norm,
            GammaRule::Absolute(v) => v,
        };
        Ok(Self { frequency: fp, g: Arc::new(g), p: Arc::new(p), radiation: Arc::new(radiation), gamma, ghg_norm })
    }
}

/// Amplitudes in JSON: a number for a real amplitude or `[re, im]`.
mod amplitudes {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Real(f64),
        Complex([f64; 2]),
    }

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let reprs: Vec<Repr> =
            v.iter().map(|z| if z.im == 0.0 { Repr::Real(z.re) } else { Repr::Complex([z.re, z.im]) }).collect();
        reprs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let reprs = Vec::<Repr>::deserialize(d)?;
        Ok(reprs
            .into_iter()
            .map(|r| match r {
                Repr::Real(re) => Complex64::new(re, 0.0),
                Repr::Complex([re, im]) => Complex64::new(re, im),
            })
            .collect())
    }
}
