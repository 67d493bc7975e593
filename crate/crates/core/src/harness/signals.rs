use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::scenario::Scenario;
use crate::cxla::{ComplexMatrix, ComplexVector};
use crate::error::Result;

/// Signals of one frame before the controller acts.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSignals {
    pub x_clean: ComplexVector,
    /// Reference signals as measured (with sensor noise).
    pub x: ComplexVector,
    /// Primary noise at the error microphones, `P x_clean`.
    pub d: ComplexVector,
    /// Noise to add to the error microphones once `y` is known.
    pub error_noise: ComplexVector,
}

impl FrameSignals {
    /// `d + G y + noise`
    pub fn error(&self, g: &ComplexMatrix, y: &[Complex64]) -> Result<ComplexVector> {
        let gy = g.mul_vec(y)?;
        Ok(self.d.iter().zip(&gy).zip(&self.error_noise).map(|((d, gy), n)| d + gy + n).collect())
    }
}

#[derive(Debug, Clone)]
struct Regime {
    start: usize,
    amplitudes: Vec<Complex64>,
    /// Per-channel standard deviation of the complex reference noise.
    reference_std: Vec<f64>,
    error_std: Vec<f64>,
}

/// Deterministic frame generator. Frame `n` depends only on `(seed, n)`:
/// the generator is re-keyed per frame, so frames can be produced in any
/// order and all algorithms see the same references.
///
/// Each source emits a random-phase tone `a_s exp(j phi)`, `phi ~ U[0, 2 pi)`,
/// observed directly by its own reference microphone. Sensor noise is
/// circular complex Gaussian with variance `10^(-snr/10)` times the mean clean
/// power of the channel.
#[derive(Debug, Clone)]
pub struct SignalSource {
    seed: u64,
    p: Arc<ComplexMatrix>,
    noisy: bool,
    regimes: Vec<Regime>,
}

impl SignalSource {
    pub fn new(scenario: &Scenario, p: Arc<ComplexMatrix>) -> Result<Self> {
        scenario.validate()?;
        let mut pieces = vec![(0, scenario.source_amplitudes.clone())];
        if let Some(sw) = &scenario.switch {
            pieces.push((sw.iteration, sw.amplitudes.clone()));
        }
        let ratio = scenario.snr_db.map_or(0.0, |snr| 10f64.powf(-snr / 10.0));
        let regimes = pieces
            .into_iter()
            .map(|(start, amplitudes)| {
                let reference_std = amplitudes.iter().map(|a| (a.norm_sqr() * ratio).sqrt()).collect();
                let error_std = (0..p.rows())
                    .map(|m| {
                        let power: f64 = p.row(m).iter().zip(&amplitudes).map(|(pm, a)| (pm * a).norm_sqr()).sum();
                        (power * ratio).sqrt()
                    })
                    .collect();
                Regime { start, amplitudes, reference_std, error_std }
            })
            .collect();
        Ok(Self { seed: scenario.seed, p, noisy: scenario.snr_db.is_some(), regimes })
    }

    pub fn frame(&self, n: usize) -> FrameSignals {
        let regime = self.regimes.iter().rev().find(|r| r.start <= n).expect("first regime starts at 0");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(n as u64);

        let x_clean: ComplexVector = regime
            .amplitudes
            .iter()
            .map(|a| {
                let phi: f64 = rng.random::<f64>() * TAU;
                a * Complex64::from_polar(1.0, phi)
            })
            .collect();
        let d = self.p.mul_vec_unchecked(&x_clean);
        let (x, error_noise) = if self.noisy {
            let x = x_clean.iter().zip(&regime.reference_std).map(|(v, &s)| v + circular(&mut rng, s)).collect();
            let noise = regime.error_std.iter().map(|&s| circular(&mut rng, s)).collect();
            (x, noise)
        } else {
            (x_clean.clone(), vec![Complex64::new(0.0, 0.0); d.len()])
        };
        FrameSignals { x_clean, x, d, error_noise }
    }
}

fn circular(rng: &mut ChaCha8Rng, std: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * (std * FRAC_1_SQRT_2)
}

/// Frame `n` of `scenario` with primary paths `p`.
pub fn synthesize_frame(scenario: &Scenario, p: Arc<ComplexMatrix>, n: usize) -> Result<FrameSignals> {
    Ok(SignalSource::new(scenario, p)?.frame(n))
}
