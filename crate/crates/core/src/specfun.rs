//! Zeroth-order Bessel functions used by the free-field kernels.
//!
//! `bessel_j0` and `bessel_y0` use the Cephes rational approximations: a
//! rational fit in `x^2` on `[0, 5]` and the Hankel amplitude/phase form with
//! two rational corrections beyond it. Peak absolute error is around 1e-15.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_4};

use crate::error::{Error, Result};

/// `sqrt(2 / pi)`
const SQRT_FRAC_2_PI: f64 = 0.797_884_560_802_865_4;

/// Squares of the first two zeros of J0.
const J0_ZERO1_SQ: f64 = 5.783_185_962_946_784;
const J0_ZERO2_SQ: f64 = 30.471_262_343_662_087;

/// Below this threshold `sph_bessel_j0` switches to its Taylor series.
pub const SPH_J0_SERIES_THRESHOLD: f64 = 1e-3;

/// Bessel function of the first kind, order zero.
///
/// J0 is even, so negative arguments are reflected. Non-finite input is a
/// domain error.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain { function: "bessel_j0", value: x });
    }
    Ok(j0_unchecked(x.abs()))
}

/// Bessel function of the second kind, order zero.
///
/// Defined for `x > 0`. Every positive finite argument is accepted; near the
/// origin the value follows `(2/pi) ln(x)` so `bessel_y0(1e-9)` is roughly
/// `-13.1`.
pub fn bessel_y0(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain { function: "bessel_y0", value: x });
    }
    if x <= 5.0 {
        let z = x * x;
        let w = polevl(z, &YP) / p1evl(z, &YQ);
        return Ok(w + FRAC_2_PI * x.ln() * j0_unchecked(x));
    }
    let (p, q) = hankel_pq(x);
    let xn = x - FRAC_PI_4;
    Ok((p * xn.sin() + q * xn.cos()) * SQRT_FRAC_2_PI / x.sqrt())
}

/// Spherical Bessel function of the first kind, order zero: `sin(x) / x`.
pub fn sph_bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain { function: "sph_bessel_j0", value: x });
    }
    let x = x.abs();
    if x < SPH_J0_SERIES_THRESHOLD {
        let z = x * x;
        // 1 - z/6 + z^2/120 - z^3/5040; next term is below 1e-22 here.
        return Ok(1.0 - z / 6.0 * (1.0 - z / 20.0 * (1.0 - z / 42.0)));
    }
    Ok(x.sin() / x)
}

fn j0_unchecked(x: f64) -> f64 {
    if x <= 5.0 {
        let z = x * x;
        if x < 1e-5 {
            return 1.0 - z / 4.0;
        }
        let p = (z - J0_ZERO1_SQ) * (z - J0_ZERO2_SQ);
        return p * polevl(z, &RP) / p1evl(z, &RQ);
    }
    let (p, q) = hankel_pq(x);
    let xn = x - FRAC_PI_4;
    (p * xn.cos() - q * xn.sin()) * SQRT_FRAC_2_PI / x.sqrt()
}

/// Amplitude corrections `P0(x)` and `Q0(x)` of the Hankel expansion, with
/// `Q0` already multiplied by `5/x`. Only valid for `x > 5`.
fn hankel_pq(x: f64) -> (f64, f64) {
    let w = 5.0 / x;
    let z = w * w;
    let p = polevl(z, &PP) / polevl(z, &PQ);
    let q = polevl(z, &QP) / p1evl(z, &QQ);
    (p, w * q)
}

/// Horner evaluation, highest-degree coefficient first.
fn polevl(x: f64, coef: &[f64]) -> f64 {
    coef.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// Like [`polevl`] with an implicit leading coefficient of 1.
fn p1evl(x: f64, coef: &[f64]) -> f64 {
    coef.iter().fold(1.0, |acc, &c| acc * x + c)
}

static RP: [f64; 4] =
    [-4.794_432_209_782_018e9, 1.956_174_919_465_565_7e12, -2.492_483_443_609_677_2e14, 9.708_622_510_473_064e15];

static RQ: [f64; 8] = [
    4.995_631_471_526_51e2,
    1.737_854_016_763_747e5,
    4.844_096_583_399_621e7,
    1.118_555_370_453_568_3e10,
    2.112_775_201_154_892e12,
    3.105_182_298_574_225_6e14,
    3.181_219_559_432_049_6e16,
    1.710_862_940_810_431_5e18,
];

static PP: [f64; 7] = [
    7.969_367_292_973_471e-4,
    8.283_523_921_074_408e-2,
    1.239_533_716_464_143,
    5.447_250_030_587_687,
    8.747_165_001_998_17,
    5.303_240_382_353_949,
    1.0,
];

static PQ: [f64; 7] = [
    9.244_088_105_588_637e-4,
    8.562_884_743_544_745e-2,
    1.253_527_439_010_589_5,
    5.470_977_403_304_171,
    8.761_908_832_370_695,
    5.306_052_882_353_947,
    1.0,
];

static QP: [f64; 8] = [
    -1.136_638_388_984_691_6e-2,
    -1.282_527_186_705_093_1,
    -1.955_395_442_577_359_7e1,
    -9.320_601_521_237_683e1,
    -1.776_811_679_804_880_6e2,
    -1.470_775_051_549_511_8e2,
    -5.141_053_267_665_993e1,
    -6.050_143_506_007_285,
];

static QQ: [f64; 7] = [
    6.431_782_561_181_78e1,
    8.564_300_259_769_806e2,
    3.882_401_836_054_016_3e3,
    7.240_467_741_956_525e3,
    5.930_727_011_873_169e3,
    2.062_093_316_603_278_3e3,
    2.420_057_402_402_914e2,
];

// Fit of y0(x) - (2/pi) ln(x) j0(x) on [0, 5], absolute error criterion.
static YP: [f64; 8] = [
    1.559_243_678_552_357_4e4,
    -1.466_392_959_039_716e7,
    5.435_264_770_518_765e9,
    -9.821_360_657_179_115e11,
    8.759_063_943_953_67e13,
    -3.466_283_033_847_297e15,
    4.427_332_685_725_698_4e16,
    -1.849_508_004_369_866_8e16,
];

static YQ: [f64; 7] = [
    1.041_283_536_642_598_4e3,
    6.261_073_301_371_35e5,
    2.689_196_333_938_141_5e8,
    8.640_024_871_039_35e10,
    2.029_796_127_501_055_5e13,
    3.171_577_528_429_750_5e15,
    2.505_962_561_726_530_6e17,
];
