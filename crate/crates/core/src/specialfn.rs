//! Complex log-Gamma, digamma and the scalar threshold functions that show up
//! in every wave-operator formula.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecialFnError {
    #[error("Gamma has a pole at z = {0}")]
    GammaPole(f64),
    #[error("argument {0} outside the domain")]
    Domain(f64),
    #[error("phi_tilde is only defined for m in {{0, -1}}, got {0}")]
    BadChannel(i64),
}

/// A point of the extended real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    /// Maps a finite value that overflowed to infinity onto the matching token.
    pub fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            ExtReal::PosInf
        } else if x == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(x)
        }
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        ExtReal::from_f64(x)
    }
}

// Lanczos approximation, g = 607/128, 14 terms.
const LANCZOS_G_HALF: f64 = 671.0 / 128.0;
const LANCZOS_C0: f64 = 0.999_999_999_999_997_1;
const LANCZOS: [f64; 14] = [
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_746,
    -0.491_913_816_097_620_2,
    3.399_464_998_481_189e-5,
    4.652_362_892_704_858e-5,
    -9.837_447_530_487_956e-5,
    1.580_887_032_249_125e-4,
    -2.102_644_417_241_048_8e-4,
    2.174_396_181_152_126_5e-4,
    -1.643_181_065_367_639e-4,
    8.441_822_398_385_275e-5,
    -2.619_083_840_158_140_8e-5,
    3.689_918_265_953_162_5e-6,
];
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn lngamma_lanczos(z: C64) -> C64 {
    let tmp = z + LANCZOS_G_HALF;
    let mut ser = C64::new(LANCZOS_C0, 0.0);
    let mut y = z;
    for c in LANCZOS {
        y += 1.0;
        ser += c / y;
    }
    (z + 0.5) * tmp.ln() - tmp + LN_SQRT_2PI + ser.ln() - z.ln()
}

/// Principal branch of log Gamma, the one satisfying
/// `lngamma(z + 1) = lngamma(z) + ln z` with the principal `ln`.
///
/// Left of `Re z = 0.5` the value is obtained by shifting up with that
/// recurrence, so the branch matches exactly.
pub fn lngamma(z: C64) -> Result<C64, SpecialFnError> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(SpecialFnError::Domain(z.re));
    }
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Err(SpecialFnError::GammaPole(z.re));
    }
    if z.re >= 0.5 {
        return Ok(lngamma_lanczos(z));
    }
    let shift = (0.5 - z.re).ceil() as usize;
    let mut acc = C64::new(0.0, 0.0);
    let mut w = z;
    for _ in 0..shift {
        acc += w.ln();
        w += 1.0;
    }
    Ok(lngamma_lanczos(w) - acc)
}

/// Digamma on the positive half-line.
pub fn digamma(x: f64) -> Result<f64, SpecialFnError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecialFnError::Domain(x));
    }
    let mut acc = 0.0;
    let mut y = x;
    while y < 10.0 {
        acc -= 1.0 / y;
        y += 1.0;
    }
    let inv2 = 1.0 / (y * y);
    // Bernoulli tail: B2k / (2k y^2k), k = 1..7
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    Ok(acc + y.ln() - 0.5 / y - tail)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThresholdFunctionKind {
    /// ½(1 + tanh(πy) − i sech(πy))
    PlusTanhMinusISech,
    /// ½(1 + tanh(πy) + i sech(πy))
    PlusTanhPlusISech,
    /// ½(1 − tanh(πy) + i sech(πy))
    MinusTanhPlusISech,
    /// ½(1 + tanh(πy/2))
    HalfAngleTanh,
}

pub fn threshold_fn(kind: ThresholdFunctionKind, y: ExtReal) -> C64 {
    use ThresholdFunctionKind::*;
    let (th, sech) = match y {
        ExtReal::NegInf => (-1.0, 0.0),
        ExtReal::PosInf => (1.0, 0.0),
        ExtReal::Finite(y) => match kind {
            HalfAngleTanh => ((PI * y / 2.0).tanh(), 0.0),
            _ => ((PI * y).tanh(), 1.0 / (PI * y).cosh()),
        },
    };
    match kind {
        PlusTanhMinusISech => C64::new(0.5 * (1.0 + th), -0.5 * sech),
        PlusTanhPlusISech => C64::new(0.5 * (1.0 + th), 0.5 * sech),
        MinusTanhPlusISech => C64::new(0.5 * (1.0 - th), 0.5 * sech),
        HalfAngleTanh => C64::new(0.5 * (1.0 + th), 0.0),
    }
}

/// −tanh(πy) + i sech(πy), the unimodular curve from 1 to −1 through i.
pub fn tanh_sech_arc(y: ExtReal) -> C64 {
    match y {
        ExtReal::NegInf => C64::new(1.0, 0.0),
        ExtReal::PosInf => C64::new(-1.0, 0.0),
        ExtReal::Finite(y) => C64::new(-(PI * y).tanh(), 1.0 / (PI * y).cosh()),
    }
}

fn ab_delta(m: i64, alpha: f64) -> f64 {
    if m >= 0 {
        -0.5 * PI * alpha
    } else {
        0.5 * PI * alpha
    }
}

fn lg(z: C64) -> C64 {
    // arguments below always have positive real part
    lngamma(z).expect("Gamma argument off the poles")
}

/// Channel-m threshold phase of the Aharonov–Bohm wave operator.
pub fn ab_phi_minus(m: i64, alpha: f64, x: ExtReal) -> C64 {
    let delta = ab_delta(m, alpha);
    match x {
        ExtReal::NegInf => C64::new(1.0, 0.0),
        ExtReal::PosInf => C64::from_polar(1.0, 2.0 * delta),
        ExtReal::Finite(x) => {
            let a = (m.abs() as f64 + 1.0) / 2.0;
            let b = ((m as f64 + alpha).abs() + 1.0) / 2.0;
            let ix = C64::new(0.0, x / 2.0);
            let e = I * delta + lg(a + ix) - lg(a - ix) + lg(b - ix) - lg(b + ix);
            // the log-Gamma differences are purely imaginary up to rounding
            C64::from_polar(1.0, e.im)
        }
    }
}

/// Companion function multiplying the S̃ term, for the two channels m ∈ {0, −1}.
pub fn ab_phi_tilde(m: i64, alpha: f64, x: ExtReal) -> Result<C64, SpecialFnError> {
    if m != 0 && m != -1 {
        return Err(SpecialFnError::BadChannel(m));
    }
    Ok(match x {
        ExtReal::NegInf => C64::new(0.0, 0.0),
        ExtReal::PosInf => C64::new(1.0, 0.0),
        ExtReal::Finite(x) => {
            let am = m.abs() as f64;
            let nu = (m as f64 + alpha).abs();
            let ix = C64::new(0.0, x / 2.0);
            let e = -(2.0 * PI).ln() - I * (PI * am / 2.0) + PI * x / 2.0 + lg((am + 1.0) / 2.0 + ix)
                - lg((am + 1.0) / 2.0 - ix)
                + lg((1.0 + nu) / 2.0 - ix)
                + lg((1.0 - nu) / 2.0 - ix);
            e.exp()
        }
    })
}
