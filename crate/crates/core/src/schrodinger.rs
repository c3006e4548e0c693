//! Scattering for genuine potentials: the 1D S matrix on ℝ in the even/odd
//! channels with its boundary quadruple, and 3D radial phase shifts with the
//! p-regularized Levinson sum over partial waves.

use crate::boundary::{diag2, identity, CMat, Chart, EdgeId, Orientation, QuadrantBoundary, Segment};
use crate::specialfn::{threshold_fn, ExtReal, ThresholdFunctionKind, C64, I};
use crate::winding::{gauss_legendre, wind_phase, WindingError, WindingReport, DEFAULT_MAX_DEPTH, DEFAULT_N0};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SchrodingerError {
    #[error("step control failed near x = {x}")]
    StiffIntegration { x: f64 },
    #[error("det S(0) = {det} is not within 0.1 of ±1")]
    AmbiguousClassification { det: C64 },
    #[error("zero-energy resonance suspected in channel l = {l}")]
    ResonanceSuspected { l: u32 },
    #[error("partial-wave term l = {l} is {term:e}, above 1e-4")]
    TruncationWarning { l: u32, term: f64 },
    #[error("invalid potential: {0}")]
    BadPotential(String),
    #[error("k must be positive, got {0}")]
    BadMomentum(f64),
    #[error(transparent)]
    Winding(#[from] WindingError),
}

type Result<T> = std::result::Result<T, SchrodingerError>;

// ---------------------------------------------------------------- ODE

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-11, atol: 1e-13, h_max: f64::INFINITY, max_steps: 2_000_000 }
    }
}

const A21: f64 = 1.0 / 5.0;
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Dormand–Prince 5(4) from `x0` to `x1` (either direction); `on_step` sees
/// every accepted point.
pub fn dopri5<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    x0: f64,
    x1: f64,
    y0: [f64; N],
    opts: &OdeOptions,
    mut on_step: impl FnMut(f64, &[f64; N]),
) -> Result<[f64; N]> {
    let span = x1 - x0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut x = x0;
    let mut y = y0;
    let mut h = (1e-3 * span.abs()).min(opts.h_max).min(0.1);
    let mut k1 = f(x, &y);
    for _ in 0..opts.max_steps {
        let last = (x1 - x) * dir <= h;
        if last {
            h = (x1 - x) * dir;
        }
        let hs = h * dir;
        let k2 = f(x + C[0] * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = f(x + C[1] * hs, &axpy(&y, hs, &[(A3[0], &k1), (A3[1], &k2)]));
        let k4 = f(x + C[2] * hs, &axpy(&y, hs, &[(A4[0], &k1), (A4[1], &k2), (A4[2], &k3)]));
        let k5 = f(x + C[3] * hs, &axpy(&y, hs, &[(A5[0], &k1), (A5[1], &k2), (A5[2], &k3), (A5[3], &k4)]));
        let k6 = f(
            x + C[4] * hs,
            &axpy(&y, hs, &[(A6[0], &k1), (A6[1], &k2), (A6[2], &k3), (A6[3], &k4), (A6[4], &k5)]),
        );
        let yn = axpy(&y, hs, &[(B[0], &k1), (B[2], &k3), (B[3], &k4), (B[4], &k5), (B[5], &k6)]);
        let k7 = f(x + hs, &yn);
        let mut err: f64 = 0.0;
        for i in 0..N {
            let e = hs * (E[0] * k1[i] + E[2] * k3[i] + E[3] * k4[i] + E[4] * k5[i] + E[5] * k6[i] + E[6] * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(yn[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            return Err(SchrodingerError::StiffIntegration { x });
        }
        if err <= 1.0 {
            x = if last { x1 } else { x + hs };
            y = yn;
            k1 = k7;
            on_step(x, &y);
            if last {
                return Ok(y);
            }
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * fac).min(opts.h_max);
        if h < 1e-14 * x.abs().max(1.0) {
            return Err(SchrodingerError::StiffIntegration { x });
        }
    }
    Err(SchrodingerError::StiffIntegration { x })
}

/// [`dopri5`] across the interior breakpoints of a piecewise smooth RHS.
fn dopri5_pieces<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N] + Copy,
    x0: f64,
    x1: f64,
    y0: [f64; N],
    breaks: &[f64],
    opts: &OdeOptions,
    mut on_step: impl FnMut(f64, &[f64; N]),
) -> Result<[f64; N]> {
    let (lo, hi) = (x0.min(x1), x0.max(x1));
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|b| *b > lo && *b < hi).collect();
    pts.sort_by(f64::total_cmp);
    if x1 < x0 {
        pts.reverse();
    }
    pts.push(x1);
    let mut x = x0;
    let mut y = y0;
    for p in pts {
        y = dopri5(f, x, p, y, opts, &mut on_step)?;
        x = p;
    }
    Ok(y)
}

// ---------------------------------------------------------------- potentials

/// Shape of a potential. For 1D use the argument is x; for radial use it is
/// r, and `SquareWell` means `V = −depth` for `r < width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    /// `−depth` on `|x| < width/2`
    SquareWell { depth: f64, width: f64 },
    /// `−depth · exp(−(x/width)²)`; negative depth is repulsive
    Gaussian { depth: f64, width: f64 },
    /// `−strength · sech²(x)`
    Sech2 { strength: f64 },
    /// linear interpolation, zero outside the table
    Tabulated { points: Vec<(f64, f64)> },
}

impl Profile {
    pub fn value(&self, x: f64, radial: bool) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::SquareWell { depth, width } => {
                let inside = if radial { x < *width } else { x.abs() < 0.5 * width };
                if inside {
                    -depth
                } else {
                    0.0
                }
            }
            Profile::Gaussian { depth, width } => -depth * (-(x / width).powi(2)).exp(),
            Profile::Sech2 { strength } => -strength / x.cosh().powi(2),
            Profile::Tabulated { points } => {
                let (first, last) = (points[0], points[points.len() - 1]);
                if x < first.0 || x > last.0 {
                    return 0.0;
                }
                let i = points.partition_point(|p| p.0 <= x).clamp(1, points.len() - 1);
                let (a, b) = (points[i - 1], points[i]);
                a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
            }
        }
    }

    /// Points where the potential is not smooth.
    pub fn breakpoints(&self, radial: bool) -> Vec<f64> {
        match self {
            Profile::SquareWell { width, .. } if radial => vec![*width],
            Profile::SquareWell { width, .. } => vec![-0.5 * width, 0.5 * width],
            Profile::Tabulated { points } => points.iter().map(|p| p.0).collect(),
            _ => vec![],
        }
    }

    /// A radius beyond which |V| is below 1e-17 of its scale.
    pub fn natural_cutoff(&self, radial: bool) -> f64 {
        match self {
            Profile::Zero => 1.0,
            Profile::SquareWell { width, .. } => {
                if radial {
                    *width
                } else {
                    0.5 * width
                }
            }
            Profile::Gaussian { width, .. } => 6.5 * width.abs(),
            Profile::Sech2 { .. } => 20.0,
            Profile::Tabulated { points } => points.iter().map(|p| p.0.abs()).fold(0.0, f64::max),
        }
    }

    fn scale(&self) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::SquareWell { depth, .. } | Profile::Gaussian { depth, .. } => depth.abs(),
            Profile::Sech2 { strength } => strength.abs(),
            Profile::Tabulated { points } => points.iter().map(|p| p.1.abs()).fold(0.0, f64::max),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SchrodingerError::BadPotential(m.to_string()));
        match self {
            Profile::SquareWell { depth, width } | Profile::Gaussian { depth, width } => {
                if !(width.is_finite() && *width > 0.0 && depth.is_finite()) {
                    return bad("width must be positive and depth finite");
                }
            }
            Profile::Sech2 { strength } if !strength.is_finite() => return bad("strength must be finite"),
            Profile::Tabulated { points } => {
                if points.len() < 2 || points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return bad("table needs at least two strictly increasing abscissae");
                }
                if points.iter().any(|p| !p.1.is_finite()) {
                    return bad("table values must be finite");
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Reads `x,V` rows (header optional) from a CSV file.
    pub fn from_csv(path: &Path) -> std::result::Result<Profile, String> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path).map_err(|e| e.to_string())?;
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            let (Some(a), Some(b)) = (rec.get(0), rec.get(1)) else { continue };
            match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
                (Ok(x), Ok(v)) => points.push((x, v)),
                _ if points.is_empty() => continue,
                _ => return Err(format!("bad row {rec:?}")),
            }
        }
        Ok(Profile::Tabulated { points })
    }
}

/// Potential on ℝ, negligible beyond `±cutoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential1D {
    pub profile: Profile,
    pub cutoff: f64,
    /// ρ in `∫(1+|x|)^ρ |V| < ∞`; infinite for compact or exponential decay
    pub decay_exponent: f64,
}

fn check_cutoff(profile: &Profile, cutoff: f64, radial: bool) -> Result<()> {
    if !(cutoff.is_finite() && cutoff > 0.0) {
        return Err(SchrodingerError::BadPotential("cutoff must be positive".into()));
    }
    let tol = 1e-10 * (1.0 + profile.scale());
    for j in 0..=32 {
        let x = cutoff * (1.0 + j as f64 / 32.0) * (1.0 + 1e-12);
        if profile.value(x, radial).abs() > tol || (!radial && profile.value(-x, radial).abs() > tol) {
            return Err(SchrodingerError::BadPotential(format!("|V| is not negligible beyond the cutoff {cutoff}")));
        }
    }
    Ok(())
}

impl Potential1D {
    pub fn new(profile: Profile) -> Result<Self> {
        let cutoff = profile.natural_cutoff(false);
        Self::with_cutoff(profile, cutoff)
    }

    pub fn with_cutoff(profile: Profile, cutoff: f64) -> Result<Self> {
        profile.validate()?;
        check_cutoff(&profile, cutoff, false)?;
        Ok(Potential1D { profile, cutoff, decay_exponent: f64::INFINITY })
    }

    pub fn zero() -> Self {
        Potential1D { profile: Profile::Zero, cutoff: 1.0, decay_exponent: f64::INFINITY }
    }

    pub fn sech2(strength: f64) -> Self {
        Self::new(Profile::Sech2 { strength }).expect("valid sech²")
    }

    pub fn square_well(depth: f64, width: f64) -> Result<Self> {
        Self::new(Profile::SquareWell { depth, width })
    }

    pub fn v(&self, x: f64) -> f64 {
        self.profile.value(x, false)
    }

    fn breaks(&self) -> Vec<f64> {
        self.profile.breakpoints(false)
    }

    fn opts(&self, k: f64) -> OdeOptions {
        // a few steps per local wavelength keeps node counting exact
        let scale = (self.profile.scale() + k * k).sqrt();
        OdeOptions { h_max: 0.5 / (1.0 + scale), ..OdeOptions::default() }
    }
}

// ---------------------------------------------------------------- 1D scattering

fn schrodinger_rhs(v: impl Fn(f64) -> f64 + Copy, k2: f64) -> impl Fn(f64, &[f64; 4]) -> [f64; 4] + Copy {
    move |x, y| {
        let q = v(x) - k2;
        [y[2], y[3], q * y[0], q * y[1]]
    }
}

/// Transmission and the two reflection coefficients at momentum `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Channels1D {
    pub t: C64,
    pub r_left: C64,
    pub r_right: C64,
}

fn plane(x: f64, k: f64, sign: f64) -> [f64; 4] {
    let e = C64::from_polar(1.0, sign * k * x);
    let d = I * sign * k * e;
    [e.re, e.im, d.re, d.im]
}

/// `(a, b)` with `ψ = a e^{ikx} + b e^{−ikx}` near `x`.
fn decompose(y: &[f64; 4], x: f64, k: f64) -> (C64, C64) {
    let psi = C64::new(y[0], y[1]);
    let dpsi = C64::new(y[2], y[3]) / (I * k);
    ((psi + dpsi) * C64::from_polar(0.5, -k * x), (psi - dpsi) * C64::from_polar(0.5, k * x))
}

pub fn channels_1d(pot: &Potential1D, k: f64) -> Result<Channels1D> {
    if !(k > 0.0) {
        return Err(SchrodingerError::BadMomentum(k));
    }
    let r = pot.cutoff;
    let prof = &pot.profile;
    let v = |x: f64| prof.value(x, false);
    let f = schrodinger_rhs(v, k * k);
    let opts = pot.opts(k);
    let breaks = pot.breaks();
    // transmitted e^{ikx} on the right, traced back to the left
    let yl = dopri5_pieces(f, r, -r, plane(r, k, 1.0), &breaks, &opts, |_, _| {})?;
    let (a, b) = decompose(&yl, -r, k);
    // transmitted e^{−ikx} on the left, traced to the right
    let yr = dopri5_pieces(f, -r, r, plane(-r, k, -1.0), &breaks, &opts, |_, _| {})?;
    let (d, c) = decompose(&yr, r, k);
    Ok(Channels1D { t: 1.0 / a, r_left: b / a, r_right: d / c })
}

fn m2(a: C64, b: C64, c: C64, d: C64) -> CMat {
    CMat::from_row_slice(2, 2, &[a, b, c, d])
}

/// S in the even/odd channels.
pub fn even_odd(ch: &Channels1D) -> CMat {
    let (t, rl, rr) = (ch.t, ch.r_left, ch.r_right);
    let s = 0.5 * (rl + rr);
    let a = 0.5 * (rr - rl);
    m2(t + s, a, -a, t - s)
}

/// S(k) in the even/odd channels.
pub fn jost_smatrix_1d(pot: &Potential1D, k: f64) -> Result<CMat> {
    Ok(even_odd(&channels_1d(pot, k)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroEnergyClass {
    /// det S(0) = −1, S(0) = ±diag(−1, 1)
    Generic,
    /// det S(0) = 1, S(0) = [[a, b], [−b̄, a]]
    Exceptional,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct S0Estimate {
    pub class: ZeroEnergyClass,
    pub det: C64,
    /// linear extrapolation from `k` and `2k`
    pub raw: CMat,
    /// the matching canonical form
    pub canonical: CMat,
}

pub const S0_PROBE_K: f64 = 1e-3;

pub fn s0_classify(pot: &Potential1D) -> Result<S0Estimate> {
    let s1 = jost_smatrix_1d(pot, S0_PROBE_K)?;
    let s2 = jost_smatrix_1d(pot, 2.0 * S0_PROBE_K)?;
    let raw = &s1 * C64::new(2.0, 0.0) - s2;
    let det = raw[(0, 0)] * raw[(1, 1)] - raw[(0, 1)] * raw[(1, 0)];
    let z = |x: f64| C64::new(x, 0.0);
    if (det + 1.0).norm() < 0.1 {
        let sign = if raw[(1, 1)].re >= 0.0 { 1.0 } else { -1.0 };
        let canonical = diag2(z(-sign), z(sign));
        return Ok(S0Estimate { class: ZeroEnergyClass::Generic, det, raw, canonical });
    }
    if (det - 1.0).norm() < 0.1 {
        let a = 0.5 * (raw[(0, 0)] + raw[(1, 1)]).re;
        let b = 0.5 * (raw[(0, 1)] - raw[(1, 0)].conj());
        let n = (a * a + b.norm_sqr()).sqrt();
        let (a, b) = (a / n, b / n);
        let canonical = m2(z(a), b, -b.conj(), z(a));
        return Ok(S0Estimate { class: ZeroEnergyClass::Exceptional, det, raw, canonical });
    }
    Err(SchrodingerError::AmbiguousClassification { det })
}

/// Zeros of the zero-energy solution launched flat from the left, including
/// one past the cutoff where the outside line crosses zero. Crossings
/// further than 1e6 cutoffs away signal a threshold state and do not count.
pub fn bound_count_1d(pot: &Potential1D) -> Result<usize> {
    let r = pot.cutoff;
    let prof = &pot.profile;
    let f = move |x: f64, y: &[f64; 2]| [y[1], prof.value(x, false) * y[0]];
    let mut nodes = 0;
    let mut prev = 1.0;
    let y = dopri5_pieces(f, -r, r, [1.0, 0.0], &pot.breaks(), &pot.opts(0.0), |_, y| {
        if y[0] != 0.0 {
            if prev * y[0] < 0.0 {
                nodes += 1;
            }
            prev = y[0];
        }
    })?;
    if y[0] * y[1] < 0.0 && -y[0] / y[1] < 1e6 * r {
        nodes += 1;
    }
    Ok(nodes)
}

/// Unitary factor of the polar decomposition.
fn unitary_part(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    svd.u.expect("u") * svd.v_t.expect("v_t")
}

/// `m^a` for unitary `m` close to 1, through its eigenvalues.
fn unitary_power(m: &CMat, a: f64) -> CMat {
    let schur = m.clone().schur();
    let (q, t) = schur.unpack();
    let n = m.nrows();
    let d = CMat::from_fn(n, n, |i, j| if i == j { C64::from_polar(1.0, a * t[(i, i)].arg()) } else { C64::new(0.0, 0.0) });
    &q * d * q.adjoint()
}

fn max_eig_arg(m: &CMat) -> f64 {
    m.clone().schur().unpack().1.diagonal().iter().map(|z| z.arg().abs()).fold(0.0, f64::max)
}

/// S on [0, ∞]: snapped S(0) at 0, polar interpolation up to the probe
/// momentum, integrated values up to `k_max`, then `S(k_max)^{k_max/k}`.
#[derive(Clone)]
pub struct SPath1D {
    pub pot: Arc<Potential1D>,
    pub s0: CMat,
    pub s_lo: CMat,
    pub k_max: f64,
    pub s_max: CMat,
}

pub const TAIL_ARG: f64 = 0.2;

impl SPath1D {
    pub fn new(pot: &Potential1D, s0: CMat) -> Result<Self> {
        let mut k_max = 10.0;
        let mut s_max = jost_smatrix_1d(pot, k_max)?;
        while max_eig_arg(&s_max) > TAIL_ARG {
            k_max *= 2.0;
            s_max = jost_smatrix_1d(pot, k_max)?;
        }
        let s_lo = jost_smatrix_1d(pot, S0_PROBE_K)?;
        Ok(SPath1D { pot: Arc::new(pot.clone()), s0, s_lo, k_max, s_max })
    }

    pub fn at(&self, k: f64) -> Result<CMat> {
        if k <= 0.0 {
            Ok(self.s0.clone())
        } else if k < S0_PROBE_K {
            let w = C64::new(k / S0_PROBE_K, 0.0);
            Ok(unitary_part(&(&self.s0 * (C64::new(1.0, 0.0) - w) + &self.s_lo * w)))
        } else if k.is_infinite() {
            Ok(identity(2))
        } else if k > self.k_max {
            Ok(unitary_power(&self.s_max, self.k_max / k))
        } else {
            jost_smatrix_1d(&self.pot, k)
        }
    }
}

pub fn gamma_boundary_1d(pot: &Potential1D) -> Result<(QuadrantBoundary, S0Estimate)> {
    let est = s0_classify(pot)?;
    let path = SPath1D::new(pot, est.canonical.clone())?;
    let s0 = est.canonical.clone();
    let g1 = move |y: ExtReal| {
        let fp = threshold_fn(ThresholdFunctionKind::PlusTanhPlusISech, y);
        let fm = threshold_fn(ThresholdFunctionKind::PlusTanhMinusISech, y);
        identity(2) + diag2(fp, fm) * (&s0 - identity(2))
    };
    let ends1 = (g1(ExtReal::NegInf), g1(ExtReal::PosInf));
    let seg1 = Segment::new(EdgeId::B1, Chart::Line, Orientation::Forward, ends1, move |y| g1(ExtReal::Finite(y)));
    let ends2 = (path.s0.clone(), identity(2));
    // only a failed integration can fail here, which the probes above rule out
    let seg2 = Segment::new(EdgeId::B2, Chart::HalfLine, Orientation::Forward, ends2, move |k| {
        path.at(k).expect("S(k) integration")
    });
    let seg3 = Segment::constant(EdgeId::B3, Chart::Line, Orientation::Forward, identity(2));
    let seg4 = Segment::constant(EdgeId::B4, Chart::HalfLine, Orientation::Forward, identity(2));
    Ok((QuadrantBoundary::quadruple(seg1, seg2, seg3, seg4).expect("1D quadruple"), est))
}

#[derive(Debug, Clone, Serialize)]
pub struct Levinson1DReport {
    pub class: ZeroEnergyClass,
    pub det_s0: C64,
    pub bound_states: usize,
    pub winding: WindingReport,
    /// contribution of the S segment alone
    pub wind_s: f64,
    /// bound states minus ½ in the generic case
    pub expected_wind_s: f64,
    pub threshold_contribution: f64,
    pub residual: f64,
    pub pass: bool,
}

pub fn levinson_1d(pot: &Potential1D, tol: f64) -> Result<Levinson1DReport> {
    let (qb, est) = gamma_boundary_1d(pot)?;
    let winding = wind_phase(&qb, DEFAULT_N0, DEFAULT_MAX_DEPTH)?;
    let n = bound_count_1d(pot)?;
    let offset = match est.class {
        ZeroEnergyClass::Generic => 0.5,
        ZeroEnergyClass::Exceptional => 0.0,
    };
    let wind_s = winding.per_segment[1];
    let expected_wind_s = n as f64 - offset;
    let residual = (wind_s - expected_wind_s).abs().max((winding.total - n as f64).abs());
    Ok(Levinson1DReport {
        class: est.class,
        det_s0: est.det,
        bound_states: n,
        threshold_contribution: winding.per_segment[0],
        wind_s,
        expected_wind_s,
        residual,
        pass: residual < tol,
        winding,
    })
}

// ---------------------------------------------------------------- 3D partial waves

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialPotential {
    pub profile: Profile,
    pub cutoff: f64,
    pub decay_exponent: f64,
}

impl RadialPotential {
    pub fn new(profile: Profile) -> Result<Self> {
        let cutoff = profile.natural_cutoff(true);
        Self::with_cutoff(profile, cutoff)
    }

    pub fn with_cutoff(profile: Profile, cutoff: f64) -> Result<Self> {
        profile.validate()?;
        check_cutoff(&profile, cutoff, true)?;
        Ok(RadialPotential { profile, cutoff, decay_exponent: f64::INFINITY })
    }

    pub fn zero() -> Self {
        RadialPotential { profile: Profile::Zero, cutoff: 1.0, decay_exponent: f64::INFINITY }
    }

    pub fn gaussian(depth: f64, width: f64) -> Result<Self> {
        Self::new(Profile::Gaussian { depth, width })
    }

    pub fn v(&self, r: f64) -> f64 {
        self.profile.value(r, true)
    }
}

/// Riccati–Bessel `(ĵ_l, ĵ_l′, n̂_l, n̂_l′)` at `x > 0`, with
/// `ĵ₀ = sin`, `n̂₀ = −cos`.
pub fn riccati_bessel(l: u32, x: f64) -> (f64, f64, f64, f64) {
    let (s, c) = x.sin_cos();
    // upward recurrence f_{n+1} = (2n+1)/x f_n − f_{n−1}, from n = −1
    let mut n_prev = s;
    let mut n_cur = -c;
    let mut j_prev = c;
    let mut j_cur = s;
    for n in 0..l {
        let q = (2 * n + 1) as f64 / x;
        (n_prev, n_cur) = (n_cur, q * n_cur - n_prev);
        (j_prev, j_cur) = (j_cur, q * j_cur - j_prev);
    }
    if l > 0 && x < (l + 1) as f64 {
        j_cur = riccati_j_series(l, x);
        j_prev = riccati_j_series(l - 1, x);
    }
    let lf = l as f64;
    if l == 0 {
        return (s, c, -c, s);
    }
    (j_cur, j_prev - lf * j_cur / x, n_cur, n_prev - lf * n_cur / x)
}

/// `x j_l(x)` from its power series.
fn riccati_j_series(l: u32, x: f64) -> f64 {
    let mut lead = x;
    for n in 1..=l {
        lead *= x / (2 * n + 1) as f64;
    }
    let y = -0.5 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..200 {
        term *= y / (m as f64 * (2 * l + 2 * m + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    lead * sum
}

const R0: f64 = 1e-5;

fn radial_opts(pot: &RadialPotential, k: f64) -> OdeOptions {
    let scale = (pot.profile.scale() + k * k).sqrt();
    OdeOptions { h_max: 0.5 / (1.0 + scale), ..OdeOptions::default() }
}

/// Regular solution `(u, u′)` at the cutoff, and the number of sign changes
/// of `u` on the way.
fn regular_solution(pot: &RadialPotential, l: u32, k: f64) -> Result<([f64; 2], usize)> {
    let ll = (l * (l + 1)) as f64;
    let prof = &pot.profile;
    let k2 = k * k;
    let f = move |r: f64, y: &[f64; 2]| [y[1], (ll / (r * r) + prof.value(r, true) - k2) * y[0]];
    let mut nodes = 0;
    let mut prev = 1.0;
    // u ~ r^{l+1}, scaled by R0^{−l}
    let y = dopri5_pieces(f, R0, pot.cutoff, [R0, (l + 1) as f64], &prof.breakpoints(true), &radial_opts(pot, k), |_, y| {
        if y[0] != 0.0 {
            if prev * y[0] < 0.0 {
                nodes += 1;
            }
            prev = y[0];
        }
    })?;
    Ok((y, nodes))
}

/// δ_l at momentum `k`, reduced to (−π/2, π/2].
fn phase_shift_k(pot: &RadialPotential, l: u32, k: f64) -> Result<f64> {
    let ([u, du], _) = regular_solution(pot, l, k)?;
    let (j, dj, n, dn) = riccati_bessel(l, k * pot.cutoff);
    let num = du * j - u * k * dj;
    let den = du * n - u * k * dn;
    let mut d = (num / den).atan();
    if d <= -PI / 2.0 {
        d += PI;
    }
    Ok(d)
}

/// δ_l(λ) modulo π, in (−π/2, π/2].
pub fn phase_shifts(pot: &RadialPotential, lambda: f64, l: u32) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(SchrodingerError::BadMomentum(lambda));
    }
    phase_shift_k(pot, l, lambda.sqrt())
}

fn wrap_pi(x: f64) -> f64 {
    x - PI * (x / PI).round()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseShiftTable {
    pub lambdas: Vec<f64>,
    /// continuous branch per channel, anchored to 0 at the largest λ
    pub deltas: Vec<Vec<f64>>,
    pub l_max: u32,
}

impl PhaseShiftTable {
    /// Largest jump between neighbours over all channels.
    pub fn max_jump(&self) -> f64 {
        self.deltas
            .iter()
            .flat_map(|d| d.windows(2).map(|w| (w[1] - w[0]).abs()))
            .fold(0.0, f64::max)
    }
}

pub fn phase_shift_table(pot: &RadialPotential, lambdas: &[f64], l_max: u32) -> Result<PhaseShiftTable> {
    let deltas = (0..=l_max)
        .into_par_iter()
        .map(|l| {
            let raw: Vec<f64> = lambdas.iter().map(|&lam| phase_shifts(pot, lam, l)).collect::<Result<_>>()?;
            // unwrap from the high-energy end
            let mut out = raw.clone();
            for i in (0..raw.len().saturating_sub(1)).rev() {
                out[i] = out[i + 1] + wrap_pi(raw[i] - out[i + 1]);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseShiftTable { lambdas: lambdas.to_vec(), deltas, l_max })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelCount {
    pub l: u32,
    pub bound_states: usize,
    /// `l u + R u′` at zero energy; zero for a threshold state
    pub a: f64,
    pub resonance_suspected: bool,
}

/// Zero-energy node count in channel `l`, including a zero of
/// `A r^{l+1} + B r^{−l}` past the cutoff.
pub fn channel_bound_count(pot: &RadialPotential, l: u32) -> Result<ChannelCount> {
    let ([u, du], mut nodes) = regular_solution(pot, l, 0.0)?;
    let r = pot.cutoff;
    let lf = l as f64;
    let a = lf * u + r * du;
    let b = (lf + 1.0) * u - r * du;
    let ratio = -b / a;
    if ratio > 1.0 && ratio < 1e12 {
        nodes += 1;
    }
    let resonance_suspected = a.abs() < 1e-6 * (lf * u.abs() + r * du.abs() + u.abs());
    Ok(ChannelCount { l, bound_states: nodes, a, resonance_suspected })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Levinson3DOptions {
    pub k_max: f64,
    pub panel_width: f64,
    pub gauss_order: usize,
    /// fixed truncation; chosen from the 1e-4 tail bound when absent
    pub l_max: Option<u32>,
    pub l_cap: u32,
}

impl Default for Levinson3DOptions {
    fn default() -> Self {
        Levinson3DOptions { k_max: 20.0, panel_width: 0.25, gauss_order: 8, l_max: None, l_cap: 40 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelTerm {
    pub l: u32,
    pub bound_states: usize,
    /// `(1/2π)∫(1 − e^{2iδ})^p (−2δ′) dk` per requested p, tail included
    pub lhs: Vec<f64>,
    pub tail: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Levinson3DReport {
    pub p: Vec<u32>,
    pub l_max: u32,
    pub channels: Vec<ChannelTerm>,
    /// `Σ (2l+1) LHS_l` per p
    pub lhs: Vec<f64>,
    pub bound_states: usize,
}

/// `Re ∫_0^d (1 − e^{2iδ})^p dδ`
fn tail_integral(d: f64, p: u32) -> f64 {
    let mut sum = d;
    let mut binom = 1.0;
    for j in 1..=p {
        binom = binom * (p - j + 1) as f64 / j as f64;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let jf = j as f64;
        // ∫_0^d e^{2ijδ} dδ has real part sin(2jd)/(2j)
        sum += sign * binom * (2.0 * jf * d).sin() / (2.0 * jf);
    }
    sum
}

fn k_panels(opts: &Levinson3DOptions) -> Vec<(f64, f64)> {
    let mut edges = vec![0.0, 1e-3, 1e-2, 0.05, 0.1, 0.2];
    let mut k = 0.25;
    while k < opts.k_max - 1e-12 {
        edges.push(k);
        k += opts.panel_width;
    }
    edges.push(opts.k_max);
    edges.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Gauss–Legendre sums of `(1/2π) Re ∫ (1 − e^{2iδ})^p (−2δ′) dk` over one panel.
fn panel_sum(pot: &RadialPotential, l: u32, ps: &[u32], gl: &(Vec<f64>, Vec<f64>), a: f64, b: f64) -> Result<Vec<f64>> {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = vec![0.0; ps.len()];
    for (xi, wi) in gl.0.iter().zip(&gl.1) {
        let k = c + r * xi;
        let h = 1e-4 * k;
        let d0 = phase_shift_k(pot, l, k)?;
        let dp = d0 + wrap_pi(phase_shift_k(pot, l, k + h)? - d0);
        let dm = d0 + wrap_pi(phase_shift_k(pot, l, k - h)? - d0);
        let dd = (dp - dm) / (2.0 * h);
        let one_minus = C64::new(1.0, 0.0) - C64::from_polar(1.0, 2.0 * d0);
        for (i, &p) in ps.iter().enumerate() {
            acc[i] += wi * r * (one_minus.powu(p) * (-2.0 * dd)).re / (2.0 * PI);
        }
    }
    Ok(acc)
}

const PANEL_TOL: f64 = 1e-8;
const PANEL_DEPTH: u32 = 12;

/// Bisects until the halves agree with the whole, which resolves the sharp
/// phase rise of a near-threshold resonance.
fn adaptive_panel(
    pot: &RadialPotential,
    l: u32,
    ps: &[u32],
    gl: &(Vec<f64>, Vec<f64>),
    (a, b): (f64, f64),
    whole: Vec<f64>,
    depth: u32,
) -> Result<Vec<f64>> {
    let m = 0.5 * (a + b);
    let left = panel_sum(pot, l, ps, gl, a, m)?;
    let right = panel_sum(pot, l, ps, gl, m, b)?;
    let split: Vec<f64> = left.iter().zip(&right).map(|(x, y)| x + y).collect();
    let diff = split.iter().zip(&whole).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    if diff < PANEL_TOL || depth >= PANEL_DEPTH {
        return Ok(split);
    }
    let l_sum = adaptive_panel(pot, l, ps, gl, (a, m), left, depth + 1)?;
    let r_sum = adaptive_panel(pot, l, ps, gl, (m, b), right, depth + 1)?;
    Ok(l_sum.iter().zip(&r_sum).map(|(x, y)| x + y).collect())
}

fn channel_lhs(pot: &RadialPotential, l: u32, ps: &[u32], opts: &Levinson3DOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let gl = gauss_legendre(opts.gauss_order);
    let sums = k_panels(opts)
        .par_iter()
        .map(|&(a, b)| adaptive_panel(pot, l, ps, &gl, (a, b), panel_sum(pot, l, ps, &gl, a, b)?, 0))
        .collect::<Result<Vec<_>>>()?;
    let d_max = phase_shift_k(pot, l, opts.k_max)?;
    let tails: Vec<f64> = ps.iter().map(|&p| tail_integral(d_max, p) / PI).collect();
    let lhs = (0..ps.len()).map(|i| sums.iter().map(|s| s[i]).sum::<f64>() + tails[i]).collect();
    Ok((lhs, tails))
}

/// Partial-wave sum of the p-regularized Levinson integral against the
/// node-count oracle.
pub fn regularized_levinson_3d(pot: &RadialPotential, ps: &[u32], opts: &Levinson3DOptions) -> Result<Levinson3DReport> {
    if ps.iter().any(|&p| p < 2) {
        return Err(SchrodingerError::BadPotential("p must be at least 2".into()));
    }
    let mut channels = Vec::new();
    let mut l = 0;
    loop {
        let count = channel_bound_count(pot, l)?;
        if count.resonance_suspected {
            return Err(SchrodingerError::ResonanceSuspected { l });
        }
        let (lhs, tail) = channel_lhs(pot, l, ps, opts)?;
        let term = (2 * l + 1) as f64 * lhs.iter().map(|v| (v - count.bound_states as f64).abs()).fold(0.0, f64::max);
        let small = count.bound_states == 0 && term < 1e-4;
        channels.push(ChannelTerm { l, bound_states: count.bound_states, lhs, tail });
        match opts.l_max {
            Some(lm) if l == lm => {
                if !small {
                    return Err(SchrodingerError::TruncationWarning { l, term });
                }
                break;
            }
            Some(_) => {}
            None if small => break,
            None if l == opts.l_cap => return Err(SchrodingerError::TruncationWarning { l, term }),
            None => {}
        }
        l += 1;
    }
    let weight = |c: &ChannelTerm| (2 * c.l + 1) as f64;
    let lhs = (0..ps.len()).map(|i| channels.iter().map(|c| weight(c) * c.lhs[i]).sum()).collect();
    let bound_states = channels.iter().map(|c| (2 * c.l + 1) as usize * c.bound_states).sum();
    Ok(Levinson3DReport { p: ps.to_vec(), l_max: l, channels, lhs, bound_states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{corner_mismatch, unitarity_defect};

    #[test]
    fn dopri5_exponential_and_oscillator() {
        let y = dopri5(|_, y: &[f64; 1]| [y[0]], 0.0, 2.0, [1.0], &OdeOptions::default(), |_, _| {}).unwrap();
        assert!((y[0] - 2f64.exp()).abs() < 1e-9);
        let y = dopri5(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, -10.0, [0.0, 1.0], &OdeOptions::default(), |_, _| {})
            .unwrap();
        assert!((y[0] - (-10f64).sin()).abs() < 1e-8);
    }

    #[test]
    fn free_s_is_identity() {
        for k in [0.05, 1.0, 7.0] {
            let s = jost_smatrix_1d(&Potential1D::zero(), k).unwrap();
            assert!((s - identity(2)).norm() < 1e-9);
        }
        let est = s0_classify(&Potential1D::zero()).unwrap();
        assert_eq!(est.class, ZeroEnergyClass::Exceptional);
    }

    #[test]
    fn sech2_is_reflectionless_with_known_transmission() {
        let pot = Potential1D::sech2(2.0);
        for k in [0.05, 0.3, 1.0, 2.5, 8.0, 20.0] {
            let ch = channels_1d(&pot, k).unwrap();
            let t = C64::new(k, 1.0) / C64::new(k, -1.0);
            assert!(ch.r_left.norm() < 1e-6 && ch.r_right.norm() < 1e-6, "{k}");
            assert!((ch.t - t).norm() < 1e-7, "{k} {} {t}", ch.t);
            assert!(unitarity_defect(&even_odd(&ch)) < 1e-8);
        }
        assert_eq!(s0_classify(&pot).unwrap().class, ZeroEnergyClass::Exceptional);
        assert_eq!(bound_count_1d(&pot).unwrap(), 1);
    }

    #[test]
    fn square_well_counts_match_closed_form() {
        for (depth, width) in [(0.5, 1.0), (5.0, 2.0), (20.0, 3.0), (60.0, 1.7)] {
            let n = bound_count_1d(&Potential1D::square_well(depth, width).unwrap()).unwrap();
            let oracle = (depth.sqrt() * width / PI).ceil() as usize;
            assert_eq!(n, oracle, "{depth} {width}");
        }
    }

    #[test]
    fn square_well_tends_to_identity() {
        let pot = Potential1D::square_well(5.0, 2.0).unwrap();
        let devs: Vec<f64> = [20.0, 40.0, 80.0, 160.0]
            .iter()
            .map(|&k| (jost_smatrix_1d(&pot, k).unwrap() - identity(2)).norm())
            .collect();
        for w in devs.windows(2) {
            assert!(w[1] < 0.6 * w[0], "{devs:?}");
        }
    }

    #[test]
    fn generic_well_levinson() {
        let pot = Potential1D::square_well(5.0, 2.0).unwrap();
        let rep = levinson_1d(&pot, 1e-2).unwrap();
        assert_eq!(rep.class, ZeroEnergyClass::Generic);
        assert_eq!(rep.bound_states, 2);
        assert!(rep.pass, "{rep:?}");
        assert!((rep.threshold_contribution - 0.5).abs() < 1e-2);
    }

    #[test]
    fn sech2_levinson_and_corners() {
        let pot = Potential1D::sech2(2.0);
        let (qb, _) = gamma_boundary_1d(&pot).unwrap();
        assert!(corner_mismatch(&qb) < 1e-6);
        let rep = levinson_1d(&pot, 1e-2).unwrap();
        assert!(rep.pass && rep.bound_states == 1 && rep.winding.rounded() == 1, "{rep:?}");
    }

    #[test]
    fn riccati_bessel_values() {
        // l = 2 closed form: ĵ₂ = (3/x² − 1) sin x − 3 cos x / x
        for x in [0.3, 2.0, 3.5, 10.0] {
            let (j, dj, n, dn) = riccati_bessel(2, x);
            let (s, c) = x.sin_cos();
            let j2 = (3.0 / (x * x) - 1.0) * s - 3.0 * c / x;
            let n2 = -(3.0 / (x * x) - 1.0) * c - 3.0 * s / x;
            assert!((j - j2).abs() < 1e-12 * (1.0 + j2.abs()), "{x}");
            assert!((n - n2).abs() < 1e-10 * (1.0 + n2.abs()), "{x}");
            // Wronskian ĵ n̂′ − ĵ′ n̂ = 1
            assert!((j * dn - dj * n - 1.0).abs() < 1e-10, "{x}");
        }
        let (j, _, _, _) = riccati_bessel(10, 1.0);
        // x j₁₀(x) at 1 from the series leading term with its first correction
        assert!((j / riccati_j_series(10, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn free_phase_shifts_vanish() {
        for l in 0..4 {
            assert!(phase_shifts(&RadialPotential::zero(), 2.0, l).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn hard_square_well_s_wave_closed_form() {
        // tan(kR + δ₀) = (k/K) tan(KR), K = √(k² + V₀)
        let (v0, a) = (3.0, 1.5);
        let pot = RadialPotential::new(Profile::SquareWell { depth: v0, width: a }).unwrap();
        for k in [0.2, 1.0, 3.0] {
            let kk = (k * k + v0).sqrt();
            let want = wrap_pi((k / kk * (kk * a).tan()).atan() - k * a);
            let got = phase_shift_k(&pot, 0, k).unwrap();
            assert!(wrap_pi(got - want).abs() < 1e-8, "{k}");
        }
    }

    #[test]
    fn tail_integral_matches_quadrature() {
        for (d, p) in [(0.1, 2), (-0.3, 3), (1.0, 4)] {
            let n = 20000;
            let q: f64 = (0..n)
                .map(|i| {
                    let t = d * (i as f64 + 0.5) / n as f64;
                    (C64::new(1.0, 0.0) - C64::from_polar(1.0, 2.0 * t)).powu(p).re * d / n as f64
                })
                .sum();
            assert!((tail_integral(d, p) - q).abs() < 1e-8);
        }
    }

    #[test]
    fn radial_square_well_s_wave_count() {
        // N₀ = ⌊K a/π + ½⌋ with K = √V₀
        for (v0, a) in [(3.0, 1.5), (30.0, 1.0), (100.0, 1.2)] {
            let pot = RadialPotential::new(Profile::SquareWell { depth: v0, width: a }).unwrap();
            let n = channel_bound_count(&pot, 0).unwrap().bound_states;
            assert_eq!(n, (v0.sqrt() * a / PI + 0.5).floor() as usize, "{v0} {a}");
        }
    }

    #[test]
    fn phase_branch_is_continuous_and_anchored() {
        let pot = RadialPotential::gaussian(10.0, 1.0).unwrap();
        let lambdas: Vec<f64> = (1..=200).map(|j| (j as f64 * 0.1).powi(2)).collect();
        let table = phase_shift_table(&pot, &lambdas, 3).unwrap();
        assert!(table.max_jump() < PI / 2.0);
        // one s-wave bound state: δ₀ climbs to about π at low energy
        assert!((table.deltas[0][0] - PI).abs() < 0.5, "{}", table.deltas[0][0]);
        assert!(table.deltas[3][0].abs() < 1e-3);
    }
}
