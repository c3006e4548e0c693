//! Winding numbers of closed unitary loops: phase unwrapping of the
//! determinant, the derivative integral, and its Schatten-regularized form.
//!
//! Convention: clockwise turns count positively, so `θ ↦ e^{−imθ}` on
//! `[0, 2π]` has winding `m`.

use crate::boundary::{CMat, QuadrantBoundary, Segment};
use crate::specialfn::{C64, I};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, thiserror::Error)]
pub enum WindingError {
    #[error("phase unwrapping did not converge on segment {segment} near u = {u:.6} (jump {jump:.3} rad)")]
    NonConvergence { segment: usize, u: f64, jump: f64 },
    #[error("determinant vanishes on segment {segment} at u = {u:.6}")]
    ZeroDeterminant { segment: usize, u: f64 },
    #[error("integrand is not integrable for p = {p}: need (p + 1) a > b")]
    NotIntegrable { p: u32 },
    #[error("quadrature did not reach tolerance {tol:e} (last change {change:e})")]
    QuadratureStalled { tol: f64, change: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingReport {
    pub total: f64,
    pub per_segment: Vec<f64>,
    pub regularization_order: u32,
    pub integerness_residual: f64,
    pub samples_used: usize,
}

impl WindingReport {
    pub fn from_segments(per_segment: Vec<f64>, regularization_order: u32, samples_used: usize) -> Self {
        let total: f64 = per_segment.iter().sum();
        WindingReport {
            total,
            per_segment,
            regularization_order,
            integerness_residual: (total - total.round()).abs(),
            samples_used,
        }
    }

    pub fn rounded(&self) -> i64 {
        self.total.round() as i64
    }
}

pub const DEFAULT_N0: usize = 256;
pub const DEFAULT_MAX_DEPTH: u32 = 20;
const JUMP_LIMIT: f64 = PI / 2.0;

fn det_at(seg: &Segment, i: usize, u: f64) -> Result<C64, WindingError> {
    let d = seg.at(u).determinant();
    if d.norm() < 1e-300 || !d.norm().is_finite() {
        return Err(WindingError::ZeroDeterminant { segment: i, u });
    }
    Ok(d)
}

fn refine(
    seg: &Segment,
    i: usize,
    (ua, da): (f64, C64),
    (ub, db): (f64, C64),
    depth: u32,
    max_depth: u32,
    count: &mut usize,
) -> Result<f64, WindingError> {
    let jump = (db / da).arg();
    if jump.abs() < JUMP_LIMIT {
        return Ok(jump);
    }
    if depth >= max_depth {
        return Err(WindingError::NonConvergence { segment: i, u: ua, jump });
    }
    let um = 0.5 * (ua + ub);
    let dm = det_at(seg, i, um)?;
    *count += 1;
    Ok(refine(seg, i, (ua, da), (um, dm), depth + 1, max_depth, count)?
        + refine(seg, i, (um, dm), (ub, db), depth + 1, max_depth, count)?)
}

/// Phase change of `det` along one segment, in radians, with sample count.
pub fn segment_phase(seg: &Segment, i: usize, n0: usize, max_depth: u32) -> Result<(f64, usize), WindingError> {
    let n0 = n0.max(2);
    let mut count = n0 + 1;
    let mut prev = (0.0, det_at(seg, i, 0.0)?);
    let mut acc = 0.0;
    for j in 1..=n0 {
        let u = j as f64 / n0 as f64;
        let cur = (u, det_at(seg, i, u)?);
        acc += refine(seg, i, prev, cur, 0, max_depth, &mut count)?;
        prev = cur;
    }
    Ok((acc, count))
}

/// Winding by unwrapping the determinant phase with adaptive bisection until
/// every step turns by less than π/2.
pub fn wind_phase(qb: &QuadrantBoundary, n0: usize, max_depth: u32) -> Result<WindingReport, WindingError> {
    let parts: Vec<(f64, usize)> = qb
        .segments
        .par_iter()
        .enumerate()
        .map(|(i, s)| segment_phase(s, i, n0, max_depth))
        .collect::<Result<_, _>>()?;
    let per_segment = parts.iter().map(|(phase, _)| -phase / (2.0 * PI)).collect();
    Ok(WindingReport::from_segments(per_segment, 0, parts.iter().map(|p| p.1).sum()))
}

/// Differentiable unitary loop on a compact parameter interval.
pub trait UnitaryLoop: Sync {
    fn domain(&self) -> (f64, f64);
    fn value(&self, t: f64) -> CMat;

    /// Exact derivative when known; the integrators fall back to central
    /// differences otherwise.
    fn derivative(&self, _t: f64) -> Option<CMat> {
        None
    }

    /// Panel decomposition for Gauss–Legendre together with the value of
    /// the excised part of the normalized integral, for loops whose
    /// integrand oscillates too fast for plain doubling.
    fn panels(&self, _p: u32, _tail_tol: f64) -> Option<Result<(Vec<(f64, f64)>, f64), WindingError>> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    /// stop when successive Richardson estimates differ by less than this
    pub tol: f64,
    pub n_start: usize,
    pub n_max: usize,
    /// Gauss–Legendre order used on panels
    pub gauss_order: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { tol: 1e-8, n_start: 64, n_max: 1 << 20, gauss_order: 10 }
    }
}

/// `tr[i (1 − Γ)^p Γ* Γ′]`
fn integrand(g: &CMat, dg: &CMat, p: u32) -> C64 {
    let n = g.nrows();
    let mut m = g.adjoint() * dg;
    if p > 0 {
        let one_minus = CMat::identity(n, n) - g;
        for _ in 0..p {
            m = &one_minus * m;
        }
    }
    I * m.trace()
}

fn eval_integrand<L: UnitaryLoop + ?Sized>(lp: &L, t: f64, h: f64, p: u32) -> C64 {
    let g = lp.value(t);
    let dg = lp.derivative(t).unwrap_or_else(|| (lp.value(t + h) - lp.value(t - h)) / C64::new(2.0 * h, 0.0));
    integrand(&g, &dg, p)
}

fn midpoint<L: UnitaryLoop + ?Sized>(lp: &L, p: u32, n: usize) -> C64 {
    let (a, b) = lp.domain();
    let dt = (b - a) / n as f64;
    let h = dt / 8.0;
    let sum: C64 = (0..n)
        .into_par_iter()
        .map(|j| eval_integrand(lp, a + (j as f64 + 0.5) * dt, h, p))
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    sum * dt
}

/// `(1/2π) ∫ tr[i (1 − Γ)^p Γ* Γ′] dt`, the real part of which is returned.
pub fn wind_regularized<L: UnitaryLoop + ?Sized>(lp: &L, p: u32, quad: &QuadratureSpec) -> Result<f64, WindingError> {
    if let Some(panels) = lp.panels(p, quad.tol) {
        let (panels, tail) = panels?;
        let (nodes, weights) = gauss_legendre(quad.gauss_order);
        let sum: C64 = panels
            .par_iter()
            .map(|&(a, b)| {
                let c = 0.5 * (a + b);
                let r = 0.5 * (b - a);
                let h = r / 8.0;
                nodes.iter().zip(&weights).map(|(x, w)| *w * r * eval_integrand(lp, c + r * x, h, p)).sum::<C64>()
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        return Ok(sum.re / (2.0 * PI) + tail);
    }
    let mut n = quad.n_start.max(2);
    let mut coarse = midpoint(lp, p, n);
    let mut prev_rich: Option<C64> = None;
    loop {
        n *= 2;
        let fine = midpoint(lp, p, n);
        let rich = (fine * 4.0 - coarse) / 3.0;
        if let Some(pr) = prev_rich {
            let change = (rich - pr).norm() / (2.0 * PI);
            if change < quad.tol {
                return Ok(rich.re / (2.0 * PI));
            }
            if n >= quad.n_max {
                return Err(WindingError::QuadratureStalled { tol: quad.tol, change });
            }
        }
        prev_rich = Some(rich);
        coarse = fine;
    }
}

/// `(1/2π) ∫ tr[i Γ* Γ′] dt`, the unregularized integral.
pub fn wind_analytic<L: UnitaryLoop + ?Sized>(lp: &L, quad: &QuadratureSpec) -> Result<f64, WindingError> {
    wind_regularized(lp, 0, quad)
}

/// One boundary segment seen as a loop over its traversal coordinate.
pub struct SegmentLoop<'a>(pub &'a Segment);

impl UnitaryLoop for SegmentLoop<'_> {
    fn domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
    fn value(&self, t: f64) -> CMat {
        self.0.at(t)
    }
}

/// Regularized winding of a whole boundary, segment by segment.
pub fn wind_regularized_boundary(qb: &QuadrantBoundary, p: u32, quad: &QuadratureSpec) -> Result<WindingReport, WindingError> {
    let per_segment =
        qb.segments.iter().map(|s| wind_regularized(&SegmentLoop(s), p, quad)).collect::<Result<Vec<_>, _>>()?;
    Ok(WindingReport::from_segments(per_segment, p, 0))
}

/// `θ ↦ e^{−imθ}` on `[0, 2π]`.
#[derive(Debug, Clone, Copy)]
pub struct ZetaLoop(pub i64);

impl UnitaryLoop for ZetaLoop {
    fn domain(&self) -> (f64, f64) {
        (0.0, 2.0 * PI)
    }
    fn value(&self, t: f64) -> CMat {
        crate::boundary::scalar(C64::from_polar(1.0, -(self.0 as f64) * t))
    }
    fn derivative(&self, t: f64) -> Option<CMat> {
        let m = self.0 as f64;
        Some(crate::boundary::scalar(-I * m * C64::from_polar(1.0, -m * t)))
    }
}

impl ZetaLoop {
    pub fn boundary(&self) -> QuadrantBoundary {
        let l = *self;
        QuadrantBoundary::closed_loop(0.0, 2.0 * PI, move |t| l.value(t))
    }
}

/// The loop `Γ(t) = e^{−2πi φ(t/2π)}` on `[0, 2π]` with
/// `φ(x) = x^a sin(π x^{−b} / 2)`, continuous but not differentiable at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiABLoop {
    pub a: f64,
    pub b: f64,
}

impl PhiABLoop {
    pub fn new(a: f64, b: f64) -> Option<Self> {
        (a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()).then_some(PhiABLoop { a, b })
    }

    pub fn phi(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            x.powf(self.a) * (PI * x.powf(-self.b) / 2.0).sin()
        }
    }

    pub fn dphi(&self, x: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        let arg = PI * x.powf(-b) / 2.0;
        a * x.powf(a - 1.0) * arg.sin() - (b * PI / 2.0) * x.powf(a - b - 1.0) * arg.cos()
    }

    /// Smallest p with (p + 1) a > b.
    pub fn minimal_p(&self) -> u32 {
        let mut p = 0;
        while (p as f64 + 1.0) * self.a <= self.b {
            p += 1;
        }
        p
    }

    pub fn boundary(&self) -> QuadrantBoundary {
        let l = *self;
        QuadrantBoundary::closed_loop(0.0, 2.0 * PI, move |t| l.value(t))
    }
}

impl UnitaryLoop for PhiABLoop {
    fn domain(&self) -> (f64, f64) {
        (0.0, 2.0 * PI)
    }

    fn value(&self, t: f64) -> CMat {
        crate::boundary::scalar(C64::from_polar(1.0, -2.0 * PI * self.phi(t / (2.0 * PI))))
    }

    fn derivative(&self, t: f64) -> Option<CMat> {
        let x = t / (2.0 * PI);
        if x <= 0.0 {
            return None;
        }
        let g = C64::from_polar(1.0, -2.0 * PI * self.phi(x));
        Some(crate::boundary::scalar(-I * self.dphi(x) * g))
    }

    // Quarter-period panels between the points where x^{−b} is an integer,
    // cut off at x = ε. On [0, ε] the normalized integrand is the exact
    // differential (1 − e^{−2πiψ})^p dψ with ψ = φ(x), so the excised piece is
    // added in closed form. Its size, at most (2π)^p ε^{(p+1)a} / (p + 1),
    // only sets where the cut goes.
    fn panels(&self, p: u32, _tail_tol: f64) -> Option<Result<(Vec<(f64, f64)>, f64), WindingError>> {
        if (p as f64 + 1.0) * self.a <= self.b {
            return Some(Err(WindingError::NotIntegrable { p }));
        }
        let pf = p as f64;
        let bound = |eps: f64| (2.0 * PI).powf(pf) * eps.powf((pf + 1.0) * self.a) / (pf + 1.0);
        let target = 1e-3;
        let mut n_max = 64usize;
        while bound((n_max as f64).powf(-1.0 / self.b)) > target && n_max < 1 << 20 {
            n_max *= 2;
        }
        let xs = |n: usize| (n as f64).powf(-1.0 / self.b) * 2.0 * PI;
        // φ moves by at most x^a across a panel and the integrand carries
        // frequencies up to p + 1 in φ, so split wide panels to keep a few
        // Gauss nodes per oscillation.
        let mut panels = Vec::new();
        for n in 1..n_max {
            let (lo, hi) = (xs(n + 1), xs(n));
            let m = 1 + (2.0 * (pf + 1.0) * (hi / (2.0 * PI)).powf(self.a)).ceil() as usize;
            let w = (hi - lo) / m as f64;
            panels.extend((0..m).map(|j| (lo + j as f64 * w, lo + (j + 1) as f64 * w)));
        }
        Some(Ok((panels, phi_power_integral(p, self.phi((n_max as f64).powf(-1.0 / self.b))))))
    }
}

/// `Re ∫_0^Φ (1 − e^{−2πiψ})^p dψ` by binomial expansion.
fn phi_power_integral(p: u32, big_phi: f64) -> f64 {
    let mut binom = 1.0;
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..=p {
        let kf = k as f64;
        let term = if k == 0 {
            C64::new(big_phi, 0.0)
        } else {
            (1.0 - C64::from_polar(1.0, -2.0 * PI * kf * big_phi)) / (2.0 * PI * kf * I)
        };
        acc += binom * term;
        binom *= -((p - k) as f64) / (kf + 1.0);
    }
    acc.re
}

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n <= 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Regularized determinant `Π_j e^{iθ_j} exp(Σ_{k<p} (−1)^k (e^{iθ_j} − 1)^k / k)`
/// over the eigenvalues of `gamma`.
pub fn det_p(gamma: &CMat, p: u32) -> C64 {
    let eig = gamma.clone().schur().eigenvalues().expect("square matrix");
    eig.iter()
        .map(|&z| {
            let mut s = C64::new(0.0, 0.0);
            let mut pow = C64::new(1.0, 0.0);
            for k in 1..p {
                pow *= z - 1.0;
                let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
                s += pow * (sign / k as f64);
            }
            z * s.exp()
        })
        .product()
}

/// `det(Γ exp(Σ_{k<p} (−1)^k (Γ − 1)^k / k))` from matrix powers, using
/// `det e^S = e^{tr S}`.
pub fn det_p_direct(gamma: &CMat, p: u32) -> C64 {
    let n = gamma.nrows();
    let a = gamma - CMat::identity(n, n);
    let mut s = CMat::zeros(n, n);
    let mut pow = CMat::identity(n, n);
    for k in 1..p {
        pow = &pow * &a;
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        s += &pow * C64::new(sign / k as f64, 0.0);
    }
    gamma.determinant() * s.trace().exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{diag2, identity};

    #[test]
    fn sign_anchor_zeta() {
        for m in -3..=3 {
            let r = wind_phase(&ZetaLoop(m).boundary(), 64, 20).unwrap();
            assert!((r.total - m as f64).abs() < 1e-12, "m = {m}: {}", r.total);
            let a = wind_analytic(&ZetaLoop(m), &QuadratureSpec::default()).unwrap();
            assert!((a - m as f64).abs() < 1e-9, "m = {m}: {a}");
        }
    }

    #[test]
    fn identity_has_no_winding() {
        let r = wind_phase(&QuadrantBoundary::constant(identity(2)), 8, 4).unwrap();
        assert_eq!(r.per_segment, vec![0.0; 4]);
        assert_eq!(r.total, 0.0);
    }

    #[test]
    fn zeta_one_regularized_p1() {
        // (1/2π)∫(1 − e^{−iθ}) dθ = 1
        let w = wind_regularized(&ZetaLoop(1), 1, &QuadratureSpec::default()).unwrap();
        assert!((w - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unwrapping_gives_up_on_jumps() {
        // a loop that jumps by π at t = 1: undersampling cannot fix it
        let qb = QuadrantBoundary::closed_loop(0.0, 2.0, |t| {
            crate::boundary::scalar(if t < 1.0 { C64::new(1.0, 0.0) } else { C64::new(-1.0, 0.0) })
        });
        assert!(matches!(wind_phase(&qb, 5, 6), Err(WindingError::NonConvergence { .. })));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn phi_loop_basics() {
        let l = PhiABLoop::new(2.0, 1.0).unwrap();
        assert_eq!(l.value(0.0)[(0, 0)], C64::new(1.0, 0.0));
        assert!((l.value(2.0 * PI)[(0, 0)] - 1.0).norm() < 1e-12);
        assert_eq!(l.minimal_p(), 0);
        assert_eq!(PhiABLoop::new(1.0, 2.0).unwrap().minimal_p(), 2);
        assert_eq!(PhiABLoop::new(1.0, 3.0).unwrap().minimal_p(), 3);
        assert!(PhiABLoop::new(0.0, 1.0).is_none());
        // exact derivative against a difference quotient
        let t = 1.3;
        let h = 1e-6;
        let fd = (l.value(t + h) - l.value(t - h)) / C64::new(2.0 * h, 0.0);
        assert!((fd - l.derivative(t).unwrap()).norm() < 1e-7);
    }

    #[test]
    fn phi_loop_rejects_non_integrable_order() {
        let l = PhiABLoop::new(1.0, 2.0).unwrap();
        let r = wind_regularized(&l, 1, &QuadratureSpec::default());
        assert!(matches!(r, Err(WindingError::NotIntegrable { p: 1 })));
    }

    #[test]
    fn det_p_trivial_cases() {
        let g = diag2(C64::new(0.0, 1.0), C64::new(-1.0, 0.0));
        assert!((det_p(&g, 1) - g.determinant()).norm() < 1e-15);
        assert!((det_p(&identity(3), 4) - 1.0).norm() < 1e-15);
        for p in 1..5 {
            let (a, b) = (det_p(&g, p), det_p_direct(&g, p));
            assert!((a - b).norm() < 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn smooth_matrix_loop_methods_agree() {
        // V(t) diag(e^{−2it}, e^{it}) V(t)* with a rotating V
        struct L;
        impl UnitaryLoop for L {
            fn domain(&self) -> (f64, f64) {
                (0.0, 2.0 * PI)
            }
            fn value(&self, t: f64) -> CMat {
                let (c, s) = (t.cos(), t.sin());
                let v = CMat::from_row_slice(2, 2, &[c.into(), (-s).into(), s.into(), c.into()]);
                &v * diag2(C64::from_polar(1.0, -2.0 * t), C64::from_polar(1.0, t)) * v.adjoint()
            }
        }
        let a = wind_analytic(&L, &QuadratureSpec::default()).unwrap();
        let qb = QuadrantBoundary::closed_loop(0.0, 2.0 * PI, |t| L.value(t));
        let ph = wind_phase(&qb, 64, 20).unwrap().total;
        assert!((a - ph).abs() < 1e-6, "{a} vs {ph}");
        assert!((ph - 1.0).abs() < 1e-12);
    }
}
