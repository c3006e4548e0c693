//! Degree-three pairing for the sphere of Aharonov–Bohm extensions
//! `U = V diag(λ₁, λ₂) V*`: numerical integral of
//! `(1/24π²) tr[G* dG ∧ dG* ∧ dG]` over X × □, and the Chern number of the
//! bound-state eigenprojection for comparison.

use crate::aharonov_bohm::{AbBoundaryFns, AbError, AdmissiblePair, M2};
use crate::boundary::CMat;
use crate::specialfn::{C64, I};
use crate::winding::{gauss_legendre, UnitaryLoop};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ChernError {
    #[error("need |λ₁| = |λ₂| = 1 and Im λ₁ < 0 < Im λ₂")]
    BadEigenvalues,
    #[error("grid sizes must be at least 4 and fd_step in (0, 1/4]")]
    BadGrid,
    #[error("ladder did not settle: last change {change:e} > {tol:e}")]
    NonConvergence { change: f64, tol: f64, ladder: Vec<LadderStep> },
    #[error(transparent)]
    Ab(#[from] AbError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereManifold {
    pub lambda1: C64,
    pub lambda2: C64,
}

impl SphereManifold {
    pub fn new(lambda1: C64, lambda2: C64) -> Result<Self, ChernError> {
        let unimodular = |z: C64| (z.norm() - 1.0).abs() < 1e-12;
        if !unimodular(lambda1) || !unimodular(lambda2) || lambda1.im >= 0.0 || lambda2.im <= 0.0 {
            return Err(ChernError::BadEigenvalues);
        }
        Ok(SphereManifold { lambda1, lambda2 })
    }

    /// `λ₁ = e^{−iπ/3}`, `λ₂ = e^{iπ/3}`.
    pub fn standard() -> Self {
        SphereManifold { lambda1: C64::from_polar(1.0, -PI / 3.0), lambda2: C64::from_polar(1.0, PI / 3.0) }
    }
}

pub fn u_of(rho: f64, phi: f64, x: &SphereManifold) -> M2 {
    let (l1, l2) = (x.lambda1, x.lambda2);
    let r2 = rho * rho;
    let off = rho * (1.0 - r2).max(0.0).sqrt() * (l1 - l2);
    M2::new(
        l1 * r2 + l2 * (1.0 - r2),
        off * C64::from_polar(1.0, phi),
        off * C64::from_polar(1.0, -phi),
        l1 * (1.0 - r2) + l2 * r2,
    )
}

/// A point of □: segment index 0..4 (B1, B2, B3, B4) and traversal position
/// `u ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquarePoint {
    pub segment: usize,
    pub u: f64,
}

fn boundary_fns(rho: f64, phi: f64, alpha: f64, x: &SphereManifold) -> Result<AbBoundaryFns, AbError> {
    AbBoundaryFns::new(&AdmissiblePair::from_unitary(&u_of(rho, phi, x))?, alpha)
}

/// `Γ^{U(ρ,φ),α}(ξ)`
pub fn gmap(rho: f64, phi: f64, xi: SquarePoint, alpha: f64, x: &SphereManifold) -> Result<M2, AbError> {
    boundary_fns(rho, phi, alpha, x)?.at(xi.segment, xi.u)
}

/// `c_{2k} = 1/((2πi)^k k!)`,
/// `c_{2k+1} = 1/(2πi)^{k+1} · 2^{−(2k+1)} / ((k+½)(k−½)⋯½)`.
pub fn connes_constant(n: u32) -> C64 {
    let tpi = C64::new(0.0, 2.0 * PI);
    let k = (n / 2) as i32;
    if n.is_multiple_of(2) {
        let fact: f64 = (1..=k).map(f64::from).product();
        1.0 / (tpi.powi(k) * fact)
    } else {
        let half_fact: f64 = (0..=k).map(|j| f64::from(j) + 0.5).product();
        1.0 / (tpi.powi(k + 1) * 2f64.powi(2 * k + 1) * half_fact)
    }
}

/// Degree-one pairing `c₁ ∫ tr[u* du]` of a loop; equals minus its winding.
pub fn pairing_degree1<L: UnitaryLoop + ?Sized>(lp: &L, panels: usize) -> f64 {
    let (a, b) = lp.domain();
    let (nodes, weights) = gauss_legendre(10);
    let w = (b - a) / panels as f64;
    let mut sum = C64::new(0.0, 0.0);
    for j in 0..panels {
        let c = a + (j as f64 + 0.5) * w;
        for (x, wt) in nodes.iter().zip(&weights) {
            let t = c + 0.5 * w * x;
            let h = w * 1e-4;
            let g = lp.value(t);
            let dg = lp.derivative(t).unwrap_or_else(|| (lp.value(t + h) - lp.value(t - h)) / C64::new(2.0 * h, 0.0));
            sum += (g.adjoint() * dg).trace() * (0.5 * w * wt);
        }
    }
    (connes_constant(1) * sum).re
}

/// Order of the coordinates taken as positively oriented on X.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum XOrientation {
    /// (ρ, φ): the chart order; the bound-state bundle has Chern number −1 here
    RhoPhi,
    /// (φ, ρ): the orientation in which the bound-state bundle has Chern number +1
    #[default]
    PhiRho,
}

impl XOrientation {
    pub fn sign(self) -> f64 {
        match self {
            XOrientation::RhoPhi => 1.0,
            XOrientation::PhiRho => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec3D {
    pub n_rho: usize,
    pub n_phi: usize,
    /// midpoints per boundary segment
    pub n_xi: usize,
    /// inner step of the five-point difference stencil as a fraction of the
    /// local spacing; the outer points sit at twice this
    pub fd_step: f64,
}

impl GridSpec3D {
    pub fn new(n_rho: usize, n_phi: usize, n_xi: usize) -> Self {
        GridSpec3D { n_rho, n_phi, n_xi, fd_step: 0.25 }
    }

    pub fn doubled(&self) -> Self {
        GridSpec3D { n_rho: 2 * self.n_rho, n_phi: 2 * self.n_phi, n_xi: 2 * self.n_xi, fd_step: self.fd_step }
    }

    fn validate(&self) -> Result<(), ChernError> {
        if self.n_rho < 4 || self.n_phi < 4 || self.n_xi < 4 || !(self.fd_step > 0.0 && self.fd_step <= 0.25) {
            return Err(ChernError::BadGrid);
        }
        Ok(())
    }
}

/// `Σ_σ sgn(σ) tr[G* ∂_{σ1}G ∂_{σ2}G* ∂_{σ3}G]` for the coordinate order of `d`.
pub fn three_form_density(g: &M2, d: &[M2; 3]) -> C64 {
    const PERMS: [([usize; 3], f64); 6] =
        [([0, 1, 2], 1.0), ([1, 2, 0], 1.0), ([2, 0, 1], 1.0), ([0, 2, 1], -1.0), ([2, 1, 0], -1.0), ([1, 0, 2], -1.0)];
    let gs = g.adjoint();
    PERMS.iter().map(|&(p, s)| (gs * d[p[0]] * d[p[1]].adjoint() * d[p[2]]).trace() * s).sum()
}

/// Fourth-order central difference from values at `+2e, +e, −e, −2e`.
fn stencil(f: [M2; 4], e: f64) -> M2 {
    ((f[1] - f[2]) * C64::new(8.0, 0.0) - f[0] + f[3]) / C64::new(12.0 * e, 0.0)
}

/// The restriction of a map to one point of X, as a function on □.
pub type SquareMap = Box<dyn Fn(usize, f64) -> Result<M2, AbError>>;

/// `(1/24π²) ∫ tr[G* dG ∧ dG* ∧ dG]` for a map on [0,1] × [0,2π] × □
/// given as a closure, with (ρ, φ, ξ) right-handed. The grid is uniform in
/// θ = arcsin ρ, where the map is smooth up to ρ = 1. Only the first three
/// segments are integrated; callers guarantee the map is constant on B4.
pub fn three_form_integral_of<F>(g: F, grid: &GridSpec3D) -> Result<f64, ChernError>
where
    F: Fn(f64, f64) -> Result<SquareMap, AbError> + Sync,
{
    grid.validate()?;
    let (hr, hp, hx) = (0.5 * PI / grid.n_rho as f64, 2.0 * PI / grid.n_phi as f64, 1.0 / grid.n_xi as f64);
    let (er, ep, ex) = (grid.fd_step * hr, grid.fd_step * hp, grid.fd_step * hx);
    let cells: Vec<(usize, usize)> = (0..grid.n_rho).flat_map(|i| (0..grid.n_phi).map(move |j| (i, j))).collect();
    let partial: Vec<C64> = cells
        .par_iter()
        .map(|&(i, j)| -> Result<C64, AbError> {
            let th = (i as f64 + 0.5) * hr;
            let phi = (j as f64 + 0.5) * hp;
            let rho = th.sin();
            let c = g(rho, phi)?;
            let gt = |dt: f64| g((th + dt).sin(), phi);
            let rs = [gt(2.0 * er)?, gt(er)?, gt(-er)?, gt(-2.0 * er)?];
            let ps = [g(rho, phi + 2.0 * ep)?, g(rho, phi + ep)?, g(rho, phi - ep)?, g(rho, phi - 2.0 * ep)?];
            let mut acc = C64::new(0.0, 0.0);
            for seg in 0..3 {
                for k in 0..grid.n_xi {
                    let u = (k as f64 + 0.5) * hx;
                    let g0 = c(seg, u)?;
                    let at = |f: &SquareMap| f(seg, u);
                    let d = [
                        stencil([at(&rs[0])?, at(&rs[1])?, at(&rs[2])?, at(&rs[3])?], er),
                        stencil([at(&ps[0])?, at(&ps[1])?, at(&ps[2])?, at(&ps[3])?], ep),
                        stencil([c(seg, u + 2.0 * ex)?, c(seg, u + ex)?, c(seg, u - ex)?, c(seg, u - 2.0 * ex)?], ex),
                    ];
                    acc += three_form_density(&g0, &d);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_, _>>()?;
    // fixed reduction order
    let total: C64 = partial.into_iter().sum();
    Ok(total.re * hr * hp * hx / (24.0 * PI * PI))
}

/// The integral over X × □ for the Aharonov–Bohm family at fixed α, in the
/// chart orientation (ρ, φ, ξ).
pub fn three_form_integral_raw(x: &SphereManifold, alpha: f64, grid: &GridSpec3D) -> Result<f64, ChernError> {
    three_form_integral_of(
        |rho, phi| {
            let f = boundary_fns(rho, phi, alpha, x)?;
            Ok(Box::new(move |seg, u| f.at(seg, u)) as SquareMap)
        },
        grid,
    )
}

pub fn three_form_integral(
    x: &SphereManifold,
    alpha: f64,
    grid: &GridSpec3D,
    orientation: XOrientation,
) -> Result<f64, ChernError> {
    Ok(orientation.sign() * three_form_integral_raw(x, alpha, grid)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderStep {
    pub grid: GridSpec3D,
    pub value: f64,
    pub change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernRun {
    pub manifold: SphereManifold,
    pub alpha: f64,
    pub orientation: XOrientation,
    pub ladder: Vec<LadderStep>,
    pub value: f64,
    pub raw_rho_phi_xi: f64,
    pub bundle_chern_rho_phi: f64,
}

/// Doubles `start` `levels − 1` times; fails if the last change exceeds `tol`.
pub fn convergence_ladder(
    x: &SphereManifold,
    alpha: f64,
    start: GridSpec3D,
    levels: usize,
    tol: f64,
    orientation: XOrientation,
) -> Result<ChernRun, ChernError> {
    let mut ladder: Vec<LadderStep> = Vec::new();
    let mut grid = start;
    for _ in 0..levels.max(2) {
        let value = three_form_integral(x, alpha, &grid, orientation)?;
        let change = ladder.last().map(|s| (value - s.value).abs());
        ladder.push(LadderStep { grid, value, change });
        grid = grid.doubled();
    }
    let last = *ladder.last().expect("at least two levels");
    let change = last.change.expect("two levels");
    if change > tol {
        return Err(ChernError::NonConvergence { change, tol, ladder });
    }
    Ok(ChernRun {
        manifold: *x,
        alpha,
        orientation,
        value: last.value,
        raw_rho_phi_xi: orientation.sign() * last.value,
        bundle_chern_rho_phi: bound_state_bundle_chern(x, 256, 16),
        ladder,
    })
}

/// Chern number `(i/2π) ∫ tr(P [∂_ρ P, ∂_φ P]) dρ dφ` of the eigenprojection of
/// `U(ρ, φ)` onto λ₁, which spans the negative eigenvalue of `C D*`.
pub fn bound_state_bundle_chern(x: &SphereManifold, n_rho: usize, n_phi: usize) -> f64 {
    let proj = |rho: f64, phi: f64| -> CMat {
        let v = [C64::new(rho, 0.0), C64::from_polar((1.0 - rho * rho).max(0.0).sqrt(), -phi)];
        CMat::from_fn(2, 2, |a, b| v[a] * v[b].conj())
    };
    // the projection only depends on the eigenvectors, but check it is the λ₁ one
    debug_assert!({
        let u = crate::aharonov_bohm::to_cmat(&u_of(0.3, 0.7, x));
        let p = proj(0.3, 0.7);
        (&u * &p - &p * x.lambda1).norm() < 1e-12
    });
    let (hr, hp) = (1.0 / n_rho as f64, 2.0 * PI / n_phi as f64);
    let (er, ep) = (1e-5, 1e-5);
    let mut sum = C64::new(0.0, 0.0);
    for i in 0..n_rho {
        for j in 0..n_phi {
            let (r, f) = ((i as f64 + 0.5) * hr, (j as f64 + 0.5) * hp);
            let p = proj(r, f);
            let dr = (proj(r + er, f) - proj(r - er, f)) / C64::new(2.0 * er, 0.0);
            let dp = (proj(r, f + ep) - proj(r, f - ep)) / C64::new(2.0 * ep, 0.0);
            sum += (&p * (&dr * &dp - &dp * &dr)).trace();
        }
    }
    (I * sum * hr * hp / (2.0 * PI)).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::unitarity_defect;
    use crate::winding::ZetaLoop;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-15
    }

    #[test]
    fn constants() {
        let c1 = 1.0 / C64::new(0.0, 2.0 * PI);
        assert!(close(connes_constant(1), c1));
        assert!(close(connes_constant(2), c1));
        assert!(close(connes_constant(3), C64::new(-1.0 / (24.0 * PI * PI), 0.0)));
        assert!(close(connes_constant(0), C64::new(1.0, 0.0)));
        assert!(close(connes_constant(4), c1 * c1 / 2.0));
    }

    #[test]
    fn u_of_examples() {
        let x = SphereManifold::standard();
        let u0 = u_of(0.0, 1.0, &x);
        assert_eq!((u0[(0, 0)], u0[(1, 1)]), (x.lambda2, x.lambda1));
        let u1 = u_of(1.0, 1.0, &x);
        assert!(close(u1[(0, 0)], x.lambda1) && close(u1[(1, 1)], x.lambda2));
        for (r, f) in [(0.2, 0.1), (0.5, 3.0), (0.9, 6.0)] {
            let u = u_of(r, f, &x);
            let tr = u.trace();
            let det = u.determinant();
            // eigenvalues {λ₁, λ₂} iff trace and determinant agree
            assert!((tr - x.lambda1 - x.lambda2).norm() < 1e-12);
            assert!((det - x.lambda1 * x.lambda2).norm() < 1e-12);
        }
        assert!(SphereManifold::new(x.lambda2, x.lambda1).is_err());
    }

    #[test]
    fn gmap_unitary_and_trivial_on_b4() {
        let x = SphereManifold::standard();
        for (r, f) in [(0.1, 0.2), (0.5, 2.0), (0.95, 5.5)] {
            let b4 = gmap(r, f, SquarePoint { segment: 3, u: 0.4 }, 0.5, &x).unwrap();
            assert_eq!(b4, M2::identity());
            for seg in 0..3 {
                for u in [0.01, 0.3, 0.5, 0.99] {
                    let g = gmap(r, f, SquarePoint { segment: seg, u }, 0.5, &x).unwrap();
                    assert!(unitarity_defect(&crate::aharonov_bohm::to_cmat(&g)) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn every_point_of_x_has_winding_one() {
        let x = SphereManifold::standard();
        for (r, f) in [(0.0, 0.0), (0.3, 1.0), (1.0, 2.0)] {
            let pair = AdmissiblePair::from_unitary(&u_of(r, f, &x)).unwrap();
            let qb = crate::aharonov_bohm::gamma_boundary(&pair, 0.5).unwrap();
            let w = crate::winding::wind_phase(&qb, 256, 20).unwrap();
            assert_eq!(w.rounded(), 1);
            assert!(w.integerness_residual < 1e-6);
        }
    }

    #[test]
    fn pairing_is_minus_winding() {
        for m in -3..=3 {
            assert!((pairing_degree1(&ZetaLoop(m), 16) + m as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_map_integrates_to_zero() {
        let v = three_form_integral_of(
            |_, _| Ok(Box::new(|_, _| Ok(M2::identity() * C64::from_polar(1.0, 0.3))) as SquareMap),
            &GridSpec3D::new(4, 4, 4),
        )
        .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn bundle_chern_is_minus_one_in_chart_order() {
        let c = bound_state_bundle_chern(&SphereManifold::standard(), 256, 16);
        assert!((c + 1.0).abs() < 1e-3, "{c}");
    }

    #[test]
    fn orientation_flip_negates() {
        let x = SphereManifold::standard();
        let g = GridSpec3D::new(4, 4, 8);
        let a = three_form_integral(&x, 0.5, &g, XOrientation::RhoPhi).unwrap();
        let b = three_form_integral(&x, 0.5, &g, XOrientation::PhiRho).unwrap();
        assert_eq!(a, -b);
        assert!(a != 0.0);
    }
}
