//! Point interactions: the half-line Robin model, δ and δ′ on the line, and
//! the one-parameter families in dimensions 2 and 3.

use crate::boundary::{diag2, identity, scalar, CMat, Chart, EdgeId, Orientation, QuadrantBoundary, Segment};
use crate::specialfn::{digamma, tanh_sech_arc, threshold_fn, ExtReal, ThresholdFunctionKind, C64, I};
use crate::winding::{wind_phase, WindingError, WindingReport, DEFAULT_MAX_DEPTH, DEFAULT_N0};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointModelKind {
    /// −d²/dx² on the half-line with f′(0) = α f(0)
    BabyHalfLine,
    Delta1D,
    DeltaPrime1D,
    Point2D,
    Point3D,
}

impl PointModelKind {
    pub const ALL: [PointModelKind; 5] = [
        PointModelKind::BabyHalfLine,
        PointModelKind::Delta1D,
        PointModelKind::DeltaPrime1D,
        PointModelKind::Point2D,
        PointModelKind::Point3D,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PointModelKind::BabyHalfLine => "baby",
            PointModelKind::Delta1D => "delta1d",
            PointModelKind::DeltaPrime1D => "deltaprime1d",
            PointModelKind::Point2D => "point2d",
            PointModelKind::Point3D => "point3d",
        }
    }
}

impl fmt::Display for PointModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PointModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PointModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown point model '{s}' (expected baby, delta1d, deltaprime1d, point2d or point3d)"))
    }
}

/// A model with its coupling: α for all kinds except δ′, where it is β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointModel {
    pub kind: PointModelKind,
    pub coupling: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevinsonCheck {
    pub winding: WindingReport,
    pub bound_states: usize,
    pub residual: f64,
    pub pass: bool,
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// c_2D = 2πα − Ψ(1) − ln 2
fn offset_2d(alpha: f64) -> f64 {
    2.0 * PI * alpha - digamma(1.0).expect("Ψ(1)") - 2f64.ln()
}

/// Scalar scattering phase of the model at energy λ.
pub fn s_scalar(model: PointModel, lambda: f64) -> C64 {
    let a = model.coupling;
    let k = lambda.max(0.0).sqrt();
    if lambda.is_infinite() {
        return match model.kind {
            PointModelKind::BabyHalfLine | PointModelKind::Point3D => c(-1.0),
            PointModelKind::Delta1D | PointModelKind::Point2D => c(1.0),
            PointModelKind::DeltaPrime1D => {
                if a == 0.0 {
                    c(1.0)
                } else {
                    c(-1.0)
                }
            }
        };
    }
    match model.kind {
        PointModelKind::BabyHalfLine => {
            if a == 0.0 {
                c(-1.0)
            } else {
                (a + I * k) / (a - I * k)
            }
        }
        PointModelKind::Delta1D => {
            if a == 0.0 {
                c(1.0)
            } else {
                (2.0 * k - I * a) / (2.0 * k + I * a)
            }
        }
        PointModelKind::DeltaPrime1D => (2.0 + I * a * k) / (2.0 - I * a * k),
        PointModelKind::Point2D => {
            if lambda == 0.0 {
                return c(1.0);
            }
            let z = offset_2d(a) + k.ln();
            (z + I * (PI / 2.0)) / (z - I * (PI / 2.0))
        }
        PointModelKind::Point3D => {
            if a == 0.0 {
                c(-1.0)
            } else {
                (4.0 * PI * a + I * k) / (4.0 * PI * a - I * k)
            }
        }
    }
}

/// Scattering matrix; the line models are given in the 2×2 even/odd form.
pub fn smatrix(model: PointModel, lambda: f64) -> CMat {
    let s = s_scalar(model, lambda);
    match model.kind {
        PointModelKind::Delta1D => diag2(s, c(1.0)),
        PointModelKind::DeltaPrime1D => diag2(c(1.0), s),
        _ => scalar(s),
    }
}

/// Energy at which the 2D phase passes through −1.
pub fn point2d_crossing_energy(alpha: f64) -> f64 {
    (-2.0 * offset_2d(alpha)).exp()
}

/// Energy around which the phase of S turns; the chart is centred there so
/// that sampling resolves the turn at any coupling.
fn energy_scale(model: PointModel) -> f64 {
    let a = model.coupling;
    let scale = match model.kind {
        PointModelKind::BabyHalfLine => a * a,
        PointModelKind::Delta1D => a * a / 4.0,
        PointModelKind::DeltaPrime1D => 4.0 / (a * a),
        PointModelKind::Point2D => point2d_crossing_energy(a),
        PointModelKind::Point3D => (4.0 * PI * a).powi(2),
    };
    if scale.is_finite() && scale > 0.0 {
        scale
    } else {
        1.0
    }
}

/// 1 + ½ f(y) (s − 1) for the threshold function f.
fn threshold_block(kind: ThresholdFunctionKind, y: ExtReal, s: C64) -> C64 {
    c(1.0) + threshold_fn(kind, y) * (s - 1.0)
}

fn line_segment(edge: EdgeId, f: impl Fn(ExtReal) -> CMat + Send + Sync + 'static) -> Segment {
    let ends = (f(ExtReal::NegInf), f(ExtReal::PosInf));
    Segment::new(edge, Chart::Line, Orientation::Forward, ends, move |x| f(ExtReal::Finite(x)))
}

pub fn gamma_boundary(model: PointModel) -> QuadrantBoundary {
    let a = model.coupling;
    let kind = model.kind;
    let dim = if matches!(kind, PointModelKind::Delta1D | PointModelKind::DeltaPrime1D) { 2 } else { 1 };
    let s_lo = smatrix(model, 0.0);
    let s_hi = smatrix(model, f64::INFINITY);
    let g2 = Segment::new(EdgeId::B2, Chart::ScaledLogHalfLine { scale: energy_scale(model) }, Orientation::Forward, (s_lo, s_hi), move |l| {
        smatrix(model, l)
    });
    let constant = |edge| Segment::constant(edge, Chart::HalfLine, Orientation::Forward, identity(dim));
    let arc = |edge| line_segment(edge, |y| scalar(tanh_sech_arc(y)));
    let one_line = |edge| Segment::constant(edge, Chart::Line, Orientation::Forward, identity(dim));

    let (g1, g3) = match kind {
        PointModelKind::BabyHalfLine | PointModelKind::Point3D => {
            if a == 0.0 {
                (arc(EdgeId::B1), arc(EdgeId::B3))
            } else {
                (one_line(EdgeId::B1), arc(EdgeId::B3))
            }
        }
        PointModelKind::Point2D => (one_line(EdgeId::B1), one_line(EdgeId::B3)),
        PointModelKind::Delta1D => {
            let s0 = s_scalar(model, 0.0);
            let sinf = s_scalar(model, f64::INFINITY);
            let k = ThresholdFunctionKind::PlusTanhPlusISech;
            (
                line_segment(EdgeId::B1, move |y| diag2(threshold_block(k, y, s0), c(1.0))),
                line_segment(EdgeId::B3, move |y| diag2(threshold_block(k, y, sinf), c(1.0))),
            )
        }
        PointModelKind::DeltaPrime1D => {
            let s0 = s_scalar(model, 0.0);
            let sinf = s_scalar(model, f64::INFINITY);
            let k = ThresholdFunctionKind::PlusTanhMinusISech;
            (
                line_segment(EdgeId::B1, move |y| diag2(c(1.0), threshold_block(k, y, s0))),
                line_segment(EdgeId::B3, move |y| diag2(c(1.0), threshold_block(k, y, sinf))),
            )
        }
    };
    QuadrantBoundary::quadruple(g1, g2, g3, constant(EdgeId::B4)).expect("point-model quadruple")
}

pub fn bound_state_count(model: PointModel) -> usize {
    match model.kind {
        PointModelKind::Point2D => 1,
        _ => usize::from(model.coupling < 0.0),
    }
}

pub fn levinson_verify(model: PointModel, tol: f64) -> Result<LevinsonCheck, WindingError> {
    let winding = wind_phase(&gamma_boundary(model), DEFAULT_N0, DEFAULT_MAX_DEPTH)?;
    let bound_states = bound_state_count(model);
    let residual = (winding.total - bound_states as f64).abs();
    Ok(LevinsonCheck { winding, bound_states, residual, pass: residual < tol })
}

/// The coupling grid used by the sweeps.
pub const COUPLING_GRID: [f64; 7] = [-3.0, -1.0, -0.1, 0.0, 0.1, 1.0, 3.0];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{corner_mismatch, unitarity_defect};

    fn m(kind: PointModelKind, coupling: f64) -> PointModel {
        PointModel { kind, coupling }
    }

    #[test]
    fn closed_forms() {
        let s = s_scalar(m(PointModelKind::BabyHalfLine, 1.0), 1.0);
        assert!((s - I).norm() < 1e-15);
        assert!((s_scalar(m(PointModelKind::Point3D, 2.0), 1e-20) - 1.0).norm() < 1e-9);
        for a in [-3.0, 0.0, 1.0, 3.0] {
            let mm = m(PointModelKind::Point2D, a);
            let l = point2d_crossing_energy(a);
            assert!((s_scalar(mm, l) + 1.0).norm() < 1e-12, "α = {a}");
        }
    }

    #[test]
    fn exceptional_quadruples() {
        let qb = gamma_boundary(m(PointModelKind::Delta1D, 0.0));
        for seg in &qb.segments {
            for u in [0.0, 0.3, 0.7, 1.0] {
                assert!((seg.at(u) - identity(2)).norm() < 1e-15);
            }
        }
        let qb = gamma_boundary(m(PointModelKind::BabyHalfLine, 0.0));
        assert!((qb.segments[1].at(0.4)[(0, 0)] + 1.0).norm() < 1e-15);
        assert!(corner_mismatch(&qb) < 1e-10);
    }

    #[test]
    fn corners_and_unitarity() {
        for kind in PointModelKind::ALL {
            for a in COUPLING_GRID {
                let qb = gamma_boundary(m(kind, a));
                assert!(corner_mismatch(&qb) < 1e-10, "{kind} {a}");
                for seg in &qb.segments {
                    for j in 0..=40 {
                        let u = j as f64 / 40.0;
                        assert!(unitarity_defect(&seg.at(u)) < 1e-12, "{kind} {a} {:?} {u}", seg.edge);
                    }
                }
            }
        }
    }

    #[test]
    fn baby_table() {
        let expect = [(-1.0, [0.0, 0.5, 0.5, 0.0], 1), (0.0, [-0.5, 0.0, 0.5, 0.0], 0), (1.0, [0.0, -0.5, 0.5, 0.0], 0)];
        for (a, w, n) in expect {
            let r = levinson_verify(m(PointModelKind::BabyHalfLine, a), 1e-6).unwrap();
            for (got, want) in r.winding.per_segment.iter().zip(w) {
                assert!((got - want).abs() < 1e-9, "α = {a}: {:?}", r.winding.per_segment);
            }
            assert_eq!(r.bound_states, n);
            assert!(r.pass);
        }
    }

    #[test]
    fn every_model_on_the_grid() {
        for kind in PointModelKind::ALL {
            for a in COUPLING_GRID {
                let r = levinson_verify(m(kind, a), 1e-3).unwrap();
                assert!(r.pass, "{kind} {a}: {:?} vs {}", r.winding.per_segment, r.bound_states);
                assert_eq!(r.winding.per_segment[3], 0.0);
            }
        }
    }

    #[test]
    fn counts() {
        assert_eq!(bound_state_count(m(PointModelKind::BabyHalfLine, -2.0)), 1);
        assert_eq!(bound_state_count(m(PointModelKind::Point2D, 5.0)), 1);
        assert_eq!(bound_state_count(m(PointModelKind::DeltaPrime1D, 0.7)), 0);
    }

    #[test]
    fn parse_names() {
        for k in PointModelKind::ALL {
            assert_eq!(k.name().parse::<PointModelKind>().unwrap(), k);
        }
        assert!("nope".parse::<PointModelKind>().is_err());
    }
}
