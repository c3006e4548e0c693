//! Matrix-valued functions on the boundary of the compactified square
//! `[0, ∞] × [−∞, ∞]`, walked clockwise from the left-down corner.
//!
//! Edges: `B1 = {0} × [−∞, ∞]` (upwards), `B2 = [0, ∞] × {+∞}` (rightwards),
//! `B3 = {+∞} × [−∞, ∞]` (downwards), `B4 = [0, ∞] × {−∞}` (leftwards).

use crate::specialfn::C64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

pub type CMat = DMatrix<C64>;

pub const DEFAULT_CORNER_TOL: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum BoundaryError {
    #[error("segment {index} has dimension {got}, expected {expected}")]
    DimMismatch { index: usize, got: usize, expected: usize },
    #[error("a boundary needs at least one segment")]
    Empty,
    #[error("at least 2 samples per segment are needed, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeId {
    B1,
    B2,
    B3,
    B4,
    /// a closed loop that is not part of a square, e.g. a test loop on [0, 2π]
    Loop,
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EdgeId::B1 => "B1",
            EdgeId::B2 => "B2",
            EdgeId::B3 => "B3",
            EdgeId::B4 => "B4",
            EdgeId::Loop => "loop",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Forward,
    Reverse,
}

impl Orientation {
    pub fn flip(self) -> Self {
        match self {
            Orientation::Forward => Orientation::Reverse,
            Orientation::Reverse => Orientation::Forward,
        }
    }
}

/// Smooth bijection between `s ∈ (0, 1)` and the parameter domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Chart {
    /// `[a, b]`, t = a + (b − a) s
    Linear { a: f64, b: f64 },
    /// `[−∞, ∞]`, x = tan(π(s − ½))
    Line,
    /// `[0, ∞]`, λ = tan(πs/2)
    HalfLine,
    /// `[0, ∞]`, λ = exp(tan(π(s − ½))); for functions of ln λ
    LogHalfLine,
    /// `[0, ∞]`, λ = scale · exp(tan(π(s − ½))), centred on a known energy scale
    ScaledLogHalfLine { scale: f64 },
}

impl Chart {
    pub fn to_param(self, s: f64) -> f64 {
        match self {
            Chart::Linear { a, b } => a + (b - a) * s,
            Chart::Line => {
                if s <= 0.0 {
                    f64::NEG_INFINITY
                } else if s >= 1.0 {
                    f64::INFINITY
                } else {
                    (PI * (s - 0.5)).tan()
                }
            }
            Chart::HalfLine => {
                if s <= 0.0 {
                    0.0
                } else if s >= 1.0 {
                    f64::INFINITY
                } else {
                    (PI * s / 2.0).tan()
                }
            }
            Chart::LogHalfLine => {
                if s <= 0.0 {
                    0.0
                } else if s >= 1.0 {
                    f64::INFINITY
                } else {
                    (PI * (s - 0.5)).tan().exp()
                }
            }
            Chart::ScaledLogHalfLine { scale } => scale * Chart::LogHalfLine.to_param(s),
        }
    }

    pub fn domain(self) -> (f64, f64) {
        match self {
            Chart::Linear { a, b } => (a, b),
            Chart::Line => (f64::NEG_INFINITY, f64::INFINITY),
            Chart::HalfLine | Chart::LogHalfLine | Chart::ScaledLogHalfLine { .. } => (0.0, f64::INFINITY),
        }
    }
}

type ValueFn = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

/// One edge of the boundary: a matrix function of the edge parameter with
/// its two limits stored separately.
#[derive(Clone)]
pub struct Segment {
    pub edge: EdgeId,
    pub chart: Chart,
    pub orientation: Orientation,
    value_fn: ValueFn,
    /// values at the lower and upper end of the parameter domain
    pub endpoint_values: (CMat, CMat),
}

impl fmt::Debug for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Segment")
            .field("edge", &self.edge)
            .field("chart", &self.chart)
            .field("orientation", &self.orientation)
            .field("dim", &self.dim())
            .finish()
    }
}

impl Segment {
    pub fn new(
        edge: EdgeId,
        chart: Chart,
        orientation: Orientation,
        endpoint_values: (CMat, CMat),
        value_fn: impl Fn(f64) -> CMat + Send + Sync + 'static,
    ) -> Self {
        Segment { edge, chart, orientation, value_fn: Arc::new(value_fn), endpoint_values }
    }

    pub fn constant(edge: EdgeId, chart: Chart, orientation: Orientation, m: CMat) -> Self {
        let v = m.clone();
        Segment::new(edge, chart, orientation, (m.clone(), m), move |_| v.clone())
    }

    pub fn dim(&self) -> usize {
        self.endpoint_values.0.nrows()
    }

    /// Value at a parameter of the domain; infinite or boundary parameters
    /// return the stored limits.
    pub fn at_param(&self, t: f64) -> CMat {
        let (lo, hi) = self.chart.domain();
        if t <= lo {
            self.endpoint_values.0.clone()
        } else if t >= hi || !t.is_finite() {
            self.endpoint_values.1.clone()
        } else {
            (self.value_fn)(t)
        }
    }

    /// Chart coordinate of traversal position `u ∈ [0, 1]`.
    pub fn chart_coord(&self, u: f64) -> f64 {
        match self.orientation {
            Orientation::Forward => u,
            Orientation::Reverse => 1.0 - u,
        }
    }

    pub fn param_at(&self, u: f64) -> f64 {
        self.chart.to_param(self.chart_coord(u))
    }

    /// Value at traversal position `u ∈ [0, 1]`.
    pub fn at(&self, u: f64) -> CMat {
        let s = self.chart_coord(u);
        if s <= 0.0 {
            return self.endpoint_values.0.clone();
        }
        if s >= 1.0 {
            return self.endpoint_values.1.clone();
        }
        self.at_param(self.chart.to_param(s))
    }

    pub fn start(&self) -> &CMat {
        match self.orientation {
            Orientation::Forward => &self.endpoint_values.0,
            Orientation::Reverse => &self.endpoint_values.1,
        }
    }

    pub fn end(&self) -> &CMat {
        match self.orientation {
            Orientation::Forward => &self.endpoint_values.1,
            Orientation::Reverse => &self.endpoint_values.0,
        }
    }

    /// Pointwise image under `g`.
    pub fn map(&self, g: impl Fn(&CMat) -> CMat + Send + Sync + Clone + 'static) -> Segment {
        let f = self.value_fn.clone();
        let g2 = g.clone();
        Segment {
            edge: self.edge,
            chart: self.chart,
            orientation: self.orientation,
            value_fn: Arc::new(move |t| g2(&f(t))),
            endpoint_values: (g(&self.endpoint_values.0), g(&self.endpoint_values.1)),
        }
    }

    pub fn reversed(&self) -> Segment {
        Segment { orientation: self.orientation.flip(), ..self.clone() }
    }
}

/// Ordered segments forming a closed path; usually the four edges
/// `[Γ₁ on B1, Γ₂ on B2, Γ₃ on B3, Γ₄ on B4]`.
#[derive(Debug, Clone)]
pub struct QuadrantBoundary {
    pub segments: Vec<Segment>,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct PathSample {
    pub segment: usize,
    pub edge: EdgeId,
    pub param: f64,
    pub matrix: CMat,
}

impl QuadrantBoundary {
    pub fn new(segments: Vec<Segment>) -> Result<Self, BoundaryError> {
        let dim = segments.first().ok_or(BoundaryError::Empty)?.dim();
        for (index, s) in segments.iter().enumerate() {
            if s.dim() != dim {
                return Err(BoundaryError::DimMismatch { index, got: s.dim(), expected: dim });
            }
        }
        Ok(QuadrantBoundary { segments, dim })
    }

    /// Standard square quadruple with the clockwise directions baked in.
    /// `g1`, `g3` live on `[−∞, ∞]`, `g2`, `g4` on `[0, ∞]`; the half-line
    /// charts are given per edge.
    pub fn quadruple(g1: Segment, g2: Segment, g3: Segment, g4: Segment) -> Result<Self, BoundaryError> {
        let fix = |s: Segment, edge, orientation| Segment { edge, orientation, ..s };
        QuadrantBoundary::new(vec![
            fix(g1, EdgeId::B1, Orientation::Forward),
            fix(g2, EdgeId::B2, Orientation::Forward),
            fix(g3, EdgeId::B3, Orientation::Reverse),
            fix(g4, EdgeId::B4, Orientation::Reverse),
        ])
    }

    pub fn constant(m: CMat) -> Self {
        let seg = |e, c| Segment::constant(e, c, Orientation::Forward, m.clone());
        QuadrantBoundary::quadruple(
            seg(EdgeId::B1, Chart::Line),
            seg(EdgeId::B2, Chart::HalfLine),
            seg(EdgeId::B3, Chart::Line),
            seg(EdgeId::B4, Chart::HalfLine),
        )
        .expect("constant quadruple is well formed")
    }

    /// A single closed loop on `[a, b]`.
    pub fn closed_loop(
        a: f64,
        b: f64,
        value_fn: impl Fn(f64) -> CMat + Send + Sync + 'static,
    ) -> Self {
        let ends = (value_fn(a), value_fn(b));
        let seg = Segment::new(EdgeId::Loop, Chart::Linear { a, b }, Orientation::Forward, ends, value_fn);
        QuadrantBoundary::new(vec![seg]).expect("one segment")
    }

    /// The same path walked backwards.
    pub fn reversed(&self) -> Self {
        let segments = self.segments.iter().rev().map(Segment::reversed).collect();
        QuadrantBoundary { segments, dim: self.dim }
    }

    /// `V Γ(·) V*` for a constant matrix `V`.
    pub fn conjugated(&self, v: &CMat) -> Self {
        let v = v.clone();
        let segments = self
            .segments
            .iter()
            .map(|s| {
                let v = v.clone();
                s.map(move |m| &v * m * v.adjoint())
            })
            .collect();
        QuadrantBoundary { segments, dim: self.dim }
    }
}

/// Largest operator-norm discrepancy between consecutive segment ends,
/// including the wrap-around from the last segment to the first.
pub fn corner_mismatch(qb: &QuadrantBoundary) -> f64 {
    let n = qb.segments.len();
    (0..n)
        .map(|i| op_norm(&(qb.segments[i].end() - qb.segments[(i + 1) % n].start())))
        .fold(0.0, f64::max)
}

pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// ‖M*M − 1‖ in operator norm.
pub fn unitarity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    op_norm(&(m.adjoint() * m - CMat::identity(n, n)))
}

/// `n_per_segment` samples per segment, uniform in the chart coordinate,
/// in traversal order and including both ends of every segment.
pub fn sample_closed_path(qb: &QuadrantBoundary, n_per_segment: usize) -> Result<Vec<PathSample>, BoundaryError> {
    if n_per_segment < 2 {
        return Err(BoundaryError::TooFewSamples(n_per_segment));
    }
    let mut out = Vec::with_capacity(n_per_segment * qb.segments.len());
    for (i, seg) in qb.segments.iter().enumerate() {
        for j in 0..n_per_segment {
            let u = j as f64 / (n_per_segment - 1) as f64;
            out.push(PathSample { segment: i, edge: seg.edge, param: seg.param_at(u), matrix: seg.at(u) });
        }
    }
    Ok(out)
}

fn det_mat(m: &CMat) -> CMat {
    CMat::from_element(1, 1, m.determinant())
}

/// Same path with every value replaced by its determinant.
pub fn pointwise_det(qb: &QuadrantBoundary) -> QuadrantBoundary {
    let segments = qb.segments.iter().map(|s| s.map(det_mat)).collect();
    QuadrantBoundary { segments, dim: 1 }
}

/// CSV dump: segment, edge, parameter, then `re_ij`, `im_ij` per entry.
pub fn write_path_csv<W: Write>(samples: &[PathSample], w: W) -> Result<(), BoundaryError> {
    let mut wtr = csv::Writer::from_writer(w);
    let n = samples.first().map(|s| s.matrix.nrows()).unwrap_or(0);
    let mut header = vec!["segment".to_string(), "edge".to_string(), "parameter".to_string()];
    for i in 0..n {
        for j in 0..n {
            header.push(format!("re_{i}{j}"));
            header.push(format!("im_{i}{j}"));
        }
    }
    wtr.write_record(&header)?;
    for s in samples {
        let mut rec = vec![s.segment.to_string(), s.edge.to_string(), format!("{}", s.param)];
        for i in 0..n {
            for j in 0..n {
                let z = s.matrix[(i, j)];
                rec.push(format!("{:.12e}", z.re));
                rec.push(format!("{:.12e}", z.im));
            }
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn scalar(z: C64) -> CMat {
    CMat::from_element(1, 1, z)
}

pub fn diag2(a: C64, b: C64) -> CMat {
    CMat::from_row_slice(2, 2, &[a, C64::new(0.0, 0.0), C64::new(0.0, 0.0), b])
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn constant_identity_samples() {
        let qb = QuadrantBoundary::constant(identity(2));
        let s = sample_closed_path(&qb, 4).unwrap();
        assert_eq!(s.len(), 16);
        assert!(s.iter().all(|p| p.matrix == identity(2)));
        assert!(corner_mismatch(&qb) == 0.0);
        assert!(sample_closed_path(&qb, 1).is_err());
    }

    #[test]
    fn broken_corner_is_detected() {
        let id = identity(1);
        let seg = |e, c| Segment::constant(e, c, Orientation::Forward, id.clone());
        let qb = QuadrantBoundary::quadruple(
            seg(EdgeId::B1, Chart::Line),
            seg(EdgeId::B2, Chart::HalfLine),
            seg(EdgeId::B3, Chart::Line),
            Segment::constant(EdgeId::B4, Chart::HalfLine, Orientation::Forward, id.clone() * C64::new(2.0, 0.0)),
        )
        .unwrap();
        assert!(corner_mismatch(&qb) >= 1.0);
    }

    #[test]
    fn traversal_directions() {
        // a segment whose value is its own parameter, traversed both ways
        let seg = Segment::new(
            EdgeId::B3,
            Chart::Line,
            Orientation::Reverse,
            (scalar(C64::new(-1.0, 0.0)), scalar(one())),
            |x| scalar(C64::new(x.tanh(), 0.0)),
        );
        assert_eq!(seg.start()[(0, 0)], one());
        assert_eq!(seg.at(0.0)[(0, 0)], one());
        assert_eq!(seg.param_at(0.0), f64::INFINITY);
        assert_eq!(seg.param_at(1.0), f64::NEG_INFINITY);
        assert!(seg.at(0.25)[(0, 0)].re > 0.0);
        assert!(seg.at(0.75)[(0, 0)].re < 0.0);
    }

    #[test]
    fn charts_are_monotone_and_hit_the_ends() {
        for c in [Chart::Line, Chart::HalfLine, Chart::LogHalfLine, Chart::ScaledLogHalfLine { scale: 3.0 }, Chart::Linear { a: 0.0, b: 2.0 }] {
            let (lo, hi) = c.domain();
            assert_eq!(c.to_param(0.0), lo);
            assert_eq!(c.to_param(1.0), hi);
            let mut prev = lo;
            for j in 1..100 {
                let t = c.to_param(j as f64 / 100.0);
                assert!(t > prev);
                prev = t;
            }
        }
    }

    #[test]
    fn det_of_block_diagonal() {
        let u = |x: f64| C64::from_polar(1.0, x.atan());
        let seg = Segment::new(
            EdgeId::B1,
            Chart::Line,
            Orientation::Forward,
            (diag2(u(-1e300), one()), diag2(u(1e300), one())),
            move |x| diag2(u(x), one()),
        );
        let qb = QuadrantBoundary::new(vec![seg]).unwrap();
        let d = pointwise_det(&qb);
        assert_eq!(d.dim, 1);
        for p in sample_closed_path(&d, 9).unwrap() {
            assert!((p.matrix[(0, 0)] - u(p.param)).norm() < 1e-15);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let qb = QuadrantBoundary::constant(identity(1));
        let s = sample_closed_path(&qb, 3).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("segment,edge,parameter,re_00,im_00"));
        assert_eq!(text.lines().count(), 13);
    }
}
