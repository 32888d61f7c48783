//! The group `G_qp`: law, inverse, dilations, the left-invariant horizontal
//! frame and integration of horizontal curves driven by piecewise-constant
//! controls.

use std::fmt;

use crate::matlin::{HorizontalPair, Mat, Vector};
use crate::{Error, Result};

/// Dimensions `(q, p)` of `G_qp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupShape {
    pub q: usize,
    pub p: usize,
}

impl GroupShape {
    pub fn new(q: usize, p: usize) -> Result<Self> {
        if q == 0 || p == 0 {
            return Err(Error::InvalidArgument(format!(
                "shape must have q, p ≥ 1, got ({q}, {p})"
            )));
        }
        Ok(Self { q, p })
    }

    /// Topological dimension `qp + p + q`.
    pub fn dim(&self) -> usize {
        self.q * self.p + self.p + self.q
    }

    /// Dimension `qp + p` of the horizontal layer.
    pub fn horizontal_dim(&self) -> usize {
        self.q * self.p + self.p
    }
}

impl fmt::Display for GroupShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.q, self.p)
    }
}

/// A point `(x, y, t)` of `G_qp`; also used for tangent vectors written in
/// the same coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPoint {
    pub x: Mat,
    pub y: Vector,
    pub t: Vector,
}

impl GroupPoint {
    pub fn new(x: Mat, y: Vector, t: Vector) -> Result<Self> {
        let shape = GroupShape::new(x.nrows(), x.ncols())?;
        if y.len() != shape.p || t.len() != shape.q {
            return Err(Error::ShapeMismatch {
                expected: format!("y ∈ R^{}, t ∈ R^{}", shape.p, shape.q),
                found: format!("y ∈ R^{}, t ∈ R^{}", y.len(), t.len()),
            });
        }
        let point = Self { x, y, t };
        if !point.is_finite() {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        Ok(point)
    }

    pub fn identity(shape: GroupShape) -> Self {
        Self {
            x: Mat::zeros(shape.q, shape.p),
            y: Vector::zeros(shape.p),
            t: Vector::zeros(shape.q),
        }
    }

    pub fn shape(&self) -> GroupShape {
        GroupShape {
            q: self.x.nrows(),
            p: self.x.ncols(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(self.y.iter()).chain(self.t.iter()).all(|v| *v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).chain(self.t.iter()).all(|v| v.is_finite())
    }

    /// The horizontal part `(x, y)`.
    pub fn horizontal(&self) -> HorizontalPair {
        HorizontalPair {
            xi: self.x.clone(),
            eta: self.y.clone(),
        }
    }

    /// Coordinates flattened as `x` (column-major), `y`, `t`.
    pub fn to_flat(&self) -> Vector {
        let mut out = Vec::with_capacity(self.shape().dim());
        out.extend_from_slice(self.x.as_slice());
        out.extend_from_slice(self.y.as_slice());
        out.extend_from_slice(self.t.as_slice());
        Vector::from_vec(out)
    }

    pub fn from_flat(shape: GroupShape, flat: &[f64]) -> Self {
        let GroupShape { q, p } = shape;
        assert_eq!(flat.len(), shape.dim(), "flat point has wrong length");
        Self {
            x: Mat::from_column_slice(q, p, &flat[..q * p]),
            y: Vector::from_column_slice(&flat[q * p..q * p + p]),
            t: Vector::from_column_slice(&flat[q * p + p..]),
        }
    }

    /// Largest coordinate difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.to_flat() - other.to_flat()).amax()
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape().to_string(),
                found: other.shape().to_string(),
            });
        }
        Ok(())
    }
}

/// `Q((x,y),(ξ,η)) = ½(xη − ξy)`.
pub fn q_form(a: &HorizontalPair, b: &HorizontalPair) -> Vector {
    (&a.xi * &b.eta - &b.xi * &a.eta) * 0.5
}

/// Group law.
pub fn mul(g: &GroupPoint, h: &GroupPoint) -> Result<GroupPoint> {
    g.check_same_shape(h)?;
    let twist = q_form(&g.horizontal(), &h.horizontal());
    Ok(GroupPoint {
        x: &g.x + &h.x,
        y: &g.y + &h.y,
        t: &g.t + &h.t + twist,
    })
}

pub fn inverse(g: &GroupPoint) -> GroupPoint {
    GroupPoint {
        x: -&g.x,
        y: -&g.y,
        t: -&g.t,
    }
}

/// Carnot dilation `(x, y, t) ↦ (rx, ry, r²t)`.
pub fn dilate(r: f64, g: &GroupPoint) -> Result<GroupPoint> {
    if !(r > 0.0) {
        return Err(Error::NonpositiveR(r));
    }
    Ok(GroupPoint {
        x: &g.x * r,
        y: &g.y * r,
        t: &g.t * (r * r),
    })
}

/// Left-invariant orthonormal horizontal frame at `g`.
///
/// Order: `X_αk` with `α` running fastest (matching the column-major layout
/// of `x`), then `Y_1, …, Y_p`.
pub fn frame(g: &GroupPoint) -> Vec<GroupPoint> {
    let GroupShape { q, p } = g.shape();
    let mut out = Vec::with_capacity(q * p + p);
    for k in 0..p {
        for a in 0..q {
            let mut v = GroupPoint::identity(g.shape());
            v.x[(a, k)] = 1.0;
            v.t[a] = -0.5 * g.y[k];
            out.push(v);
        }
    }
    for j in 0..p {
        let mut v = GroupPoint::identity(g.shape());
        v.y[j] = 1.0;
        v.t = g.x.column(j) * 0.5;
        out.push(v);
    }
    out
}

/// Piecewise-constant control on `[0, duration]` with equal-length pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseControl {
    pub segments: Vec<HorizontalPair>,
    pub duration: f64,
}

impl PiecewiseControl {
    pub fn new(segments: Vec<HorizontalPair>, duration: f64) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::InvalidArgument("control needs at least one segment".into()))?;
        let (q, p) = (first.q(), first.p());
        if segments.iter().any(|s| s.q() != q || s.p() != p) {
            return Err(Error::ShapeMismatch {
                expected: format!("({q}, {p})"),
                found: "segments of mixed shapes".into(),
            });
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
        }
        if !segments.iter().all(HorizontalPair::is_finite) {
            return Err(Error::InvalidArgument("non-finite control".into()));
        }
        Ok(Self { segments, duration })
    }

    pub fn shape(&self) -> GroupShape {
        GroupShape {
            q: self.segments[0].q(),
            p: self.segments[0].p(),
        }
    }

    pub fn segment_duration(&self) -> f64 {
        self.duration / self.segments.len() as f64
    }

    /// Sub-Riemannian length `Σ |(u_i, v_i)|·Δs`.
    pub fn length(&self) -> f64 {
        self.segments.iter().map(HorizontalPair::norm).sum::<f64>() * self.segment_duration()
    }

    /// Energy `Σ |(u_i, v_i)|²·Δs`.
    pub fn energy(&self) -> f64 {
        self.segments.iter().map(HorizontalPair::norm_squared).sum::<f64>() * self.segment_duration()
    }

    /// The same control multiplied by `r`.
    pub fn scaled(&self, r: f64) -> Self {
        Self {
            segments: self.segments.iter().map(|s| s.scale(r)).collect(),
            duration: self.duration,
        }
    }
}

fn velocity(pos: &HorizontalPair, control: &HorizontalPair) -> Vector {
    q_form(pos, control)
}

/// Integrates `(ẋ, ẏ) = (u, v)`, `ṫ = Q((x,y),(u,v))` from the origin.
///
/// Returns `segments·steps_per_segment + 1` samples, first and last
/// included. See [`integrate_control_from`].
pub fn integrate_control(ctrl: &PiecewiseControl, steps_per_segment: usize) -> Result<Vec<GroupPoint>> {
    integrate_control_from(&GroupPoint::identity(ctrl.shape()), ctrl, steps_per_segment)
}

/// Same as [`integrate_control`] starting at `start`.
///
/// Classical RK4 with a fixed step. On each constant piece the `(x, y)`
/// update is exact; only `t` goes through the Runge-Kutta stages.
pub fn integrate_control_from(
    start: &GroupPoint,
    ctrl: &PiecewiseControl,
    steps_per_segment: usize,
) -> Result<Vec<GroupPoint>> {
    if steps_per_segment == 0 {
        return Err(Error::InvalidArgument("steps_per_segment must be ≥ 1".into()));
    }
    if start.shape() != ctrl.shape() {
        return Err(Error::ShapeMismatch {
            expected: ctrl.shape().to_string(),
            found: start.shape().to_string(),
        });
    }
    let h = ctrl.segment_duration() / steps_per_segment as f64;
    let mut out = Vec::with_capacity(ctrl.segments.len() * steps_per_segment + 1);
    let mut cur = start.clone();
    out.push(cur.clone());
    for seg in &ctrl.segments {
        for _ in 0..steps_per_segment {
            let pos = cur.horizontal();
            let k1 = velocity(&pos, seg);
            let mid = pos.axpy(0.5 * h, seg);
            let k2 = velocity(&mid, seg);
            let k3 = k2.clone();
            let end = pos.axpy(h, seg);
            let k4 = velocity(&end, seg);
            cur = GroupPoint {
                x: end.xi,
                y: end.eta,
                t: &cur.t + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0),
            };
            out.push(cur.clone());
        }
    }
    Ok(out)
}
