//! PSL₂(ℝ) acting on the upper half-plane.
//!
//! Curvature is −1 throughout, so `cosh d(i, m·i) = (a² + b² + c² + d²)/2`
//! and the geodesic flow is right multiplication by `diag(e^{t/2}, e^{−t/2})`.

pub mod exact;

use core::fmt;

use num_bigint::BigInt;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::{One, Signed};

pub use exact::{ExactInt, Mat2};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("point ({x}, {y}) is not in the upper half-plane")]
    NotInUpperHalfPlane { x: f64, y: f64 },
    #[error("matrix has determinant {det}, expected 1")]
    BadDeterminant { det: f64 },
    #[error("element is not hyperbolic (|trace| <= 2)")]
    NotHyperbolic,
}

/// A point `x + iy` of ℍ² with `y > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    x: f64,
    y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if !x.is_finite() || !y.is_finite() || y <= 0.0 {
            return Err(GeometryError::NotInUpperHalfPlane { x, y });
        }
        Ok(Self { x, y })
    }

    /// The point `i`.
    pub const fn origin() -> Self {
        Self { x: 0.0, y: 1.0 }
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    /// The matrix `[[√y, x/√y], [0, 1/√y]]` sending `i` to this point.
    pub fn section(&self) -> RealMoebius {
        let s = self.y.sqrt();
        RealMoebius::from_raw([s, self.x / s, 0.0, 1.0 / s])
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Hyperbolic distance, `2·asinh(|z − w| / (2√(Im z · Im w)))`.
pub fn dist(z: Point, w: Point) -> f64 {
    let dx = z.x - w.x;
    let dy = z.y - w.y;
    let chord = (dx * dx + dy * dy).sqrt();
    2.0 * (chord / (2.0 * (z.y * w.y).sqrt())).asinh()
}

/// `cosh d(z, w)`.
pub fn cosh_dist(z: Point, w: Point) -> f64 {
    let dx = z.x - w.x;
    let dy = z.y - w.y;
    1.0 + (dx * dx + dy * dy) / (2.0 * z.y * w.y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IsometryClass {
    Identity,
    Elliptic,
    Parabolic,
    Hyperbolic,
}

impl fmt::Display for IsometryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IsometryClass::Identity => "identity",
            IsometryClass::Elliptic => "elliptic",
            IsometryClass::Parabolic => "parabolic",
            IsometryClass::Hyperbolic => "hyperbolic",
        };
        f.write_str(s)
    }
}

/// `2·arccosh(|tr|/2)`, accurate for large traces.
pub fn length_from_trace(abs_trace: f64) -> f64 {
    2.0 * (abs_trace / 2.0).acosh()
}

/// An integer element of PSL₂(ℤ) ⊂ PSL₂(ℝ), stored sign-canonically.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct IntMoebius(Mat2<BigInt>);

impl IntMoebius {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self, GeometryError> {
        Self::from_mat(Mat2::new(a.into(), b.into(), c.into(), d.into()))
    }

    pub fn from_mat(m: Mat2<BigInt>) -> Result<Self, GeometryError> {
        let det = m.det().expect("bigint arithmetic is total");
        if !det.is_one() {
            return Err(GeometryError::BadDeterminant {
                det: ExactInt::as_f64(&det),
            });
        }
        Ok(Self(m.canonical_sign().expect("bigint arithmetic is total")))
    }

    pub(crate) fn from_mat_unchecked<E: ExactInt>(m: &Mat2<E>) -> Self {
        Self(m.to_bigint().canonical_sign().expect("bigint arithmetic is total"))
    }

    pub fn identity() -> Self {
        Self(Mat2::identity())
    }

    pub fn entries(&self) -> &Mat2<BigInt> {
        &self.0
    }

    pub fn to_i128(&self) -> Option<Mat2<i128>> {
        self.0.to_i128()
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self(
            self.0
                .mul(&other.0)
                .and_then(|m| m.canonical_sign())
                .expect("bigint arithmetic is total"),
        )
    }

    pub fn inverse(&self) -> Self {
        Self(
            self.0
                .inverse_unimodular()
                .and_then(|m| m.canonical_sign())
                .expect("bigint arithmetic is total"),
        )
    }

    pub fn pow(&self, n: i64) -> Self {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut acc = Self::identity();
        for _ in 0..n.unsigned_abs() {
            acc = acc.compose(&base);
        }
        acc
    }

    /// Trace of the canonical representative.
    pub fn trace(&self) -> BigInt {
        &self.0.a + &self.0.d
    }

    pub fn abs_trace(&self) -> BigInt {
        self.trace().abs()
    }

    pub fn classify(&self) -> IsometryClass {
        if self.0.is_plus_minus_identity() {
            return IsometryClass::Identity;
        }
        let t = self.abs_trace();
        let two = BigInt::from(2);
        match t.cmp(&two) {
            core::cmp::Ordering::Less => IsometryClass::Elliptic,
            core::cmp::Ordering::Equal => IsometryClass::Parabolic,
            core::cmp::Ordering::Greater => IsometryClass::Hyperbolic,
        }
    }

    pub fn translation_length(&self) -> Result<f64, GeometryError> {
        if self.classify() != IsometryClass::Hyperbolic {
            return Err(GeometryError::NotHyperbolic);
        }
        Ok(length_from_trace(ExactInt::as_f64(&self.abs_trace())))
    }

    /// `d(i, m·i)` from the exact identity `2 cosh d = a² + b² + c² + d²`.
    pub fn dist_from_origin(&self) -> f64 {
        let s = self.0.frobenius_sq().expect("bigint arithmetic is total");
        (ExactInt::as_f64(&s) / 2.0).acosh()
    }

    pub fn apply(&self, z: Point) -> Point {
        self.to_real().apply(z)
    }

    pub fn to_real(&self) -> RealMoebius {
        RealMoebius::from_raw(self.0.to_f64())
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_plus_minus_identity()
    }
}

impl fmt::Display for IntMoebius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.0.a, self.0.b, self.0.c, self.0.d)
    }
}

/// A real element of PSL₂(ℝ) with determinant one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealMoebius {
    m: [f64; 4],
}

impl RealMoebius {
    /// Normalizes a positive-determinant matrix to determinant one.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, GeometryError> {
        let det = a * d - b * c;
        if !(det > 0.0) || !det.is_finite() {
            return Err(GeometryError::BadDeterminant { det });
        }
        let s = 1.0 / det.sqrt();
        Ok(Self::from_raw([a * s, b * s, c * s, d * s]).canonical())
    }

    #[inline]
    pub(crate) const fn from_raw(m: [f64; 4]) -> Self {
        Self { m }
    }

    pub const fn identity() -> Self {
        Self { m: [1.0, 0.0, 0.0, 1.0] }
    }

    /// The geodesic-flow element `diag(e^{t/2}, e^{−t/2})`.
    pub fn flow_element(t: f64) -> Self {
        let h = (t / 2.0).exp();
        Self { m: [h, 0.0, 0.0, 1.0 / h] }
    }

    /// Rotation about `i` turning the upward direction by `angle`.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = (angle / 2.0).sin_cos();
        Self { m: [c, s, -s, c] }
    }

    #[inline]
    pub fn entries(&self) -> [f64; 4] {
        self.m
    }

    pub fn canonical(self) -> Self {
        let [a, b, c, d] = self.m;
        let flip = if a != 0.0 { a < 0.0 } else { b < 0.0 };
        if flip {
            Self { m: [-a, -b, -c, -d] }
        } else {
            self
        }
    }

    #[inline]
    pub fn compose(&self, o: &Self) -> Self {
        let [a, b, c, d] = self.m;
        let [e, f, g, h] = o.m;
        Self {
            m: [a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h],
        }
    }

    #[inline]
    pub fn inverse(&self) -> Self {
        let [a, b, c, d] = self.m;
        Self { m: [d, -b, -c, a] }
    }

    #[inline]
    pub fn apply(&self, z: Point) -> Point {
        let [a, b, c, d] = self.m;
        let cx_d = c * z.x + d;
        let cy = c * z.y;
        let den = cx_d * cx_d + cy * cy;
        let x = ((a * z.x + b) * cx_d + a * c * z.y * z.y) / den;
        let y = z.y / den;
        Point { x, y }
    }

    pub fn trace(&self) -> f64 {
        self.m[0] + self.m[3]
    }

    pub fn classify(&self, tol: f64) -> IsometryClass {
        let [a, b, c, d] = self.m;
        if b.abs() <= tol && c.abs() <= tol && (a - d).abs() <= tol && ((a.abs() - 1.0).abs() <= tol) {
            return IsometryClass::Identity;
        }
        let t = self.trace().abs();
        if (t - 2.0).abs() <= tol {
            IsometryClass::Parabolic
        } else if t < 2.0 {
            IsometryClass::Elliptic
        } else {
            IsometryClass::Hyperbolic
        }
    }

    pub fn translation_length(&self) -> Result<f64, GeometryError> {
        let t = self.trace().abs();
        if t <= 2.0 {
            return Err(GeometryError::NotHyperbolic);
        }
        Ok(length_from_trace(t))
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.m.iter().map(|v| v * v).sum()
    }

    pub fn dist_from_origin(&self) -> f64 {
        (self.frobenius_sq() / 2.0).max(1.0).acosh()
    }
}

/// `cosh d(x, m·y)` via `‖M_x⁻¹ m M_y‖²/2`, which avoids forming `m·y`.
pub fn cosh_dist_moved(x: Point, m: &RealMoebius, y: Point) -> f64 {
    let lhs = x.section().inverse();
    let g = lhs.compose(m).compose(&y.section());
    (g.frobenius_sq() / 2.0).max(1.0)
}

/// A unit tangent vector of ℍ², stored as the frame `g` with `g·v₀` where
/// `v₀` is the upward vector at `i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitTangent {
    frame: RealMoebius,
}

impl UnitTangent {
    pub fn from_frame(frame: RealMoebius) -> Self {
        Self { frame }
    }

    /// Vector at `z` pointing at `angle` radians from the positive real direction.
    pub fn from_point_angle(z: Point, angle: f64) -> Self {
        let rot = RealMoebius::rotation(angle - core::f64::consts::FRAC_PI_2);
        Self {
            frame: z.section().compose(&rot),
        }
    }

    #[inline]
    pub fn frame(&self) -> &RealMoebius {
        &self.frame
    }

    #[inline]
    pub fn base_point(&self) -> Point {
        self.frame.apply(Point::origin())
    }

    /// Direction angle in `[0, 2π)`.
    pub fn angle(&self) -> f64 {
        let [_, _, c, d] = self.frame.m;
        // g'(i) = (ci + d)^{-2}; the image of the upward vector has argument π/2 − 2·arg(ci + d).
        let arg = c.atan2(d);
        let tau = core::f64::consts::TAU;
        let mut theta = core::f64::consts::FRAC_PI_2 - 2.0 * arg;
        theta %= tau;
        if theta < 0.0 {
            theta += tau;
        }
        theta
    }

    pub fn flow(&self, t: f64) -> Self {
        Self {
            frame: self.frame.compose(&RealMoebius::flow_element(t)),
        }
    }

    /// Left translation by an isometry.
    pub fn translate(&self, g: &RealMoebius) -> Self {
        Self {
            frame: g.compose(&self.frame),
        }
    }
}
