//! Integer 2×2 matrices over a pluggable exact ring.
//!
//! Hot loops run on `i128` with checked arithmetic and fall back to
//! `BigInt` when a product would overflow, so results are always exact.

use core::cmp::Ordering;
use core::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

/// Exact integer arithmetic where every operation may report overflow.
pub trait ExactInt: Clone + Eq + Ord + fmt::Debug {
    fn from_i64(v: i64) -> Self;
    fn zero() -> Self {
        Self::from_i64(0)
    }
    fn cadd(&self, other: &Self) -> Option<Self>;
    fn csub(&self, other: &Self) -> Option<Self>;
    fn cmul(&self, other: &Self) -> Option<Self>;
    fn cneg(&self) -> Option<Self>;
    fn signum_i(&self) -> i32;
    fn as_f64(&self) -> f64;
    fn as_bigint(&self) -> BigInt;

    fn cabs(&self) -> Option<Self> {
        if self.signum_i() < 0 {
            self.cneg()
        } else {
            Some(self.clone())
        }
    }
}

impl ExactInt for i128 {
    #[inline]
    fn from_i64(v: i64) -> Self {
        v as i128
    }
    #[inline]
    fn cadd(&self, other: &Self) -> Option<Self> {
        self.checked_add(*other)
    }
    #[inline]
    fn csub(&self, other: &Self) -> Option<Self> {
        self.checked_sub(*other)
    }
    #[inline]
    fn cmul(&self, other: &Self) -> Option<Self> {
        self.checked_mul(*other)
    }
    #[inline]
    fn cneg(&self) -> Option<Self> {
        self.checked_neg()
    }
    #[inline]
    fn signum_i(&self) -> i32 {
        self.signum() as i32
    }
    #[inline]
    fn as_f64(&self) -> f64 {
        *self as f64
    }
    fn as_bigint(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl ExactInt for BigInt {
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn cadd(&self, other: &Self) -> Option<Self> {
        Some(self + other)
    }
    fn csub(&self, other: &Self) -> Option<Self> {
        Some(self - other)
    }
    fn cmul(&self, other: &Self) -> Option<Self> {
        Some(self * other)
    }
    fn cneg(&self) -> Option<Self> {
        Some(-self)
    }
    fn signum_i(&self) -> i32 {
        if self.is_zero() {
            0
        } else if self.is_positive() {
            1
        } else {
            -1
        }
    }
    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::INFINITY)
    }
    fn as_bigint(&self) -> BigInt {
        self.clone()
    }
}

/// Row-major 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Mat2<E> {
    pub a: E,
    pub b: E,
    pub c: E,
    pub d: E,
}

impl<E: ExactInt> Mat2<E> {
    pub fn new(a: E, b: E, c: E, d: E) -> Self {
        Self { a, b, c, d }
    }

    pub fn identity() -> Self {
        Self::new(E::from_i64(1), E::zero(), E::zero(), E::from_i64(1))
    }

    pub fn mul(&self, o: &Self) -> Option<Self> {
        let a = self.a.cmul(&o.a)?.cadd(&self.b.cmul(&o.c)?)?;
        let b = self.a.cmul(&o.b)?.cadd(&self.b.cmul(&o.d)?)?;
        let c = self.c.cmul(&o.a)?.cadd(&self.d.cmul(&o.c)?)?;
        let d = self.c.cmul(&o.b)?.cadd(&self.d.cmul(&o.d)?)?;
        Some(Self { a, b, c, d })
    }

    /// Inverse of a determinant-one matrix.
    pub fn inverse_unimodular(&self) -> Option<Self> {
        Some(Self {
            a: self.d.clone(),
            b: self.b.cneg()?,
            c: self.c.cneg()?,
            d: self.a.clone(),
        })
    }

    pub fn det(&self) -> Option<E> {
        self.a.cmul(&self.d)?.csub(&self.b.cmul(&self.c)?)
    }

    pub fn trace(&self) -> Option<E> {
        self.a.cadd(&self.d)
    }

    /// `a² + b² + c² + d²`, which equals `2 cosh d(i, m·i)` for det-one `m`.
    pub fn frobenius_sq(&self) -> Option<E> {
        self.a
            .cmul(&self.a)?
            .cadd(&self.b.cmul(&self.b)?)?
            .cadd(&self.c.cmul(&self.c)?)?
            .cadd(&self.d.cmul(&self.d)?)
    }

    pub fn neg(&self) -> Option<Self> {
        Some(Self {
            a: self.a.cneg()?,
            b: self.b.cneg()?,
            c: self.c.cneg()?,
            d: self.d.cneg()?,
        })
    }

    /// Chooses the PSL₂ representative with `a > 0`, or `a = 0` and `b > 0`.
    pub fn canonical_sign(&self) -> Option<Self> {
        let s = match self.a.signum_i() {
            0 => self.b.signum_i(),
            s => s,
        };
        if s < 0 {
            self.neg()
        } else {
            Some(self.clone())
        }
    }

    pub fn is_plus_minus_identity(&self) -> bool {
        self.b.signum_i() == 0
            && self.c.signum_i() == 0
            && self.a == self.d
            && self.a.cabs().map(|v| v == E::from_i64(1)).unwrap_or(false)
    }

    pub fn to_bigint(&self) -> Mat2<BigInt> {
        Mat2::new(
            self.a.as_bigint(),
            self.b.as_bigint(),
            self.c.as_bigint(),
            self.d.as_bigint(),
        )
    }

    pub fn to_f64(&self) -> [f64; 4] {
        [self.a.as_f64(), self.b.as_f64(), self.c.as_f64(), self.d.as_f64()]
    }

    /// Lexicographic key on the entries; used for deterministic ordering.
    pub fn cmp_entries(&self, o: &Self) -> Ordering {
        self.a
            .cmp(&o.a)
            .then_with(|| self.b.cmp(&o.b))
            .then_with(|| self.c.cmp(&o.c))
            .then_with(|| self.d.cmp(&o.d))
    }
}

impl Mat2<BigInt> {
    /// Narrows to `i128` when every entry fits.
    pub fn to_i128(&self) -> Option<Mat2<i128>> {
        Some(Mat2::new(
            self.a.to_i128()?,
            self.b.to_i128()?,
            self.c.to_i128()?,
            self.d.to_i128()?,
        ))
    }
}

impl Mat2<i128> {
    pub fn from_i64s(a: i64, b: i64, c: i64, d: i64) -> Self {
        Self::new(a as i128, b as i128, c as i128, d as i128)
    }
}
