//! Bicomplex and hyperbolic numbers in idempotent coordinates.
//!
//! A bicomplex number `z1 + i2*z2` is stored as the pair `(w1, w2)` with
//! `w1 = z1 - i1*z2` and `w2 = z1 + i1*z2`, so that `ζ = w1*e1 + w2*e2`.
//! In this basis addition, multiplication, inversion and every elementary
//! function act independently on the two components. The cartesian pair
//! `(z1, z2)` is only a view.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use thiserror::Error;

/// Complex scalar over `i1`.
pub type Complex = num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumberError {
    #[error("non-finite input")]
    NonFinite,
    #[error("{0} is a zero divisor and has no inverse")]
    NonInvertible(BiComplex),
    #[error("supremum of an empty set")]
    EmptySet,
    #[error("tolerance must be finite and positive, got {0}")]
    BadTolerance(f64),
}

/// Absolute tolerance for zero, degeneracy and order tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance(f64);

impl Tolerance {
    pub const DEFAULT_EPS: f64 = 1e-12;

    pub fn new(eps: f64) -> Result<Self, NumberError> {
        if eps.is_finite() && eps > 0.0 {
            Ok(Self(eps))
        } else {
            Err(NumberError::BadTolerance(eps))
        }
    }

    pub fn eps(self) -> f64 {
        self.0
    }

    fn is_zero(self, x: f64) -> bool {
        x.abs() <= self.0
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self(Self::DEFAULT_EPS)
    }
}

/// Outcome of comparing two hyperbolic numbers under the cone order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DOrdering {
    Less,
    Equal,
    Greater,
    Incomparable,
}

impl DOrdering {
    /// `Less` or `Equal`, i.e. `a ⪯ b`.
    pub fn is_le(self) -> bool {
        matches!(self, DOrdering::Less | DOrdering::Equal)
    }

    pub fn is_ge(self) -> bool {
        matches!(self, DOrdering::Greater | DOrdering::Equal)
    }
}

/// Zero-divisor classification of a bicomplex number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Class {
    Zero,
    ZeroDivisor,
    Unit,
}

/// A bicomplex number `w1*e1 + w2*e2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BiComplex {
    pub w1: Complex,
    pub w2: Complex,
}

const fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

impl BiComplex {
    pub const ZERO: Self = Self::from_idempotent(c(0.0, 0.0), c(0.0, 0.0));
    pub const ONE: Self = Self::from_idempotent(c(1.0, 0.0), c(1.0, 0.0));
    pub const E1: Self = Self::from_idempotent(c(1.0, 0.0), c(0.0, 0.0));
    pub const E2: Self = Self::from_idempotent(c(0.0, 0.0), c(1.0, 0.0));
    pub const J: Self = Self::from_idempotent(c(1.0, 0.0), c(-1.0, 0.0));
    pub const I1: Self = Self::from_idempotent(c(0.0, 1.0), c(0.0, 1.0));
    pub const I2: Self = Self::from_idempotent(c(0.0, -1.0), c(0.0, 1.0));

    pub const fn from_idempotent(w1: Complex, w2: Complex) -> Self {
        Self { w1, w2 }
    }

    /// `z1 + i2*z2` into idempotent form `(z1 - i1*z2, z1 + i1*z2)`.
    pub fn from_cartesian(z1: Complex, z2: Complex) -> Result<Self, NumberError> {
        if !(z1.is_finite() && z2.is_finite()) {
            return Err(NumberError::NonFinite);
        }
        let i1z2 = Complex::new(-z2.im, z2.re);
        Ok(Self::from_idempotent(z1 - i1z2, z1 + i1z2))
    }

    /// Inverse of [`BiComplex::from_cartesian`]: `z1 = (w1+w2)/2`, `z2 = i1*(w1-w2)/2`.
    pub fn to_cartesian(self) -> (Complex, Complex) {
        let z1 = (self.w1 + self.w2) * 0.5;
        let d = (self.w1 - self.w2) * 0.5;
        (z1, Complex::new(-d.im, d.re))
    }

    /// Embeds a complex number of `C(i1)`, i.e. `z*e1 + z*e2`.
    pub const fn from_complex(z: Complex) -> Self {
        Self::from_idempotent(z, z)
    }

    pub const fn from_real(x: f64) -> Self {
        Self::from_complex(c(x, 0.0))
    }

    pub fn is_finite(self) -> bool {
        self.w1.is_finite() && self.w2.is_finite()
    }

    pub fn component(self, index: usize) -> Complex {
        match index {
            0 => self.w1,
            1 => self.w2,
            _ => panic!("idempotent component index {index} out of range"),
        }
    }

    pub fn scale(self, k: f64) -> Self {
        Self::from_idempotent(self.w1 * k, self.w2 * k)
    }

    /// Hyperbolic-valued modulus `|w1| e1 + |w2| e2`.
    pub fn d_modulus(self) -> Hyperbolic {
        Hyperbolic::new(self.w1.norm(), self.w2.norm())
    }

    pub fn classify(self, tol: Tolerance) -> Class {
        let z1 = self.w1.norm() <= tol.eps();
        let z2 = self.w2.norm() <= tol.eps();
        match (z1, z2) {
            (true, true) => Class::Zero,
            (false, false) => Class::Unit,
            _ => Class::ZeroDivisor,
        }
    }

    pub fn inverse(self, tol: Tolerance) -> Result<Self, NumberError> {
        if self.classify(tol) != Class::Unit {
            return Err(NumberError::NonInvertible(self));
        }
        Ok(Self::from_idempotent(self.w1.inv(), self.w2.inv()))
    }

    pub fn checked_div(self, rhs: Self, tol: Tolerance) -> Result<Self, NumberError> {
        Ok(self * rhs.inverse(tol)?)
    }

    pub fn powi(self, n: i32) -> Self {
        Self::from_idempotent(self.w1.powi(n), self.w2.powi(n))
    }

    /// Idempotent rendering `[w1 | w2]`.
    pub fn to_idempotent_string(self) -> String {
        format!("[{} | {}]", fmt_complex(self.w1), fmt_complex(self.w2))
    }

    /// Cartesian rendering `a+b*i1 + (c+d*i1)*i2`.
    pub fn to_cartesian_string(self) -> String {
        let (z1, z2) = self.to_cartesian();
        format!("{} + ({})*i2", fmt_complex(z1), fmt_complex(z2))
    }
}

impl fmt::Display for BiComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_cartesian_string())
    }
}

impl Add for BiComplex {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::from_idempotent(self.w1 + rhs.w1, self.w2 + rhs.w2)
    }
}

impl AddAssign for BiComplex {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for BiComplex {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::from_idempotent(self.w1 - rhs.w1, self.w2 - rhs.w2)
    }
}

impl Mul for BiComplex {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::from_idempotent(self.w1 * rhs.w1, self.w2 * rhs.w2)
    }
}

impl Mul<f64> for BiComplex {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

impl Neg for BiComplex {
    type Output = Self;
    fn neg(self) -> Self {
        Self::from_idempotent(-self.w1, -self.w2)
    }
}

impl From<Complex> for BiComplex {
    fn from(z: Complex) -> Self {
        Self::from_complex(z)
    }
}

/// A hyperbolic number `v1*e1 + v2*e2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Hyperbolic {
    pub v1: f64,
    pub v2: f64,
}

impl Hyperbolic {
    pub const ZERO: Self = Self::new(0.0, 0.0);
    pub const ONE: Self = Self::new(1.0, 1.0);
    pub const E1: Self = Self::new(1.0, 0.0);
    pub const E2: Self = Self::new(0.0, 1.0);
    pub const J: Self = Self::new(1.0, -1.0);

    pub const fn new(v1: f64, v2: f64) -> Self {
        Self { v1, v2 }
    }

    pub const fn splat(v: f64) -> Self {
        Self::new(v, v)
    }

    /// `x + j*y`.
    pub fn from_cartesian(x: f64, y: f64) -> Self {
        Self::new(x + y, x - y)
    }

    pub fn to_cartesian(self) -> (f64, f64) {
        ((self.v1 + self.v2) * 0.5, (self.v1 - self.v2) * 0.5)
    }

    pub fn component(self, index: usize) -> f64 {
        match index {
            0 => self.v1,
            1 => self.v2,
            _ => panic!("idempotent component index {index} out of range"),
        }
    }

    pub fn is_finite(self) -> bool {
        self.v1.is_finite() && self.v2.is_finite()
    }

    pub fn to_bicomplex(self) -> BiComplex {
        BiComplex::from_idempotent(c(self.v1, 0.0), c(self.v2, 0.0))
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.v1 * k, self.v2 * k)
    }

    pub fn d_modulus(self) -> Self {
        Self::new(self.v1.abs(), self.v2.abs())
    }

    /// Membership in the nonnegative cone `D+`, within tolerance.
    pub fn is_nonnegative(self, tol: Tolerance) -> bool {
        self.v1 >= -tol.eps() && self.v2 >= -tol.eps()
    }

    pub fn classify(self, tol: Tolerance) -> Class {
        match (tol.is_zero(self.v1), tol.is_zero(self.v2)) {
            (true, true) => Class::Zero,
            (false, false) => Class::Unit,
            _ => Class::ZeroDivisor,
        }
    }

    /// Componentwise maximum.
    pub fn max_d(self, other: Self) -> Self {
        Self::new(self.v1.max(other.v1), self.v2.max(other.v2))
    }

    /// Compares `self` with `other` under `⪯_D`: the sign pattern of `other - self`.
    pub fn try_cmp_d(self, other: Self, tol: Tolerance) -> DOrdering {
        let sign = |d: f64| {
            if tol.is_zero(d) {
                Ordering::Equal
            } else if d > 0.0 {
                Ordering::Greater
            } else {
                Ordering::Less
            }
        };
        let d = other - self;
        match (sign(d.v1), sign(d.v2)) {
            (Ordering::Equal, Ordering::Equal) => DOrdering::Equal,
            (Ordering::Less, Ordering::Greater) | (Ordering::Greater, Ordering::Less) => {
                DOrdering::Incomparable
            }
            (Ordering::Greater, _) | (_, Ordering::Greater) => DOrdering::Less,
            _ => DOrdering::Greater,
        }
    }

    /// Below `bound + slack` in both components.
    pub fn strictly_below(self, bound: Self, slack: f64) -> bool {
        self.v1 < bound.v1 + slack && self.v2 < bound.v2 + slack
    }
}

impl fmt::Display for Hyperbolic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*e1 + {}*e2", fmt_real(self.v1), fmt_real(self.v2))
    }
}

impl Add for Hyperbolic {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.v1 + rhs.v1, self.v2 + rhs.v2)
    }
}

impl AddAssign for Hyperbolic {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for Hyperbolic {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.v1 - rhs.v1, self.v2 - rhs.v2)
    }
}

impl Mul for Hyperbolic {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::new(self.v1 * rhs.v1, self.v2 * rhs.v2)
    }
}

impl Mul<f64> for Hyperbolic {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

impl Neg for Hyperbolic {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.v1, -self.v2)
    }
}

impl From<Hyperbolic> for BiComplex {
    fn from(h: Hyperbolic) -> Self {
        h.to_bicomplex()
    }
}

/// Supremum of a finite set under the D-modulus order: componentwise maxima.
pub fn sup_d<I>(set: I) -> Result<Hyperbolic, NumberError>
where
    I: IntoIterator<Item = Hyperbolic>,
{
    set.into_iter()
        .reduce(Hyperbolic::max_d)
        .ok_or(NumberError::EmptySet)
}

/// Shortest round-trip decimal, switching to exponent form for extreme magnitudes.
pub fn fmt_real(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 {
        "0".to_string()
    } else if (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// `a+b*i1` / `a-b*i1`.
pub fn fmt_complex(z: Complex) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}*i1", fmt_real(z.re), sign, fmt_real(z.im.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn cartesian_examples() {
        let one = BiComplex::from_cartesian(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert_eq!(one, BiComplex::ONE);
        let j = BiComplex::from_cartesian(c(0.0, 0.0), c(0.0, 1.0)).unwrap();
        assert_eq!(j, BiComplex::J);
        let e1 = BiComplex::from_cartesian(c(0.5, 0.0), c(0.0, 0.5)).unwrap();
        assert_eq!(e1, BiComplex::E1);
        assert_eq!(
            BiComplex::from_cartesian(c(f64::NAN, 0.0), c(0.0, 0.0)),
            Err(NumberError::NonFinite)
        );
    }

    #[test]
    fn unit_table() {
        // i2 = (-i1, i1) from the cartesian pair (0, 1)
        let i2 = BiComplex::from_cartesian(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        assert_eq!(i2, BiComplex::I2);
        assert_eq!(BiComplex::I1 * BiComplex::I2, BiComplex::J);
        assert_eq!(BiComplex::I1 * BiComplex::J, -BiComplex::I2);
        assert_eq!(BiComplex::I2 * BiComplex::J, -BiComplex::I1);
        assert_eq!(BiComplex::E1 * BiComplex::E2, BiComplex::ZERO);
        assert_eq!(BiComplex::E1 + BiComplex::E2, BiComplex::ONE);
        assert_eq!(BiComplex::J * BiComplex::J, BiComplex::ONE);
        assert_eq!(BiComplex::I2 * BiComplex::I2, -BiComplex::ONE);
    }

    #[test]
    fn cartesian_product_formula() {
        let (z1, z2) = (c(1.5, -2.0), c(0.25, 3.0));
        let (u1, u2) = (c(-0.5, 1.0), c(2.0, 0.75));
        let a = BiComplex::from_cartesian(z1, z2).unwrap();
        let b = BiComplex::from_cartesian(u1, u2).unwrap();
        let (p1, p2) = (a * b).to_cartesian();
        assert!((p1 - (z1 * u1 - z2 * u2)).norm() < 1e-12);
        assert!((p2 - (z1 * u2 + z2 * u1)).norm() < 1e-12);
    }

    #[test]
    fn d_modulus_examples() {
        let h = Hyperbolic::new(3.0, -4.0);
        assert_eq!(h.d_modulus(), Hyperbolic::new(3.0, 4.0));
        assert_eq!(h.to_bicomplex().d_modulus(), Hyperbolic::new(3.0, 4.0));
        assert_eq!(BiComplex::ZERO.d_modulus(), Hyperbolic::ZERO);
        let z = BiComplex::from_cartesian(c(1.0, 1.0), c(0.0, 0.0)).unwrap();
        let m = z.d_modulus();
        assert!((m.v1 - 2f64.sqrt()).abs() < 1e-15 && (m.v2 - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn order_examples() {
        let one_plus_j = Hyperbolic::ONE + Hyperbolic::J;
        assert_eq!(one_plus_j, Hyperbolic::new(2.0, 0.0));
        assert_eq!(Hyperbolic::ZERO.try_cmp_d(one_plus_j, tol()), DOrdering::Less);
        assert_eq!(one_plus_j.try_cmp_d(Hyperbolic::ZERO, tol()), DOrdering::Greater);
        assert_eq!(
            Hyperbolic::E1.try_cmp_d(Hyperbolic::E2, tol()),
            DOrdering::Incomparable
        );
        let a = Hyperbolic::new(0.3, -7.0);
        assert_eq!(a.try_cmp_d(a, tol()), DOrdering::Equal);
        assert_eq!(
            a.try_cmp_d(a + Hyperbolic::splat(1e-13), tol()),
            DOrdering::Equal
        );
    }

    #[test]
    fn sup_examples() {
        assert_eq!(
            sup_d([Hyperbolic::E1, Hyperbolic::E2]).unwrap(),
            Hyperbolic::ONE
        );
        let a = Hyperbolic::new(-1.0, 2.5);
        assert_eq!(sup_d([a]).unwrap(), a);
        assert_eq!(
            sup_d([Hyperbolic::new(2.0, 1.0), Hyperbolic::new(1.0, 3.0)]).unwrap(),
            Hyperbolic::new(2.0, 3.0)
        );
        assert_eq!(sup_d([]), Err(NumberError::EmptySet));
    }

    #[test]
    fn classify_and_inverse() {
        assert_eq!(BiComplex::E1.classify(tol()), Class::ZeroDivisor);
        assert_eq!(BiComplex::ONE.classify(tol()), Class::Unit);
        assert_eq!(BiComplex::ZERO.classify(tol()), Class::Zero);
        // e1 as the cartesian pair (1/2, i1/2) satisfies z1^2 + z2^2 = 0
        let (z1, z2) = BiComplex::E1.to_cartesian();
        assert!((z1 * z1 + z2 * z2).norm() < 1e-15);

        assert_eq!(BiComplex::J.inverse(tol()).unwrap(), BiComplex::J);
        let a = Hyperbolic::new(2.0, 4.0).to_bicomplex();
        assert_eq!(
            a.inverse(tol()).unwrap(),
            Hyperbolic::new(0.5, 0.25).to_bicomplex()
        );
        assert!(matches!(
            BiComplex::E1.inverse(tol()),
            Err(NumberError::NonInvertible(_))
        ));
    }

    #[test]
    fn renderings() {
        let z = BiComplex::from_cartesian(c(1.0, -2.0), c(0.5, 3.0)).unwrap();
        assert_eq!(z.to_cartesian_string(), "1-2*i1 + (0.5+3*i1)*i2");
        assert_eq!(BiComplex::J.to_idempotent_string(), "[1+0*i1 | -1+0*i1]");
        assert_eq!(Hyperbolic::new(2.0, 3.0).to_string(), "2*e1 + 3*e2");
        assert_eq!(fmt_real(1e-7), "1e-7");
    }

    #[test]
    fn bad_tolerance() {
        assert!(Tolerance::new(0.0).is_err());
        assert!(Tolerance::new(f64::INFINITY).is_err());
        assert_eq!(Tolerance::new(1e-9).unwrap().eps(), 1e-9);
    }
}
