//! First-order forward-mode scalars.
//!
//! [`Dual`] carries one tangent alongside the primal value. Running the
//! network's reverse pass on `Dual` numbers (forward-over-reverse) yields
//! mixed second derivatives such as d²ψ/(dx dθ) exactly, without finite
//! differences.

use crate::float::Real;
use std::ops::{Add, Mul, Neg, Sub};

/// Scalar arithmetic shared by plain reals and dual numbers.
///
/// The activation primitives carry their own derivative rules, so any
/// computation written against this trait differentiates correctly when
/// instantiated with [`Dual`].
pub trait Scalar<T: Real>:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn from_real(v: T) -> Self;
    fn zero() -> Self;
    /// Primal part.
    fn real(self) -> T;
    /// `ln(1 + exp(x))`, overflow-safe.
    fn softplus(self) -> Self;
    /// `1 / (1 + exp(-x))`, overflow-safe. Also the softplus derivative.
    fn sigmoid(self) -> Self;
    /// `max(x, 0)`.
    fn relu(self) -> Self;
    /// Relu derivative: 1 for x > 0, else 0 (subgradient 0 at the kink).
    fn heaviside(self) -> Self;
}

fn softplus_real<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid_real<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Real> Scalar<T> for T {
    fn from_real(v: T) -> Self {
        v
    }
    fn zero() -> Self {
        T::zero()
    }
    fn real(self) -> T {
        self
    }
    fn softplus(self) -> Self {
        softplus_real(self)
    }
    fn sigmoid(self) -> Self {
        sigmoid_real(self)
    }
    fn relu(self) -> Self {
        if self > T::zero() {
            self
        } else {
            T::zero()
        }
    }
    fn heaviside(self) -> Self {
        if self > T::zero() {
            T::one()
        } else {
            T::zero()
        }
    }
}

/// Value plus one directional derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Real> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Self { re, eps }
    }

    /// Lifts a constant (zero tangent).
    pub fn constant(re: T) -> Self {
        Self {
            re,
            eps: T::zero(),
        }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.eps + rhs.eps)
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.re - rhs.re, self.eps - rhs.eps)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::new(self.re * rhs.re, self.re * rhs.eps + self.eps * rhs.re)
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

impl<T: Real> Scalar<T> for Dual<T> {
    fn from_real(v: T) -> Self {
        Self::constant(v)
    }
    fn zero() -> Self {
        Self::constant(T::zero())
    }
    fn real(self) -> T {
        self.re
    }
    fn softplus(self) -> Self {
        Self::new(softplus_real(self.re), sigmoid_real(self.re) * self.eps)
    }
    fn sigmoid(self) -> Self {
        let s = sigmoid_real(self.re);
        Self::new(s, s * (T::one() - s) * self.eps)
    }
    fn relu(self) -> Self {
        if self.re > T::zero() {
            self
        } else {
            Self::constant(T::zero())
        }
    }
    fn heaviside(self) -> Self {
        Self::constant(self.re.heaviside())
    }
}
