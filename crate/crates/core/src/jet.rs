//! Second-order forward-mode differentiation.
//!
//! The closed-form expressions in [`crate::analytic`] are written once over
//! [`Scalar`] and evaluated either on plain `f64` or on [`Jet`], which carries
//! the value together with its first and second derivative with respect to
//! the counting field.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn constant(value: f64) -> Self;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn value(self) -> f64;
}

impl Scalar for f64 {
    #[inline]
    fn constant(value: f64) -> Self {
        value
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
}

/// Truncated Taylor coefficients `(f, f', f'')` of a function of one variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    /// The independent variable evaluated at `x`.
    pub fn variable(x: f64) -> Self {
        Jet { value: x, d1: 1.0, d2: 0.0 }
    }

    fn recip(self) -> Self {
        let r = 1.0 / self.value;
        Jet { value: r, d1: -self.d1 * r * r, d2: 2.0 * self.d1 * self.d1 * r * r * r - self.d2 * r * r }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { value: self.value + o.value, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet { value: self.value - o.value, d1: self.d1 - o.d1, d2: self.d2 - o.d2 }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            value: self.value * o.value,
            d1: self.d1 * o.value + self.value * o.d1,
            d2: self.d2 * o.value + 2.0 * self.d1 * o.d1 + self.value * o.d2,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet { value: -self.value, d1: -self.d1, d2: -self.d2 }
    }
}

impl Scalar for Jet {
    fn constant(value: f64) -> Self {
        Jet { value, d1: 0.0, d2: 0.0 }
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        Jet { value: e, d1: e * self.d1, d2: e * (self.d2 + self.d1 * self.d1) }
    }

    fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        Jet { value: r, d1: self.d1 / (2.0 * r), d2: self.d2 / (2.0 * r) - self.d1 * self.d1 / (4.0 * r * r * r) }
    }

    fn value(self) -> f64 {
        self.value
    }
}
