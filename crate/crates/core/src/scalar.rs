use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::Serialize;

/// Floating-point scalar the solvers are generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + 'static
{
    /// Converts an `f64` literal, panicking only if the type cannot hold it.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Sign handling for real powers of negative bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PowerSign {
    /// Undefined (NaN) for negative bases.
    Real,
    /// `sign(u) |u|^e`, for odd-denominator rationals with odd numerator.
    Odd,
    /// `|u|^e`, for odd-denominator rationals with even numerator.
    Even,
}

/// Arithmetic shared by plain evaluation and forward-mode directional derivatives.
pub trait Numeric<T>:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn constant(c: T) -> Self;
    fn primal(self) -> T;
    /// Directional derivative carried along, zero for plain scalars.
    fn tangent(self) -> T;
    fn abs(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powr(self, e: T, sign: PowerSign) -> Self;
    fn min2(self, other: Self) -> Self;
    fn max2(self, other: Self) -> Self;
}

fn signed_pow<T: Float>(u: T, e: T, sign: PowerSign) -> T {
    if u >= T::zero() {
        return u.powf(e);
    }
    match sign {
        PowerSign::Real => T::nan(),
        PowerSign::Odd => -(-u).powf(e),
        PowerSign::Even => (-u).powf(e),
    }
}

/// Plain value carried through the [`Numeric`] interface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plain<T>(pub T);

macro_rules! forward_ops {
    ($name:ident) => {
        impl<T: Real> Add for $name<T> {
            type Output = Self;
            #[inline]
            fn add(self, o: Self) -> Self {
                $name(self.0 + o.0)
            }
        }
        impl<T: Real> Sub for $name<T> {
            type Output = Self;
            #[inline]
            fn sub(self, o: Self) -> Self {
                $name(self.0 - o.0)
            }
        }
        impl<T: Real> Mul for $name<T> {
            type Output = Self;
            #[inline]
            fn mul(self, o: Self) -> Self {
                $name(self.0 * o.0)
            }
        }
        impl<T: Real> Div for $name<T> {
            type Output = Self;
            #[inline]
            fn div(self, o: Self) -> Self {
                $name(self.0 / o.0)
            }
        }
        impl<T: Real> Neg for $name<T> {
            type Output = Self;
            #[inline]
            fn neg(self) -> Self {
                $name(-self.0)
            }
        }
    };
}

forward_ops!(Plain);

impl<T: Real> Numeric<T> for Plain<T> {
    #[inline]
    fn constant(c: T) -> Self {
        Plain(c)
    }
    #[inline]
    fn primal(self) -> T {
        self.0
    }
    #[inline]
    fn tangent(self) -> T {
        T::zero()
    }
    #[inline]
    fn abs(self) -> Self {
        Plain(self.0.abs())
    }
    #[inline]
    fn sin(self) -> Self {
        Plain(self.0.sin())
    }
    #[inline]
    fn cos(self) -> Self {
        Plain(self.0.cos())
    }
    #[inline]
    fn sqrt(self) -> Self {
        Plain(self.0.sqrt())
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        Plain(self.0.powi(n))
    }
    #[inline]
    fn powr(self, e: T, sign: PowerSign) -> Self {
        Plain(signed_pow(self.0, e, sign))
    }
    #[inline]
    fn min2(self, o: Self) -> Self {
        if o.0 < self.0 {
            o
        } else {
            self
        }
    }
    #[inline]
    fn max2(self, o: Self) -> Self {
        if o.0 > self.0 {
            o
        } else {
            self
        }
    }
}

/// Value together with a one-sided directional derivative.
///
/// Nonsmooth operations pick the branch that is active just to the right of
/// the evaluation point along the seeded direction, so `tangent` is the exact
/// one-sided derivative of piecewise-smooth expressions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub value: T,
    pub slope: T,
}

impl<T: Real> Dual<T> {
    pub fn new(value: T, slope: T) -> Self {
        Dual { value, slope }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual::new(self.value + o.value, self.slope + o.slope)
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual::new(self.value - o.value, self.slope - o.slope)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual::new(self.value * o.value, self.slope * o.value + self.value * o.slope)
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let v = self.value / o.value;
        Dual::new(v, (self.slope - v * o.slope) / o.value)
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.value, -self.slope)
    }
}

impl<T: Real> Numeric<T> for Dual<T> {
    fn constant(c: T) -> Self {
        Dual::new(c, T::zero())
    }
    fn primal(self) -> T {
        self.value
    }
    fn tangent(self) -> T {
        self.slope
    }
    fn abs(self) -> Self {
        if self.value > T::zero() {
            self
        } else if self.value < T::zero() {
            -self
        } else {
            Dual::new(T::zero(), self.slope.abs())
        }
    }
    fn sin(self) -> Self {
        Dual::new(self.value.sin(), self.slope * self.value.cos())
    }
    fn cos(self) -> Self {
        Dual::new(self.value.cos(), -self.slope * self.value.sin())
    }
    fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        let d = if self.slope == T::zero() {
            T::zero()
        } else {
            self.slope / (r + r)
        };
        Dual::new(r, d)
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Dual::new(T::one(), T::zero());
        }
        let d = if self.slope == T::zero() {
            T::zero()
        } else {
            T::lit(n as f64) * self.value.powi(n - 1) * self.slope
        };
        Dual::new(self.value.powi(n), d)
    }
    fn powr(self, e: T, sign: PowerSign) -> Self {
        let v = signed_pow(self.value, e, sign);
        let d = if self.slope == T::zero() {
            T::zero()
        } else if self.value == T::zero() {
            if e > T::one() {
                T::zero()
            } else if e == T::one() {
                self.slope
            } else {
                T::infinity() * self.slope.signum()
            }
        } else {
            // d/du sign(u)|u|^e = e |u|^(e-1) and d/du |u|^e = e sign(u) |u|^(e-1)
            let m = e * self.value.abs().powf(e - T::one());
            let m = match sign {
                PowerSign::Even => m * self.value.signum(),
                PowerSign::Odd | PowerSign::Real => m,
            };
            m * self.slope
        };
        Dual::new(v, d)
    }
    fn min2(self, o: Self) -> Self {
        if self.value < o.value {
            self
        } else if o.value < self.value {
            o
        } else {
            Dual::new(self.value, self.slope.min(o.slope))
        }
    }
    fn max2(self, o: Self) -> Self {
        if self.value > o.value {
            self
        } else if o.value > self.value {
            o
        } else {
            Dual::new(self.value, self.slope.max(o.slope))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_abs_at_kink_is_one_sided() {
        let right = Dual::new(0.0, 1.0).abs();
        let left = Dual::new(0.0, -1.0).abs();
        assert_eq!(right.slope, 1.0);
        assert_eq!(left.slope, 1.0);
    }

    #[test]
    fn odd_root_of_negative_base() {
        let v = Plain(-8.0f64).powr(1.0 / 3.0, PowerSign::Odd).0;
        assert!((v + 2.0).abs() < 1e-12);
        let d = Dual::new(-8.0, 1.0).powr(1.0 / 3.0, PowerSign::Odd);
        assert!((d.slope - 1.0 / 12.0).abs() < 1e-12);
        let e = Dual::new(-8.0, 1.0).powr(2.0 / 3.0, PowerSign::Even);
        assert!((e.value - 4.0).abs() < 1e-12);
        assert!((e.slope + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn min_tie_takes_smaller_slope() {
        let a = Dual::new(1.0, 2.0);
        let b = Dual::new(1.0, -1.0);
        assert_eq!(a.min2(b).slope, -1.0);
        assert_eq!(a.max2(b).slope, 2.0);
    }
}
