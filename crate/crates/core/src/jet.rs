//! Second-order forward-mode numbers.
//!
//! A [`Jet2`] carries a value together with its first partial derivatives and
//! the diagonal of its Hessian with respect to `D` input coordinates. Mixed
//! partials are never formed: every operator in the benchmark set only needs
//! `∂u/∂x_i` and `∂²u/∂x_i²`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2<const D: usize> {
    pub value: f64,
    pub first: [f64; D],
    pub second: [f64; D],
}

impl<const D: usize> Jet2<D> {
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            first: [0.0; D],
            second: [0.0; D],
        }
    }

    /// The input coordinate `x_i` itself.
    pub fn variable(value: f64, i: usize) -> Self {
        let mut first = [0.0; D];
        first[i] = 1.0;
        Self {
            value,
            first,
            second: [0.0; D],
        }
    }

    /// Compose with a scalar function given its value and first two derivatives at `self.value`.
    pub fn compose(self, f: f64, df: f64, d2f: f64) -> Self {
        let mut out = Self::constant(f);
        for i in 0..D {
            let g = self.first[i];
            out.first[i] = df * g;
            out.second[i] = d2f * g * g + df * self.second[i];
        }
        out
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose(c, -s, -c)
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        let d1 = 1.0 - t * t;
        self.compose(t, d1, -2.0 * t * d1)
    }

    pub fn square(self) -> Self {
        self * self
    }

    pub fn scale(self, c: f64) -> Self {
        let mut out = self;
        out.value *= c;
        for i in 0..D {
            out.first[i] *= c;
            out.second[i] *= c;
        }
        out
    }
}

impl<const D: usize> Add for Jet2<D> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const D: usize> AddAssign for Jet2<D> {
    fn add_assign(&mut self, rhs: Self) {
        self.value += rhs.value;
        for i in 0..D {
            self.first[i] += rhs.first[i];
            self.second[i] += rhs.second[i];
        }
    }
}

impl<const D: usize> Sub for Jet2<D> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<const D: usize> Neg for Jet2<D> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const D: usize> Mul for Jet2<D> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::constant(self.value * rhs.value);
        for i in 0..D {
            out.first[i] = self.first[i] * rhs.value + self.value * rhs.first[i];
            out.second[i] =
                self.second[i] * rhs.value + 2.0 * self.first[i] * rhs.first[i] + self.value * rhs.second[i];
        }
        out
    }
}

impl<const D: usize> Add<f64> for Jet2<D> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.value += rhs;
        self
    }
}

impl<const D: usize> Sub<f64> for Jet2<D> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.value -= rhs;
        self
    }
}

impl<const D: usize> Mul<f64> for Jet2<D> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

impl<const D: usize> Add<Jet2<D>> for f64 {
    type Output = Jet2<D>;
    fn add(self, rhs: Jet2<D>) -> Jet2<D> {
        rhs + self
    }
}

impl<const D: usize> Sub<Jet2<D>> for f64 {
    type Output = Jet2<D>;
    fn sub(self, rhs: Jet2<D>) -> Jet2<D> {
        (-rhs) + self
    }
}

impl<const D: usize> Mul<Jet2<D>> for f64 {
    type Output = Jet2<D>;
    fn mul(self, rhs: Jet2<D>) -> Jet2<D> {
        rhs.scale(self)
    }
}

/// Numbers the network forward pass can be evaluated on.
pub trait Scalar: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn from_f64(c: f64) -> Self;
    fn value(&self) -> f64;
    /// `tanh(a * self)`
    fn tanh_scaled(self, a: f64) -> Self;
}

impl Scalar for f64 {
    fn from_f64(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn tanh_scaled(self, a: f64) -> Self {
        (a * self).tanh()
    }
}

impl<const D: usize> Scalar for Jet2<D> {
    fn from_f64(c: f64) -> Self {
        Self::constant(c)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn tanh_scaled(self, a: f64) -> Self {
        self.scale(a).tanh()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
        let (fp, f0, fm) = (f(x + h), f(x), f(x - h));
        ((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
    }

    #[test]
    fn variable_seeds_unit_first_derivative() {
        let x = Jet2::<3>::variable(0.3, 1);
        assert_eq!(x.first, [0.0, 1.0, 0.0]);
        assert_eq!(x.second, [0.0; 3]);
    }

    #[test]
    fn composition_matches_finite_differences() {
        let f = |x: f64| (x * x).sin() * (0.5 * x).tanh() + 3.0 * x;
        let x0 = 0.7;
        let x = Jet2::<1>::variable(x0, 0);
        let jet = (x * x).sin() * (x * 0.5).tanh() + x * 3.0;
        let (d1, d2) = fd2(f, x0, 1e-4);
        assert!((jet.value - f(x0)).abs() < 1e-15);
        assert!((jet.first[0] - d1).abs() < 1e-7);
        assert!((jet.second[0] - d2).abs() < 1e-5);
    }

    #[test]
    fn product_rule_in_two_variables() {
        // u = x^2 * cos(y): u_xx = 2cos(y), u_yy = -x^2 cos(y)
        let (xv, yv) = (0.4, -1.1);
        let x = Jet2::<2>::variable(xv, 0);
        let y = Jet2::<2>::variable(yv, 1);
        let u = x * x * y.cos();
        assert!((u.first[0] - 2.0 * xv * yv.cos()).abs() < 1e-15);
        assert!((u.first[1] + xv * xv * yv.sin()).abs() < 1e-15);
        assert!((u.second[0] - 2.0 * yv.cos()).abs() < 1e-15);
        assert!((u.second[1] + xv * xv * yv.cos()).abs() < 1e-15);
    }
}
