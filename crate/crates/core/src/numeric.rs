//! Scalar abstraction used by the closed-form evaluators.
//!
//! Antiderivative expressions are evaluated generically so the same code path
//! can run on plain `f64` and on [`HyperDual`] numbers, which carry exact first
//! and mixed second derivatives through every operation.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Minimal real-number interface needed by the expression evaluators.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn re(self) -> f64;
    fn sqrt(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn abs(self) -> Self;

    fn scale(self, k: f64) -> Self {
        self * Self::from_f64(k)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn re(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
}

/// Hyper-dual number `v + d1 e1 + d2 e2 + d12 e1 e2` with `e1² = e2² = 0`.
///
/// Seeding `x = HyperDual::new(x0, 1, 0, 0)` and `y = HyperDual::new(y0, 0, 1, 0)`
/// makes `f(x, y).d12` equal to `∂²f/∂x∂y` at `(x0, y0)` without truncation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperDual {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
}

impl HyperDual {
    pub const fn new(v: f64, d1: f64, d2: f64, d12: f64) -> Self {
        Self { v, d1, d2, d12 }
    }

    pub const fn constant(v: f64) -> Self {
        Self::new(v, 0.0, 0.0, 0.0)
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        Self {
            v: f0,
            d1: f1 * self.d1,
            d2: f1 * self.d2,
            d12: f1 * self.d12 + f2 * self.d1 * self.d2,
        }
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2, self.d12 + o.d12)
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2, self.d12 - o.d12)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.v * o.v,
            self.v * o.d1 + self.d1 * o.v,
            self.v * o.d2 + self.d2 * o.v,
            self.v * o.d12 + self.d1 * o.d2 + self.d2 * o.d1 + self.d12 * o.v,
        )
    }
}

impl Div for HyperDual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        self * o.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.v, -self.d1, -self.d2, -self.d12)
    }
}

impl Scalar for HyperDual {
    fn from_f64(v: f64) -> Self {
        Self::constant(v)
    }
    fn re(self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::constant(1.0);
        }
        if n == 1 {
            return self;
        }
        let nf = n as f64;
        let f0 = self.v.powi(n);
        let f1 = nf * self.v.powi(n - 1);
        let f2 = nf * (nf - 1.0) * self.v.powi(n - 2);
        self.chain(f0, f1, f2)
    }
    fn abs(self) -> Self {
        if self.v < 0.0 {
            -self
        } else {
            self
        }
    }
    fn scale(self, k: f64) -> Self {
        Self::new(self.v * k, self.d1 * k, self.d2 * k, self.d12 * k)
    }
}

/// Binomial coefficient as a float; exact for the small arguments used here.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Generalized binomial coefficient `C(e, k)` for real `e`.
pub fn gen_binomial(e: f64, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc *= (e - i as f64) / (i + 1) as f64;
    }
    acc
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperdual_mixed_partial_of_product() {
        let x = HyperDual::new(1.5, 1.0, 0.0, 0.0);
        let y = HyperDual::new(-0.7, 0.0, 1.0, 0.0);
        // f = x^2 y^3 / sqrt(x^2+y^2); mixed partial checked by central differences
        let f = |x: HyperDual, y: HyperDual| x.powi(2) * y.powi(3) / (x * x + y * y).sqrt();
        let g = |x: f64, y: f64| x * x * y.powi(3) / (x * x + y * y).sqrt();
        let h = 1e-4;
        let fd = (g(1.5 + h, -0.7 + h) - g(1.5 + h, -0.7 - h) - g(1.5 - h, -0.7 + h)
            + g(1.5 - h, -0.7 - h))
            / (4.0 * h * h);
        let v = f(x, y);
        assert!((v.d12 - fd).abs() < 1e-6 * fd.abs().max(1.0));
        assert!((v.v - g(1.5, -0.7)).abs() < 1e-15);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 2), 15.0);
        assert!((gen_binomial(-0.5, 2) - 0.375).abs() < 1e-16);
        assert!((gen_binomial(-1.5, 2) - 1.875).abs() < 1e-16);
    }
}
