//! Truncated Taylor series arithmetic ("jets").
//!
//! A `Jet<N>` holds the first `N` Taylor coefficients of a scalar function of
//! time around some instant. Arithmetic propagates them exactly, which gives
//! analytic higher derivatives of the flatness map and of reparameterised
//! curves without symbolic differentiation.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Jet<const N: usize>(pub [f64; N]);

impl<const N: usize> Jet<N> {
    pub fn constant(c: f64) -> Self {
        let mut a = [0.0; N];
        a[0] = c;
        Jet(a)
    }

    /// Jet from derivatives `[f, f', f'', ...]` (divides by k!).
    pub fn from_derivatives(d: &[f64]) -> Self {
        let mut a = [0.0; N];
        let mut fact = 1.0;
        for (k, slot) in a.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *slot = d.get(k).copied().unwrap_or(0.0) / fact;
        }
        Jet(a)
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// k-th time derivative.
    pub fn derivative(&self, k: usize) -> f64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.0[k] * fact
    }

    pub fn scale(self, s: f64) -> Self {
        Jet(self.0.map(|x| x * s))
    }

    pub fn sqrt(self) -> Self {
        let mut c = [0.0; N];
        c[0] = self.0[0].sqrt();
        for k in 1..N {
            let mut acc = self.0[k];
            for i in 1..k {
                acc -= c[i] * c[k - i];
            }
            c[k] = acc / (2.0 * c[0]);
        }
        Jet(c)
    }

    pub fn sin_cos(self) -> (Self, Self) {
        let mut s = [0.0; N];
        let mut c = [0.0; N];
        s[0] = self.0[0].sin();
        c[0] = self.0[0].cos();
        for k in 1..N {
            let mut ds = 0.0;
            let mut dc = 0.0;
            for i in 1..=k {
                let w = i as f64 * self.0[i];
                ds += w * c[k - i];
                dc -= w * s[k - i];
            }
            s[k] = ds / k as f64;
            c[k] = dc / k as f64;
        }
        (Jet(s), Jet(c))
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut a = self.0;
        for (x, y) in a.iter_mut().zip(o.0) {
            *x += y;
        }
        Jet(a)
    }
}

impl<const N: usize> Add<f64> for Jet<N> {
    type Output = Self;
    fn add(mut self, o: f64) -> Self {
        self.0[0] += o;
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(self) -> Self {
        Jet(self.0.map(|x| -x))
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut c = [0.0; N];
        for k in 0..N {
            for i in 0..=k {
                c[k] += self.0[i] * o.0[k - i];
            }
        }
        Jet(c)
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    fn mul(self, o: f64) -> Self {
        self.scale(o)
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let mut c = [0.0; N];
        for k in 0..N {
            let mut acc = self.0[k];
            for i in 1..=k {
                acc -= o.0[i] * c[k - i];
            }
            c[k] = acc / o.0[0];
        }
        Jet(c)
    }
}

/// Three-vector of jets.
pub(crate) type JetVec<const N: usize> = [Jet<N>; 3];

pub(crate) fn dot<const N: usize>(a: &JetVec<N>, b: &JetVec<N>) -> Jet<N> {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross<const N: usize>(a: &JetVec<N>, b: &JetVec<N>) -> JetVec<N> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn normalize<const N: usize>(a: &JetVec<N>) -> (JetVec<N>, Jet<N>) {
    let n = dot(a, a).sqrt();
    ([a[0] / n, a[1] / n, a[2] / n], n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_derivatives(f: impl Fn(f64) -> f64, x: f64, h: f64) -> [f64; 3] {
        [
            f(x),
            (f(x + h) - f(x - h)) / (2.0 * h),
            (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
        ]
    }

    #[test]
    fn composite_matches_finite_differences() {
        // g(t) = sqrt(1 + sin²(t)) · t / (2 + cos t)
        let g = |t: f64| (1.0 + t.sin().powi(2)).sqrt() * t / (2.0 + t.cos());
        let t0 = 0.37;
        let t: Jet<4> = Jet::from_derivatives(&[t0, 1.0]);
        let (s, c) = t.sin_cos();
        let j = (s * s + 1.0).sqrt() * t / (c + 2.0);
        let fd = central_derivatives(g, t0, 1e-4);
        assert!((j.derivative(0) - fd[0]).abs() < 1e-14);
        assert!((j.derivative(1) - fd[1]).abs() < 1e-7);
        assert!((j.derivative(2) - fd[2]).abs() < 1e-5);
    }

    #[test]
    fn polynomial_derivatives_exact() {
        let t: Jet<5> = Jet::from_derivatives(&[2.0, 1.0]);
        let p = t * t * t * t; // t^4
        assert_eq!(p.derivative(0), 16.0);
        assert_eq!(p.derivative(1), 32.0);
        assert_eq!(p.derivative(2), 48.0);
        assert_eq!(p.derivative(3), 48.0);
        assert_eq!(p.derivative(4), 24.0);
    }
}
