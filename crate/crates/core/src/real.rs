//! Scalar types the numeric kernels are generic over.
//!
//! Every geometric quantity is computed by code generic over [`Real`]. Running
//! that code with [`Grad`] instead of `f64` yields the exact first partials of
//! the quantity alongside its value, which is how one more derivative order is
//! obtained than the symbolic caches hold (∂P, ∂Ω, ∇𝕂, ...).

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Largest chart dimension supported by [`Grad`].
pub const MAX_DIM: usize = 8;

pub trait Real:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
{
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn powi(self, n: i32) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn one() -> Self {
        Self::cst(1.0)
    }
    fn scale(self, s: f64) -> Self {
        self * Self::cst(s)
    }
    /// True when value and every carried derivative is finite.
    fn is_finite(self) -> bool;
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    #[inline]
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

/// Forward-mode dual number carrying a gradient with up to [`MAX_DIM`] slots.
#[derive(Clone, Copy, PartialEq)]
pub struct Grad {
    pub v: f64,
    pub d: [f64; MAX_DIM],
}

impl Grad {
    pub fn constant(v: f64) -> Self {
        Grad { v, d: [0.0; MAX_DIM] }
    }

    /// The coordinate function `x^axis` evaluated at `v`.
    pub fn variable(v: f64, axis: usize) -> Self {
        let mut d = [0.0; MAX_DIM];
        d[axis] = 1.0;
        Grad { v, d }
    }

    /// Seeds a whole point: component `i` gets unit derivative in slot `i`.
    pub fn seed(p: &[f64]) -> Vec<Grad> {
        assert!(p.len() <= MAX_DIM, "dimension {} exceeds MAX_DIM", p.len());
        p.iter().enumerate().map(|(i, &x)| Grad::variable(x, i)).collect()
    }

    #[inline]
    pub fn dx(&self, axis: usize) -> f64 {
        self.d[axis]
    }

    #[inline]
    fn chain(self, v: f64, dv: f64) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x *= dv;
        }
        Grad { v, d }
    }
}

impl fmt::Debug for Grad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grad({}, {:?})", self.v, &self.d)
    }
}

impl Add for Grad {
    type Output = Grad;
    #[inline]
    fn add(mut self, o: Grad) -> Grad {
        self.v += o.v;
        for i in 0..MAX_DIM {
            self.d[i] += o.d[i];
        }
        self
    }
}

impl Sub for Grad {
    type Output = Grad;
    #[inline]
    fn sub(mut self, o: Grad) -> Grad {
        self.v -= o.v;
        for i in 0..MAX_DIM {
            self.d[i] -= o.d[i];
        }
        self
    }
}

impl Mul for Grad {
    type Output = Grad;
    #[inline]
    fn mul(self, o: Grad) -> Grad {
        let mut d = [0.0; MAX_DIM];
        for (i, x) in d.iter_mut().enumerate() {
            *x = self.d[i] * o.v + self.v * o.d[i];
        }
        Grad { v: self.v * o.v, d }
    }
}

impl Div for Grad {
    type Output = Grad;
    #[inline]
    fn div(self, o: Grad) -> Grad {
        let inv = 1.0 / o.v;
        let q = self.v * inv;
        let mut d = [0.0; MAX_DIM];
        for (i, x) in d.iter_mut().enumerate() {
            *x = (self.d[i] - q * o.d[i]) * inv;
        }
        Grad { v: q, d }
    }
}

impl Neg for Grad {
    type Output = Grad;
    #[inline]
    fn neg(mut self) -> Grad {
        self.v = -self.v;
        for x in self.d.iter_mut() {
            *x = -*x;
        }
        self
    }
}

impl AddAssign for Grad {
    #[inline]
    fn add_assign(&mut self, o: Grad) {
        *self = *self + o;
    }
}

impl SubAssign for Grad {
    #[inline]
    fn sub_assign(&mut self, o: Grad) {
        *self = *self - o;
    }
}

impl MulAssign for Grad {
    #[inline]
    fn mul_assign(&mut self, o: Grad) {
        *self = *self * o;
    }
}

impl Real for Grad {
    #[inline]
    fn cst(v: f64) -> Self {
        Grad::constant(v)
    }
    #[inline]
    fn value(self) -> f64 {
        self.v
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn sinh(self) -> Self {
        self.chain(self.v.sinh(), self.v.cosh())
    }
    fn cosh(self) -> Self {
        self.chain(self.v.cosh(), self.v.sinh())
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Grad::constant(1.0);
        }
        let p = self.v.powi(n - 1);
        self.chain(p * self.v, n as f64 * p)
    }
    fn is_finite(self) -> bool {
        self.v.is_finite() && self.d.iter().all(|x| x.is_finite())
    }
}
