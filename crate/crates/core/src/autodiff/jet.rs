//! Second-order forward-mode jets along a single input direction.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Truncated Taylor carrier `(f, f', f'')` along one seeded input direction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub v: f64,
    pub d: f64,
    pub dd: f64,
}

impl Jet2 {
    pub const fn new(v: f64, d: f64, dd: f64) -> Self {
        Self { v, d, dd }
    }

    pub const fn constant(v: f64) -> Self {
        Self { v, d: 0.0, dd: 0.0 }
    }

    /// The seeded independent variable itself.
    pub const fn variable(v: f64) -> Self {
        Self { v, d: 1.0, dd: 0.0 }
    }

    /// Pushes the jet through a scalar function given `f(v), f'(v), f''(v)`.
    #[inline]
    pub fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        Self {
            v: f0,
            d: f1 * self.d,
            dd: f2 * self.d * self.d + f1 * self.dd,
        }
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(self.v.ln(), r, -r * r)
    }

    pub fn tanh(self) -> Self {
        let t = self.v.tanh();
        let s = 1.0 - t * t;
        self.chain(t, s, -2.0 * t * s)
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    /// `self^e` with the same conventions as the graph `pow-real` opcode:
    /// integer exponents accept any base, a zero base with `e > 1` yields an
    /// all-zero jet, everything else needs a positive base.
    pub fn powf(self, e: f64) -> Self {
        let (f0, f1, f2, _) = pow_derivs(self.v, e).unwrap_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN));
        self.chain(f0, f1, f2)
    }
}

/// Value and first three derivatives of `x^e`, or `None` outside the domain.
pub(crate) fn pow_derivs(x: f64, e: f64) -> Option<(f64, f64, f64, f64)> {
    if e == 0.0 {
        return Some((1.0, 0.0, 0.0, 0.0));
    }
    if x == 0.0 && e > 1.0 && e.fract() != 0.0 {
        return Some((0.0, 0.0, 0.0, 0.0));
    }
    if x > 0.0 || e.fract() == 0.0 {
        if x == 0.0 && e < 0.0 {
            return None;
        }
        let p = |k: f64| -> f64 {
            if e.fract() == 0.0 {
                let n = e - k;
                if n == 0.0 {
                    1.0
                } else if n < 0.0 && x == 0.0 {
                    0.0
                } else {
                    x.powi(n as i32)
                }
            } else {
                x.powf(e - k)
            }
        };
        return Some((
            p(0.0),
            e * p(1.0),
            e * (e - 1.0) * p(2.0),
            e * (e - 1.0) * (e - 2.0) * p(3.0),
        ));
    }
    None
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2::new(self.v + o.v, self.d + o.d, self.dd + o.dd)
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2::new(self.v - o.v, self.d - o.d, self.dd - o.dd)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2::new(
            self.v * o.v,
            self.d * o.v + self.v * o.d,
            self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd,
        )
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2::new(-self.v, -self.d, -self.dd)
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(self, c: f64) -> Jet2 {
        Jet2::new(self.v + c, self.d, self.dd)
    }
}

impl Sub<f64> for Jet2 {
    type Output = Jet2;
    fn sub(self, c: f64) -> Jet2 {
        Jet2::new(self.v - c, self.d, self.dd)
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, c: f64) -> Jet2 {
        Jet2::new(self.v * c, self.d * c, self.dd * c)
    }
}

impl Div<f64> for Jet2 {
    type Output = Jet2;
    fn div(self, c: f64) -> Jet2 {
        Jet2::new(self.v / c, self.d / c, self.dd / c)
    }
}
