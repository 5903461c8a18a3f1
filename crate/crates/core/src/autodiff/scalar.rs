//! Arithmetic abstraction shared by plain reals, jets and graph nodes, so
//! residual formulas are written once and evaluated in any of the three.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::graph::{Expr, Op};
use super::jet::Jet2;

pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A constant living in the same context as `self`.
    fn lift(&self, c: f64) -> Self;
    fn powf(&self, e: f64) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn tanh(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }

    /// `c - self`.
    fn rsub(&self, c: f64) -> Self {
        -self.clone() + c
    }
}

impl Scalar for f64 {
    fn lift(&self, c: f64) -> f64 {
        c
    }
    fn powf(&self, e: f64) -> f64 {
        f64::powf(*self, e)
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn tanh(&self) -> f64 {
        f64::tanh(*self)
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
}

impl Scalar for Jet2 {
    fn lift(&self, c: f64) -> Jet2 {
        Jet2::constant(c)
    }
    fn powf(&self, e: f64) -> Jet2 {
        Jet2::powf(*self, e)
    }
    fn exp(&self) -> Jet2 {
        Jet2::exp(*self)
    }
    fn ln(&self) -> Jet2 {
        Jet2::ln(*self)
    }
    fn tanh(&self) -> Jet2 {
        Jet2::tanh(*self)
    }
    fn sin(&self) -> Jet2 {
        Jet2::sin(*self)
    }
    fn cos(&self) -> Jet2 {
        Jet2::cos(*self)
    }
}

impl Scalar for Expr {
    fn lift(&self, c: f64) -> Expr {
        self.push(Op::Const(c))
    }
    fn powf(&self, e: f64) -> Expr {
        self.push(Op::PowReal(self.id(), e))
    }
    fn exp(&self) -> Expr {
        self.push(Op::Exp(self.id()))
    }
    fn ln(&self) -> Expr {
        self.push(Op::Log(self.id()))
    }
    fn tanh(&self) -> Expr {
        self.push(Op::Tanh(self.id()))
    }
    fn sin(&self) -> Expr {
        self.push(Op::Sin(self.id()))
    }
    fn cos(&self) -> Expr {
        self.push(Op::Cos(self.id()))
    }
}

macro_rules! expr_binop {
    ($tr:ident, $m:ident, $op:ident) => {
        impl $tr for Expr {
            type Output = Expr;
            fn $m(self, o: Expr) -> Expr {
                self.binary(&o, Op::$op)
            }
        }
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, o: &Expr) -> Expr {
                self.binary(o, Op::$op)
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, c: f64) -> Expr {
                let k = self.lift(c);
                self.binary(&k, Op::$op)
            }
        }
    };
}

expr_binop!(Add, add, Add);
expr_binop!(Sub, sub, Sub);
expr_binop!(Mul, mul, Mul);
expr_binop!(Div, div, Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.push(Op::Neg(self.id()))
    }
}
