use thiserror::Error;

use super::{BinOp, Expr, Func};
use crate::jet::{Jet2, JetError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unbound parameter '{0}'")]
    Unbound(String),
    #[error("{func} undefined at {arg}")]
    Domain { func: &'static str, arg: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite value")]
    NonFinite,
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Value plus first derivative along one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn new(v: f64, d: f64) -> Self {
        Self { v, d }
    }
}

/// Number system an expression can be evaluated in.
pub(crate) trait Algebra {
    type V: Clone;
    fn num(&self, c: f64) -> Self::V;
    fn x(&self) -> Self::V;
    fn mu(&self) -> Self::V;
    fn neg(&self, a: Self::V) -> Self::V;
    fn add(&self, a: Self::V, b: Self::V) -> Self::V;
    fn sub(&self, a: Self::V, b: Self::V) -> Self::V;
    fn mul(&self, a: Self::V, b: Self::V) -> Self::V;
    fn div(&self, a: Self::V, b: Self::V) -> Result<Self::V, EvalError>;
    fn powi(&self, a: Self::V, n: i32) -> Result<Self::V, EvalError>;
    fn call(&self, f: Func, a: Self::V) -> Result<Self::V, EvalError>;
}

pub(crate) fn eval_in<A: Algebra>(
    e: &Expr,
    alg: &A,
    param: &impl Fn(&str) -> Option<f64>,
) -> Result<A::V, EvalError> {
    Ok(match e {
        Expr::Num(c) => alg.num(*c),
        Expr::X => alg.x(),
        Expr::Mu => alg.mu(),
        Expr::Param(name) => alg.num(param(name).ok_or_else(|| EvalError::Unbound(name.clone()))?),
        Expr::Neg(a) => alg.neg(eval_in(a, alg, param)?),
        Expr::Bin(op, a, b) => {
            let a = eval_in(a, alg, param)?;
            let b = eval_in(b, alg, param)?;
            match op {
                BinOp::Add => alg.add(a, b),
                BinOp::Sub => alg.sub(a, b),
                BinOp::Mul => alg.mul(a, b),
                BinOp::Div => alg.div(a, b)?,
            }
        }
        Expr::Pow(a, n) => alg.powi(eval_in(a, alg, param)?, *n)?,
        Expr::Call(f, a) => alg.call(*f, eval_in(a, alg, param)?)?,
    })
}

fn real_call(f: Func, a: f64) -> Result<f64, EvalError> {
    let domain = |ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(EvalError::Domain { func: f.name(), arg: a })
        }
    };
    Ok(match f {
        Func::Exp => a.exp(),
        Func::Log => {
            domain(a > 0.0)?;
            a.ln()
        }
        Func::Sqrt => {
            domain(a >= 0.0)?;
            a.sqrt()
        }
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Tan => {
            domain(a.cos() != 0.0)?;
            a.tan()
        }
        Func::Sinh => a.sinh(),
        Func::Cosh => a.cosh(),
        Func::Tanh => a.tanh(),
    })
}

pub(crate) struct Real {
    pub x: f64,
    pub mu: f64,
}

impl Algebra for Real {
    type V = f64;
    fn num(&self, c: f64) -> f64 {
        c
    }
    fn x(&self) -> f64 {
        self.x
    }
    fn mu(&self) -> f64 {
        self.mu
    }
    fn neg(&self, a: f64) -> f64 {
        -a
    }
    fn add(&self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn sub(&self, a: f64, b: f64) -> f64 {
        a - b
    }
    fn mul(&self, a: f64, b: f64) -> f64 {
        a * b
    }
    fn div(&self, a: f64, b: f64) -> Result<f64, EvalError> {
        if b == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        Ok(a / b)
    }
    fn powi(&self, a: f64, n: i32) -> Result<f64, EvalError> {
        if n < 0 && a == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        Ok(a.powi(n))
    }
    fn call(&self, f: Func, a: f64) -> Result<f64, EvalError> {
        real_call(f, a)
    }
}

/// Forward-mode evaluation; `dx`/`dmu` seed the direction.
pub(crate) struct Forward {
    pub x: Dual,
    pub mu: Dual,
}

impl Algebra for Forward {
    type V = Dual;
    fn num(&self, c: f64) -> Dual {
        Dual::new(c, 0.0)
    }
    fn x(&self) -> Dual {
        self.x
    }
    fn mu(&self) -> Dual {
        self.mu
    }
    fn neg(&self, a: Dual) -> Dual {
        Dual::new(-a.v, -a.d)
    }
    fn add(&self, a: Dual, b: Dual) -> Dual {
        Dual::new(a.v + b.v, a.d + b.d)
    }
    fn sub(&self, a: Dual, b: Dual) -> Dual {
        Dual::new(a.v - b.v, a.d - b.d)
    }
    fn mul(&self, a: Dual, b: Dual) -> Dual {
        Dual::new(a.v * b.v, a.d * b.v + a.v * b.d)
    }
    fn div(&self, a: Dual, b: Dual) -> Result<Dual, EvalError> {
        if b.v == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        let q = a.v / b.v;
        Ok(Dual::new(q, (a.d - q * b.d) / b.v))
    }
    fn powi(&self, a: Dual, n: i32) -> Result<Dual, EvalError> {
        if n < 0 && a.v == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        if n == 0 {
            return Ok(Dual::new(1.0, 0.0));
        }
        Ok(Dual::new(a.v.powi(n), n as f64 * a.v.powi(n - 1) * a.d))
    }
    fn call(&self, f: Func, a: Dual) -> Result<Dual, EvalError> {
        let v = real_call(f, a.v)?;
        let slope = match f {
            Func::Exp => v,
            Func::Log => 1.0 / a.v,
            Func::Sqrt => {
                if a.v == 0.0 {
                    return Err(EvalError::Domain { func: "sqrt'", arg: 0.0 });
                }
                0.5 / v
            }
            Func::Sin => a.v.cos(),
            Func::Cos => -a.v.sin(),
            Func::Tan => 1.0 + v * v,
            Func::Sinh => a.v.cosh(),
            Func::Cosh => a.v.sinh(),
            Func::Tanh => 1.0 - v * v,
        };
        Ok(Dual::new(v, slope * a.d))
    }
}

/// Jet expansion about `(x0, mu0)`; the jet variables are the offsets.
pub(crate) struct JetAlgebra {
    pub degree: usize,
    pub x0: f64,
    pub mu0: f64,
}

impl Algebra for JetAlgebra {
    type V = Jet2;
    fn num(&self, c: f64) -> Jet2 {
        Jet2::constant(self.degree, c)
    }
    fn x(&self) -> Jet2 {
        Jet2::var_x(self.degree).add_constant(self.x0)
    }
    fn mu(&self) -> Jet2 {
        Jet2::var_mu(self.degree).add_constant(self.mu0)
    }
    fn neg(&self, a: Jet2) -> Jet2 {
        -&a
    }
    fn add(&self, a: Jet2, b: Jet2) -> Jet2 {
        &a + &b
    }
    fn sub(&self, a: Jet2, b: Jet2) -> Jet2 {
        &a - &b
    }
    fn mul(&self, a: Jet2, b: Jet2) -> Jet2 {
        &a * &b
    }
    fn div(&self, a: Jet2, b: Jet2) -> Result<Jet2, EvalError> {
        if b.constant_term() == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        Ok(a.try_div(&b)?)
    }
    fn powi(&self, a: Jet2, n: i32) -> Result<Jet2, EvalError> {
        if n < 0 && a.constant_term() == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        Ok(a.powi(n)?)
    }
    fn call(&self, f: Func, a: Jet2) -> Result<Jet2, EvalError> {
        Ok(match f {
            Func::Exp => a.exp(),
            Func::Log => a.ln()?,
            Func::Sqrt => a.sqrt()?,
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Tan => a.tan()?,
            Func::Sinh => a.sinh(),
            Func::Cosh => a.cosh(),
            Func::Tanh => a.tanh()?,
        })
    }
}
