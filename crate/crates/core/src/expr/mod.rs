//! Map expressions in `x` and `mu`: parsing, printing and evaluation.

mod eval;
mod mapspec;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

pub use eval::{Dual, EvalError};
pub use mapspec::{MapConfig, MapSpec, SpecError, DEFAULT_TRUST_MU, DEFAULT_TRUST_X};
pub use parse::{parse, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Exp,
        Func::Log,
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

/// Expression tree. Literals produced by the parser are non-negative; a
/// leading minus is always a [`Expr::Neg`] node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Mu,
    Param(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Expr {
    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::Neg(Box::new(e))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Num(v) if *v < 0.0 => PREC_NEG,
            Expr::Num(_) | Expr::X | Expr::Mu | Expr::Param(_) | Expr::Call(..) => PREC_ATOM,
            Expr::Neg(_) => PREC_NEG,
            Expr::Bin(op, ..) => op.precedence(),
            Expr::Pow(..) => PREC_POW,
        }
    }

    /// Top-level terms of a sum, with subtraction kept as negation.
    pub fn summands(&self) -> Vec<Expr> {
        match self {
            Expr::Bin(BinOp::Add, l, r) => {
                let mut out = l.summands();
                out.push((**r).clone());
                out
            }
            Expr::Bin(BinOp::Sub, l, r) => {
                let mut out = l.summands();
                out.push(Expr::neg((**r).clone()));
                out
            }
            other => vec![other.clone()],
        }
    }

    /// Names of free parameters, sorted.
    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Param(name) = e {
                out.insert(name.clone());
            }
        });
        out
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.visit(f),
            Expr::Bin(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Num(_) | Expr::X | Expr::Mu | Expr::Param(_) => {}
        }
    }

    /// Replaces every leaf for which `f` returns `Some`.
    pub fn substitute(&self, f: &impl Fn(&Expr) -> Option<Expr>) -> Expr {
        if let Some(e) = f(self) {
            return e;
        }
        match self {
            Expr::Neg(a) => Expr::neg(a.substitute(f)),
            Expr::Pow(a, n) => Expr::Pow(Box::new(a.substitute(f)), *n),
            Expr::Call(func, a) => Expr::Call(*func, Box::new(a.substitute(f))),
            Expr::Bin(op, a, b) => Expr::bin(*op, a.substitute(f), b.substitute(f)),
            leaf => leaf.clone(),
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 => write!(f, "-{}", -v),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::X => write!(f, "x"),
            Expr::Mu => write!(f, "mu"),
            Expr::Param(name) => write!(f, "{name}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_child(f, a.precedence() < PREC_NEG)
            }
            Expr::Bin(op, a, b) => {
                let p = op.precedence();
                a.fmt_child(f, a.precedence() < p)?;
                write!(f, "{}", op.symbol())?;
                b.fmt_child(f, b.precedence() <= p)
            }
            Expr::Pow(a, n) => {
                a.fmt_child(f, a.precedence() <= PREC_POW)?;
                write!(f, "^{n}")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
