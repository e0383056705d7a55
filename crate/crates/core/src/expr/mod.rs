//! A small expression language for component functions, constants and paths.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | atom ('^' integer)?
//! atom   := number | const | ident | '(' expr ')' | func '(' expr ')'
//!         | '[' expr '|' expr ']'
//! ```
//!
//! Constants are `i1 i2 j e1 e2 pi`, functions are `exp sin cos conj re im`.
//! `[a | b]` is the idempotent literal `a*e1 + b*e2`. Powers take integer
//! exponents only and do not chain.

mod compile;
mod eval;
mod parse;

use std::fmt;

pub use compile::Compiled;
pub use eval::{derivative, eval, eval_component, eval_with, EvalError};
pub use parse::{parse, ParseError};

use crate::numbers::fmt_real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constant {
    I1,
    I2,
    J,
    E1,
    E2,
    Pi,
}

impl Constant {
    fn name(self) -> &'static str {
        match self {
            Constant::I1 => "i1",
            Constant::I2 => "i2",
            Constant::J => "j",
            Constant::E1 => "e1",
            Constant::E2 => "e2",
            Constant::Pi => "pi",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "i1" => Constant::I1,
            "i2" => Constant::I2,
            "j" => Constant::J,
            "e1" => Constant::E1,
            "e2" => Constant::E2,
            "pi" => Constant::Pi,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Conj,
    Re,
    Im,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Conj => "conj",
            Func::Re => "re",
            Func::Im => "im",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "conj" => Func::Conj,
            "re" => Func::Re,
            "im" => Func::Im,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(Constant),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
    /// `[a | b]`
    Idem(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Self {
        Expr::Neg(Box::new(a))
    }

    pub fn call(f: Func, a: Expr) -> Self {
        Expr::Call(f, Box::new(a))
    }

    pub fn pow(a: Expr, n: i32) -> Self {
        Expr::Pow(Box::new(a), n)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    /// Free variable names, sorted and deduplicated.
    pub fn variables(&self) -> Vec<String> {
        fn walk(e: &Expr, out: &mut Vec<String>) {
            match e {
                Expr::Var(v) => out.push(v.clone()),
                Expr::Num(_) | Expr::Const(_) => {}
                Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => walk(a, out),
                Expr::Binary(_, a, b) | Expr::Idem(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort();
        out.dedup();
        out
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) if *x < 0.0 || x.is_sign_negative() => write!(f, "({})", fmt_real(*x)),
            Expr::Num(x) => f.write_str(&fmt_real(*x)),
            Expr::Const(c) => f.write_str(c.name()),
            Expr::Var(v) => f.write_str(v),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, a.precedence() < 3)
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                write_child(f, a, a.precedence() < p)?;
                f.write_str(op.symbol())?;
                write_child(f, b, b.precedence() <= p)
            }
            Expr::Pow(a, n) => {
                write_child(f, a, a.precedence() < 5)?;
                write!(f, "^{n}")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Idem(a, b) => write!(f, "[{a} | {b}]"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printer_minimal_parens() {
        let cases = [
            ("a+b*c", "a + b*c"),
            ("(a+b)*c", "(a + b)*c"),
            ("a-(b-c)", "a - (b - c)"),
            ("a/(b*c)", "a/(b*c)"),
            ("-z^2", "-z^2"),
            ("(-z)^2", "(-z)^2"),
            ("(a+b)^-3", "(a + b)^-3"),
            ("a*-b", "a*-b"),
            ("[1 | 2*i1]*exp(i1*t)", "[1 | 2*i1]*exp(i1*t)"),
            ("0.0001", "0.0001"), ("0.000001", "1e-6"),
            ("1e-9", "1e-9"),
        ];
        for (src, printed) in cases {
            let ast = parse(src).unwrap();
            assert_eq!(ast.to_string(), printed, "{src}");
            assert_eq!(parse(&ast.to_string()).unwrap(), ast, "{src}");
        }
    }

    #[test]
    fn variables_listed() {
        let ast = parse("e1*exp(i1*t) + e2*exp(i1*s) + t").unwrap();
        assert_eq!(ast.variables(), vec!["s".to_string(), "t".to_string()]);
    }
}
