use std::collections::HashMap;

use thiserror::Error;

use super::{BinOp, Constant, Expr, Func};
use crate::numbers::{BiComplex, Complex, Tolerance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable '{0}'")]
    UnboundVariable(String),
    #[error("division by the zero divisor {0}")]
    NonInvertibleDivisor(String),
}

/// Value of a constant in idempotent component `index`.
pub(super) fn constant_component(c: Constant, index: usize) -> Complex {
    let first = index == 0;
    match c {
        Constant::I1 => Complex::new(0.0, 1.0),
        Constant::I2 => Complex::new(0.0, if first { -1.0 } else { 1.0 }),
        Constant::J => Complex::new(if first { 1.0 } else { -1.0 }, 0.0),
        Constant::E1 => Complex::new(if first { 1.0 } else { 0.0 }, 0.0),
        Constant::E2 => Complex::new(if first { 0.0 } else { 1.0 }, 0.0),
        Constant::Pi => Complex::new(std::f64::consts::PI, 0.0),
    }
}

pub(super) fn apply(f: Func, z: Complex) -> Complex {
    match f {
        Func::Exp => z.exp(),
        Func::Sin => z.sin(),
        Func::Cos => z.cos(),
        Func::Conj => z.conj(),
        Func::Re => Complex::new(z.re, 0.0),
        Func::Im => Complex::new(z.im, 0.0),
    }
}

/// Evaluates over bicomplex numbers using bicomplex arithmetic.
pub fn eval_with<L>(e: &Expr, lookup: &L) -> Result<BiComplex, EvalError>
where
    L: Fn(&str) -> Option<BiComplex> + ?Sized,
{
    let tol = Tolerance::default();
    Ok(match e {
        Expr::Num(x) => BiComplex::from_real(*x),
        Expr::Const(c) => BiComplex::from_idempotent(constant_component(*c, 0), constant_component(*c, 1)),
        Expr::Var(v) => lookup(v).ok_or_else(|| EvalError::UnboundVariable(v.clone()))?,
        Expr::Neg(a) => -eval_with(a, lookup)?,
        Expr::Binary(op, a, b) => {
            let (x, y) = (eval_with(a, lookup)?, eval_with(b, lookup)?);
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x
                    .checked_div(y, tol)
                    .map_err(|_| EvalError::NonInvertibleDivisor(y.to_idempotent_string()))?,
            }
        }
        Expr::Pow(a, n) => {
            let x = eval_with(a, lookup)?;
            if *n < 0 {
                x.inverse(tol)
                    .map_err(|_| EvalError::NonInvertibleDivisor(x.to_idempotent_string()))?
                    .powi(-n)
            } else {
                x.powi(*n)
            }
        }
        Expr::Call(f, a) => {
            let x = eval_with(a, lookup)?;
            BiComplex::from_idempotent(apply(*f, x.w1), apply(*f, x.w2))
        }
        Expr::Idem(a, b) => {
            let (x, y) = (eval_with(a, lookup)?, eval_with(b, lookup)?);
            BiComplex::E1 * x + BiComplex::E2 * y
        }
    })
}

/// Evaluates with bindings from a map.
pub fn eval(e: &Expr, env: &HashMap<String, BiComplex>) -> Result<BiComplex, EvalError> {
    eval_with(e, &|name: &str| env.get(name).copied())
}

pub(super) fn invert(z: Complex) -> Result<Complex, EvalError> {
    if z.norm() <= Tolerance::default().eps() {
        Err(EvalError::NonInvertibleDivisor(crate::numbers::fmt_complex(z)))
    } else {
        Ok(z.inv())
    }
}

/// Evaluates idempotent component `index` alone, over complex scalars.
pub fn eval_component<L>(e: &Expr, index: usize, lookup: &L) -> Result<Complex, EvalError>
where
    L: Fn(&str) -> Option<Complex> + ?Sized,
{
    Ok(match e {
        Expr::Num(x) => Complex::new(*x, 0.0),
        Expr::Const(c) => constant_component(*c, index),
        Expr::Var(v) => lookup(v).ok_or_else(|| EvalError::UnboundVariable(v.clone()))?,
        Expr::Neg(a) => -eval_component(a, index, lookup)?,
        Expr::Binary(op, a, b) => {
            let x = eval_component(a, index, lookup)?;
            let y = eval_component(b, index, lookup)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x * invert(y)?,
            }
        }
        Expr::Pow(a, n) => {
            let x = eval_component(a, index, lookup)?;
            if *n < 0 {
                invert(x)?.powi(-n)
            } else {
                x.powi(*n)
            }
        }
        Expr::Call(f, a) => apply(*f, eval_component(a, index, lookup)?),
        Expr::Idem(a, b) => eval_component(if index == 0 { a } else { b }, index, lookup)?,
    })
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(x) if *x == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(x) if *x == 1.0)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (is_zero(&a), is_zero(&b)) {
        (true, _) => b,
        (_, true) => a,
        _ => Expr::binary(BinOp::Add, a, b),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (is_zero(&a), is_zero(&b)) {
        (_, true) => a,
        (true, _) => Expr::neg(b),
        _ => Expr::binary(BinOp::Sub, a, b),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        Expr::Num(0.0)
    } else if is_one(&a) {
        b
    } else if is_one(&b) {
        a
    } else {
        Expr::binary(BinOp::Mul, a, b)
    }
}

/// Symbolic derivative with respect to `var`.
///
/// `conj`, `re` and `im` are differentiated as linear maps, which is exact
/// when `var` ranges over real numbers (path parameters).
pub fn derivative(e: &Expr, var: &str) -> Expr {
    match e {
        Expr::Num(_) | Expr::Const(_) => Expr::Num(0.0),
        Expr::Var(v) => Expr::Num(if v == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => {
            let da = derivative(a, var);
            if is_zero(&da) {
                da
            } else {
                Expr::neg(da)
            }
        }
        Expr::Binary(op, a, b) => {
            let (da, db) = (derivative(a, var), derivative(b, var));
            let (a, b) = ((**a).clone(), (**b).clone());
            match op {
                BinOp::Add => add(da, db),
                BinOp::Sub => sub(da, db),
                BinOp::Mul => add(mul(da, b), mul(a, db)),
                BinOp::Div => {
                    if is_zero(&db) {
                        Expr::binary(BinOp::Div, da, b)
                    } else {
                        Expr::binary(
                            BinOp::Div,
                            sub(mul(da, b.clone()), mul(a, db)),
                            Expr::pow(b, 2),
                        )
                    }
                }
            }
        }
        Expr::Pow(a, n) => {
            let da = derivative(a, var);
            if *n == 0 || is_zero(&da) {
                return Expr::Num(0.0);
            }
            let lowered = if *n == 2 { (**a).clone() } else { Expr::pow((**a).clone(), n - 1) };
            mul(mul(Expr::Num(*n as f64), lowered), da)
        }
        Expr::Call(f, a) => {
            let da = derivative(a, var);
            if is_zero(&da) {
                return da;
            }
            let a = (**a).clone();
            match f {
                Func::Exp => mul(Expr::call(Func::Exp, a), da),
                Func::Sin => mul(Expr::call(Func::Cos, a), da),
                Func::Cos => mul(Expr::neg(Expr::call(Func::Sin, a)), da),
                Func::Conj | Func::Re | Func::Im => Expr::call(*f, da),
            }
        }
        Expr::Idem(a, b) => Expr::Idem(
            Box::new(derivative(a, var)),
            Box::new(derivative(b, var)),
        ),
    }
}
