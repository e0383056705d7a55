use super::eval::{apply, constant_component, invert};
use super::{BinOp, Expr, Func};
use crate::expr::EvalError;
use crate::numbers::Complex;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Lit(Complex),
    Var,
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
}

/// One idempotent component of an expression in a single variable, with
/// constant subexpressions folded. Evaluates exactly like `eval_component`.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    root: Node,
}

impl Compiled {
    pub fn new(e: &Expr, index: usize, var: &str) -> Result<Self, EvalError> {
        Ok(Self {
            root: build(e, index, var)?,
        })
    }

    pub fn eval(&self, w: Complex) -> Result<Complex, EvalError> {
        run(&self.root, w)
    }
}

fn lit(n: &Node) -> Option<Complex> {
    match n {
        Node::Lit(z) => Some(*z),
        _ => None,
    }
}

fn build(e: &Expr, index: usize, var: &str) -> Result<Node, EvalError> {
    let node = match e {
        Expr::Num(x) => Node::Lit(Complex::new(*x, 0.0)),
        Expr::Const(c) => Node::Lit(constant_component(*c, index)),
        Expr::Var(v) if v == var => Node::Var,
        Expr::Var(v) => return Err(EvalError::UnboundVariable(v.clone())),
        Expr::Neg(a) => Node::Neg(Box::new(build(a, index, var)?)),
        Expr::Binary(op, a, b) => Node::Binary(*op, Box::new(build(a, index, var)?), Box::new(build(b, index, var)?)),
        Expr::Pow(a, n) => Node::Pow(Box::new(build(a, index, var)?), *n),
        Expr::Call(f, a) => Node::Call(*f, Box::new(build(a, index, var)?)),
        Expr::Idem(a, b) => return build(if index == 0 { a } else { b }, index, var),
    };
    let constant = match &node {
        Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => lit(a).is_some(),
        Node::Binary(_, a, b) => lit(a).is_some() && lit(b).is_some(),
        _ => false,
    };
    // a constant that fails to evaluate keeps failing at evaluation time
    Ok(match constant.then(|| run(&node, Complex::new(0.0, 0.0))) {
        Some(Ok(z)) => Node::Lit(z),
        _ => node,
    })
}

fn run(n: &Node, w: Complex) -> Result<Complex, EvalError> {
    Ok(match n {
        Node::Lit(z) => *z,
        Node::Var => w,
        Node::Neg(a) => -run(a, w)?,
        Node::Binary(op, a, b) => {
            let (x, y) = (run(a, w)?, run(b, w)?);
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x * invert(y)?,
            }
        }
        Node::Pow(a, k) => {
            let x = run(a, w)?;
            if *k < 0 {
                invert(x)?.powi(-k)
            } else {
                x.powi(*k)
            }
        }
        Node::Call(f, a) => apply(*f, run(a, w)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval_component, parse};

    #[test]
    fn matches_tree_walk() {
        let cases = [
            "[1 + 2*i1 | 3 - i1]*z^3 - (2 + j)*z/(1 + e1) + exp(i2*z)",
            "conj(z) * re(z) - im(pi*z)^2",
            "1/(z - 1)",
            "-z^-2 + sin(z)*cos(z)",
        ];
        for text in cases {
            let e = parse(text).unwrap();
            for index in 0..2 {
                let c = Compiled::new(&e, index, "z").unwrap();
                for w in [Complex::new(0.3, -0.7), Complex::new(2.0, 1.5), Complex::new(1.0, 0.0)] {
                    let direct = eval_component(&e, index, &|_: &str| Some(w));
                    assert_eq!(c.eval(w), direct, "{text} at {w}");
                }
            }
        }
    }

    #[test]
    fn folds_constants() {
        let e = parse("[(-0.5) + 2*i1 | 3]*z + 4*(1 - i1)").unwrap();
        let c = Compiled::new(&e, 0, "z").unwrap();
        let Node::Binary(BinOp::Add, a, b) = &c.root else { panic!("{c:?}") };
        assert!(matches!(**b, Node::Lit(_)));
        assert!(matches!(**a, Node::Binary(BinOp::Mul, ref l, _) if matches!(**l, Node::Lit(_))));
    }

    #[test]
    fn constant_division_by_zero_is_deferred() {
        let e = parse("z + 1/(j - 1)").unwrap();
        let c = Compiled::new(&e, 0, "z").unwrap();
        assert!(matches!(c.eval(Complex::new(1.0, 0.0)), Err(EvalError::NonInvertibleDivisor(_))));
        assert!(c.eval(Complex::new(1.0, 0.0)).is_err());
        let c = Compiled::new(&e, 1, "z").unwrap();
        assert!(c.eval(Complex::new(1.0, 0.0)).is_ok());
    }

    #[test]
    fn unbound_variables_fail_early() {
        let e = parse("z + w").unwrap();
        assert_eq!(Compiled::new(&e, 0, "z"), Err(EvalError::UnboundVariable("w".into())));
    }
}
