use thiserror::Error;

use super::{BinOp, Constant, Expr, Func};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at byte {position}: expected {expected}, found {found}")]
pub struct ParseError {
    pub position: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Op(c) => format!("'{c}'"),
            Tok::End => "end of input".to_string(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i];
        if ch.is_ascii_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || (ch == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            // exponent only when digits follow, so "2*e1" never lexes as a number
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value = text.parse::<f64>().map_err(|_| ParseError {
                position: start,
                expected: "number".into(),
                found: format!("'{text}'"),
            })?;
            out.push((start, Tok::Num(value)));
        } else if ch.is_ascii_alphabetic() || ch == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if b"+-*/^()[]|".contains(&ch) {
            out.push((i, Tok::Op(ch as char)));
            i += 1;
        } else {
            let found = src[i..].chars().next().unwrap_or('?');
            return Err(ParseError {
                position: i,
                expected: "operand or operator".into(),
                found: format!("'{found}'"),
            });
        }
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError {
            position: self.offset(),
            expected: expected.to_string(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, op: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Op(op) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&format!("'{op}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.factor()?);
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::neg(self.factor()?));
        }
        let base = self.atom()?;
        if *self.peek() != Tok::Op('^') {
            return Ok(base);
        }
        self.bump();
        let negative = *self.peek() == Tok::Op('-');
        if negative {
            self.bump();
        }
        match self.peek().clone() {
            Tok::Num(x) if x.fract() == 0.0 && x <= i32::MAX as f64 => {
                self.bump();
                let n = x as i32;
                Ok(Expr::pow(base, if negative { -n } else { n }))
            }
            _ => Err(self.error("integer exponent")),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr::Num(x))
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(c) = Constant::from_name(&name) {
                    return Ok(Expr::Const(c));
                }
                if let Some(func) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::call(func, arg));
                }
                Ok(Expr::Var(name))
            }
            Tok::Op('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op('[') => {
                self.bump();
                let a = self.expr()?;
                self.expect('|')?;
                let b = self.expr()?;
                self.expect(']')?;
                Ok(Expr::Idem(Box::new(a), Box::new(b)))
            }
            _ => Err(self.error("operand")),
        }
    }
}

/// Parses one expression; trailing input is an error.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error("operator or end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(s: &str) -> Expr {
        Expr::Var(s.into())
    }

    #[test]
    fn smoke() {
        let e = parse("z^2/2").unwrap();
        assert_eq!(
            e,
            Expr::binary(BinOp::Div, Expr::pow(var("z"), 2), Expr::Num(2.0))
        );
    }

    #[test]
    fn grammar_exercise() {
        let e = parse("e1*exp(i1*t) + e2*exp(i1*s)").unwrap();
        let branch = |v: &str, c: Constant| {
            Expr::binary(
                BinOp::Mul,
                Expr::Const(c),
                Expr::call(Func::Exp, Expr::binary(BinOp::Mul, Expr::Const(Constant::I1), var(v))),
            )
        };
        assert_eq!(
            e,
            Expr::binary(BinOp::Add, branch("t", Constant::E1), branch("s", Constant::E2))
        );
    }

    #[test]
    fn dangling_operator() {
        let err = parse("z +").unwrap_err();
        assert_eq!(err.position, 3);
        assert_eq!(err.expected, "operand");
        assert_eq!(err.found, "end of input");
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse("a+b*c").unwrap();
        assert_eq!(
            e,
            Expr::binary(BinOp::Add, var("a"), Expr::binary(BinOp::Mul, var("b"), var("c")))
        );
        let e = parse("a-b-c").unwrap();
        assert_eq!(
            e,
            Expr::binary(BinOp::Sub, Expr::binary(BinOp::Sub, var("a"), var("b")), var("c"))
        );
        let err = parse("a^2^3").unwrap_err();
        assert_eq!(err.position, 3);
    }

    #[test]
    fn exponent_must_be_integer() {
        assert_eq!(parse("z^2.5").unwrap_err().expected, "integer exponent");
        assert_eq!(parse("z^-2").unwrap(), Expr::pow(var("z"), -2));
    }

    #[test]
    fn numbers() {
        assert_eq!(parse("1.5e3").unwrap(), Expr::Num(1500.0));
        assert_eq!(parse(".25").unwrap(), Expr::Num(0.25));
        // "2e1" is scientific notation; "2*e1" is the idempotent
        assert_eq!(parse("2e1").unwrap(), Expr::Num(20.0));
        assert_eq!(
            parse("2*e1").unwrap(),
            Expr::binary(BinOp::Mul, Expr::Num(2.0), Expr::Const(Constant::E1))
        );
    }

    #[test]
    fn idempotent_literal() {
        let e = parse("[1+i1 | -2]").unwrap();
        assert!(matches!(e, Expr::Idem(..)));
        assert!(parse("[1 2]").is_err());
        assert_eq!(parse("[1 | 2").unwrap_err().expected, "']'");
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse("exp z").unwrap_err();
        assert_eq!((err.position, err.expected.as_str()), (4, "'('"));
        let err = parse("1 + $").unwrap_err();
        assert_eq!(err.position, 4);
        let err = parse("(1 + 2").unwrap_err();
        assert_eq!((err.position, err.found.as_str()), (6, "end of input"));
    }
}
