//! A small expression language in one variable `x`: numbers, `+ - * / ^`,
//! `log`, `exp`, and parentheses. Expressions can be differentiated.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Log(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!("unexpected trailing input in {src:?}")));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Expr::Log(a) => a.eval(x).ln(),
            Expr::Exp(a) => a.eval(x).exp(),
        }
    }

    fn is_const(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::X => false,
            Expr::Neg(a) | Expr::Log(a) | Expr::Exp(a) => a.is_const(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.is_const() && b.is_const(),
        }
    }

    /// Symbolic derivative with respect to `x`.
    pub fn derivative(&self) -> Expr {
        use Expr::*;
        let b = |e: Expr| Box::new(e);
        match self {
            Num(_) => Num(0.0),
            X => Num(1.0),
            Neg(a) => Neg(b(a.derivative())),
            Add(p, q) => Add(b(p.derivative()), b(q.derivative())),
            Sub(p, q) => Sub(b(p.derivative()), b(q.derivative())),
            Mul(p, q) => Add(
                b(Mul(b(p.derivative()), q.clone())),
                b(Mul(p.clone(), b(q.derivative()))),
            ),
            Div(p, q) => Div(
                b(Sub(
                    b(Mul(b(p.derivative()), q.clone())),
                    b(Mul(p.clone(), b(q.derivative()))),
                )),
                b(Pow(q.clone(), b(Num(2.0)))),
            ),
            Pow(base, expo) if expo.is_const() => Mul(
                b(Mul(expo.clone(), b(Pow(base.clone(), b(Sub(expo.clone(), b(Num(1.0)))))))),
                b(base.derivative()),
            ),
            Pow(base, expo) => Mul(
                b(self.clone()),
                b(Add(
                    b(Mul(b(expo.derivative()), b(Log(base.clone())))),
                    b(Div(b(Mul(expo.clone(), b(base.derivative()))), base.clone())),
                )),
            ),
            Log(a) => Div(b(a.derivative()), a.clone()),
            Exp(a) => Mul(b(self.clone()), b(a.derivative())),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::X => write!(f, "x"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number {text:?}")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_op('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    // `^` is right-associative and binds tighter than unary minus on its left.
    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat_op('^') {
            let expo = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(expo)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.tokens.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "x" => Ok(Expr::X),
                    "log" | "exp" => {
                        if !self.eat_op('(') {
                            return Err(Error::Parse(format!("expected '(' after {name}")));
                        }
                        let inner = self.expr()?;
                        if !self.eat_op(')') {
                            return Err(Error::Parse("missing ')'".into()));
                        }
                        Ok(if name == "log" {
                            Expr::Log(Box::new(inner))
                        } else {
                            Expr::Exp(Box::new(inner))
                        })
                    }
                    _ => Err(Error::Parse(format!("unknown identifier {name:?}"))),
                }
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat_op(')') {
                    return Err(Error::Parse("missing ')'".into()));
                }
                Ok(inner)
            }
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("2*x^2 - 3*x + 1").unwrap();
        assert_eq!(e.eval(2.0), 3.0);
        assert_eq!(Expr::parse("-x^2").unwrap().eval(3.0), -9.0);
        assert_eq!(Expr::parse("2^3^2").unwrap().eval(0.0), 512.0);
        assert!((Expr::parse("log(exp(x))").unwrap().eval(0.7) - 0.7).abs() < 1e-15);
        assert_eq!(Expr::parse("1e-2*x").unwrap().eval(100.0), 1.0);
        assert!(Expr::parse("x +").is_err());
        assert!(Expr::parse("sin(x)").is_err());
        assert!(Expr::parse("(x").is_err());
    }

    #[test]
    fn derivative_of_known_forms() {
        let d = Expr::parse("x^3 + exp(2*x)").unwrap().derivative();
        let x: f64 = 0.4;
        assert!((d.eval(x) - (3.0 * x * x + 2.0 * (2.0 * x).exp())).abs() < 1e-12);
        let d = Expr::parse("x^x").unwrap().derivative();
        assert!((d.eval(x) - x.powf(x) * (x.ln() + 1.0)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn derivative_agrees_with_central_difference(
            a in -2.0f64..2.0, b in -2.0f64..2.0, x in 0.1f64..0.9
        ) {
            let src = format!("{a}*x^2/(1 + x) + {b}*log(1 + x) - exp({a}*x)");
            let e = Expr::parse(&src).unwrap();
            let h = 1e-5;
            let fd = (e.eval(x + h) - e.eval(x - h)) / (2.0 * h);
            prop_assert!((e.derivative().eval(x) - fd).abs() < 1e-6);
        }
    }
}
