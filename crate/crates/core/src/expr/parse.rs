//! Recursive-descent parser.
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := ('-' | '+') unary | power
//! power    := atom ('^' exponent)*
//! exponent := ('-' | '+')* (number | '(' expr ')')     -- must fold to a real literal
//! atom     := number | 'i' | 'pi' | ident | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `w`/`wb` and `p` are accepted as aliases of `z`/`zb` and `p1` for planar
//! expressions. `conj(e)` is rewritten structurally, so `conj(z)` is `zb`.

use super::{Expr, Var};
use crate::{Error, Result};

pub fn parse(text: &str) -> Result<Expr> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: &str) -> Error {
        Error::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = lhs + self.term()?;
            } else if self.eat(b'-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = lhs * self.unary()?;
            } else if self.eat(b'/') {
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            Ok(-self.unary()?)
        } else if self.eat(b'+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.atom()?;
        while self.eat(b'^') {
            let exponent = self.exponent()?;
            base = Expr::powr(base, exponent);
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let mut sign = 1.0;
        loop {
            if self.eat(b'-') {
                sign = -sign;
            } else if !self.eat(b'+') {
                break;
            }
        }
        let e = match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                e
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number()?,
            _ => {
                // parse whatever follows to report the precise problem
                self.atom()?;
                return Err(Error::NonLiteralExponent { offset: start });
            }
        };
        match e.as_const() {
            Some(c) if c.im == 0.0 => Ok(sign * c.re),
            _ => Err(Error::NonLiteralExponent { offset: start }),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .map(Expr::real)
            .map_err(|_| Error::Syntax { offset: start, message: format!("malformed number `{text}`") })
    }

    fn ident(&mut self) -> &str {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).expect("ascii")
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                let name = self.ident().to_string();
                let var = match name.as_str() {
                    "z" | "w" => Some(Var::Z),
                    "zb" | "wb" => Some(Var::Zb),
                    "t" => Some(Var::T),
                    "s" => Some(Var::S),
                    "p1" | "p" => Some(Var::P1),
                    "p2" => Some(Var::P2),
                    _ => None,
                };
                if let Some(v) = var {
                    return Ok(Expr::var(v));
                }
                match name.as_str() {
                    "i" => return Ok(Expr::i()),
                    "pi" => return Ok(Expr::real(std::f64::consts::PI)),
                    _ => {}
                }
                let func: fn(Expr) -> Expr = match name.as_str() {
                    "conj" => |e: Expr| e.conj(),
                    "sqrt" => Expr::sqrt,
                    "exp" => Expr::exp,
                    "log" => Expr::log,
                    "sin" => Expr::sin,
                    "cos" => Expr::cos,
                    "re" => Expr::re,
                    "im" => Expr::im,
                    "abs2" => Expr::abs2,
                    _ => return Err(Error::UnknownIdentifier { name, offset: start }),
                };
                if !self.eat(b'(') {
                    return Err(self.err(&format!("expected `(` after `{name}`")));
                }
                let arg = self.expr()?;
                self.expect(b')')?;
                Ok(func(arg))
            }
            Some(c) => Err(self.err(&format!("unexpected character `{}`", c as char))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Binding, Node};
    use crate::HPoint;

    #[test]
    fn single_variable() {
        assert_eq!(parse("z").unwrap(), Expr::var(Var::Z));
    }

    #[test]
    fn conj_desugars() {
        let e = parse("conj(z)*z").unwrap();
        match e.node() {
            Node::Mul(a, b) => {
                assert_eq!(*a, Expr::var(Var::Zb));
                assert_eq!(*b, Expr::var(Var::Z));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(parse("conj(zb)").unwrap(), Expr::var(Var::Z));
    }

    #[test]
    fn variable_exponent_rejected() {
        assert!(matches!(parse("z^t"), Err(Error::NonLiteralExponent { offset: 2 })));
        assert!(matches!(parse("z^(1+t)"), Err(Error::NonLiteralExponent { .. })));
        assert!(matches!(parse("z^i"), Err(Error::NonLiteralExponent { .. })));
    }

    #[test]
    fn literal_exponents() {
        let e = parse("z^(2/3)").unwrap();
        assert!(matches!(e.node(), Node::PowR(_, x) if (*x - 2.0 / 3.0).abs() < 1e-16));
        let e = parse("z^-2").unwrap();
        assert!(matches!(e.node(), Node::PowR(_, x) if *x == -2.0));
        let e = parse("z^1.5e0").unwrap();
        assert!(matches!(e.node(), Node::PowR(_, x) if *x == 1.5));
    }

    #[test]
    fn precedence() {
        let b = Binding::heis(HPoint::from_parts(2.0, 0.0, 3.0));
        let v = |s: &str| parse(s).unwrap().eval(&b).unwrap().re;
        assert_eq!(v("1 + 2*3"), 7.0);
        assert_eq!(v("t - z - 1"), 0.0);
        assert_eq!(v("12/z/3"), 2.0);
        assert_eq!(v("-z^2"), -4.0);
        assert_eq!(v("2^3^2"), 64.0);
        assert_eq!(v("-(t)^2 + 1e1"), 1.0);
        assert_eq!(v("sqrt(t*t)"), 3.0);
    }

    #[test]
    fn errors_carry_offsets() {
        assert!(matches!(parse("z + foo(1)"), Err(Error::UnknownIdentifier { offset: 4, .. })));
        assert!(matches!(parse("z + "), Err(Error::Syntax { offset: 4, .. })));
        assert!(matches!(parse("(z"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse("z z"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse("sin z"), Err(Error::Syntax { .. })));
        assert!(matches!(parse("z # 2"), Err(Error::Syntax { offset: 2, .. })));
    }

    #[test]
    fn aliases() {
        assert_eq!(parse("w*wb").unwrap(), parse("z*zb").unwrap());
        assert_eq!(parse("p").unwrap(), Expr::var(Var::P1));
    }
}
