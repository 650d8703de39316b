//! Recursive-descent parser for the expression strings used in chart files
//! and on the command line, e.g. `4/(1+x1^2+x2^2)^2`.

use super::expr::{Func, ScalarExpr};
use crate::error::FieldError;

/// Maps identifiers to coordinate indices.
#[derive(Debug, Clone)]
pub enum Vars {
    /// `x1 .. x{dim}`.
    Chart { dim: usize },
    /// The single curve parameter `t`.
    Curve,
}

impl Vars {
    fn lookup(&self, ident: &str) -> Option<usize> {
        match self {
            Vars::Curve => (ident == "t").then_some(0),
            Vars::Chart { dim } => {
                let n: usize = ident.strip_prefix('x')?.parse().ok()?;
                (n >= 1 && n <= *dim).then(|| n - 1)
            }
        }
    }
}

pub fn parse(src: &str, vars: &Vars) -> Result<ScalarExpr, FieldError> {
    let mut p = Parser { src, pos: 0, vars };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    vars: &'a Vars,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> FieldError {
        FieldError::Parse { input: self.src.to_string(), pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_raw() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek_raw(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.peek_raw()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<ScalarExpr, FieldError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = lhs + self.term()?;
            } else if self.eat('-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<ScalarExpr, FieldError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = lhs * self.unary()?;
            } else if self.eat('/') {
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<ScalarExpr, FieldError> {
        if self.eat('-') {
            Ok(-self.unary()?)
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<ScalarExpr, FieldError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let at = self.pos;
        let exponent = self.unary()?;
        let Some(n) = exponent.as_const() else {
            self.pos = at;
            return Err(self.error("exponent must be a constant"));
        };
        if n.fract() == 0.0 && n.abs() <= i32::MAX as f64 {
            Ok(base.powi(n as i32))
        } else if (2.0 * n).fract() == 0.0 {
            // half-integer powers go through sqrt
            Ok(base.sqrt().powi((2.0 * n) as i32))
        } else {
            self.pos = at;
            Err(self.error("exponent must be an integer or half-integer"))
        }
    }

    fn atom(&mut self) -> Result<ScalarExpr, FieldError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while let Some(c) = self.peek_raw() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let ident = &self.src[start..self.pos];
                if let Some(f) = Func::from_name(ident) {
                    if !self.eat('(') {
                        return Err(self.error("expected '(' after function name"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.error("expected ')'"));
                    }
                    return Ok(ScalarExpr::call(f, &arg));
                }
                if ident == "pi" {
                    return Ok(ScalarExpr::constant(std::f64::consts::PI));
                }
                match self.vars.lookup(ident) {
                    Some(i) => Ok(ScalarExpr::var(i)),
                    None => {
                        self.pos = start;
                        Err(self.error(&format!("unknown identifier '{ident}'")))
                    }
                }
            }
            _ => Err(self.error("expected a number, variable, function or '('")),
        }
    }

    fn number(&mut self) -> Result<ScalarExpr, FieldError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
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
        self.pos = i;
        self.src[start..i].parse::<f64>().map(ScalarExpr::constant).map_err(|_| {
            self.pos = start;
            self.error("malformed number")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(s: &str, dim: usize) -> ScalarExpr {
        parse(s, &Vars::Chart { dim }).unwrap()
    }

    #[test]
    fn parses_round_metric_entry() {
        let e = chart("4/(1+x1^2+x2^2)^2", 2);
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 4.0);
        assert_eq!(e.eval(&[1.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn precedence_and_unary_minus() {
        assert_eq!(chart("-x1^2", 1).eval(&[3.0]).unwrap(), -9.0);
        assert_eq!(chart("2^3^2", 1).eval(&[0.0]).unwrap(), 512.0);
        assert_eq!(chart("1 - 2*3 + 8/4/2", 1).eval(&[0.0]).unwrap(), -4.0);
        assert_eq!(chart("x1^(-1)", 1).eval(&[4.0]).unwrap(), 0.25);
        assert!((chart("x1^0.5", 1).eval(&[4.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!((chart("1.5e-1*x2", 2).eval(&[0.0, 2.0]).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn functions_and_constants() {
        let e = chart("sin(pi/2) + log(exp(2)) + cosh(0) - sinh(0) + sqrt(9) + cos(0)", 1);
        assert!((e.eval(&[0.0]).unwrap() - 8.0).abs() < 1e-14);
        let t = parse("cos(t)", &Vars::Curve).unwrap();
        assert_eq!(t.eval(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse("x4", &Vars::Chart { dim: 3 }).is_err());
        assert!(parse("x0", &Vars::Chart { dim: 3 }).is_err());
        assert!(parse("(x1", &Vars::Chart { dim: 3 }).is_err());
        assert!(parse("x1^x2", &Vars::Chart { dim: 3 }).is_err());
        assert!(parse("foo(1)", &Vars::Chart { dim: 3 }).is_err());
        assert!(parse("1 2", &Vars::Chart { dim: 3 }).is_err());
    }

    #[test]
    fn display_round_trips() {
        for src in [
            "4/(1+x1^2+x2^2)^2",
            "-(x1 - x2)*exp(-x3)/(2 - x1)^(-3)",
            "x1 - (x2 - x3)",
            "x1/(x2*x3)",
            "(-2.5)*sinh(x1)^2 + 1e-30",
        ] {
            let e = chart(src, 3);
            let again = chart(&e.to_string(), 3);
            assert_eq!(e, again, "{src} -> {e}");
        }
    }
}
