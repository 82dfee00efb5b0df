use std::collections::BTreeMap;

use super::{Expr, Func};
use crate::error::{Error, Result};

/// Parses an expression in `x` and `xi`. The constant `pi` is predefined.
pub fn parse(text: &str) -> Result<Expr> {
    parse_with(text, &BTreeMap::new())
}

/// Parses an expression, substituting named parameters by their values.
pub fn parse_with(text: &str, params: &BTreeMap<String, f64>) -> Result<Expr> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        params,
    };
    p.skip_ws();
    if p.at_end() {
        return Err(Error::syntax(p.pos, "empty expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(Error::syntax(p.pos, format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    params: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    // Unary minus applies to a whole power, so `-x^2` is `-(x^2)`.
    fn factor(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(match self.factor()? {
                Expr::Num(v) => Expr::Num(-v),
                e => Expr::Neg(Box::new(e)),
            });
        }
        let base = self.base()?;
        if self.eat(b'^') {
            let exp = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(Error::syntax(start, "unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(Error::syntax(self.pos, "expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(Error::syntax(start, format!("unexpected `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while matches!(p.peek(), Some(c) if c.is_ascii_digit()) {
                p.pos += 1;
            }
        };
        digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                digits(self);
            } else {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| Error::syntax(start, format!("malformed number `{text}`")))
    }

    fn identifier(&mut self) -> Result<Expr> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        if let Some(f) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(Error::syntax(self.pos, format!("expected `(` after `{name}`")));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(Error::syntax(self.pos, "expected `)`"));
            }
            return Ok(Expr::Call(f, Box::new(arg)));
        }
        match name {
            "x" => Ok(Expr::X),
            "xi" => Ok(Expr::Xi),
            _ => match self.params.get(name) {
                Some(v) => Ok(Expr::Num(*v)),
                None if name == "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                None => Err(Error::UnknownIdentifier {
                    name: name.to_string(),
                    offset: start,
                }),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn precedence_and_associativity() {
        let v = |s: &str| parse(s).unwrap().eval(2.0, 3.0).unwrap();
        assert_eq!(v("1 + 2*3"), 7.0);
        assert_eq!(v("(1 + 2)*3"), 9.0);
        assert_eq!(v("-x^2"), -4.0);
        assert_eq!(v("2^-1"), 0.5);
        assert_eq!(v("x - xi - 1"), -2.0);
        assert_eq!(v("12/x/3"), 2.0);
        assert_eq!(v("1.5e1 + .5"), 15.5);
        assert_eq!(v("--x"), 2.0);
        assert!((v("pi") - std::f64::consts::PI).abs() < 1e-16);
    }

    #[test]
    fn parameters_bind_at_parse_time() {
        let mut params = BTreeMap::new();
        params.insert("lambda".to_string(), 0.1);
        let e = parse_with("xi^2 + x^2 + lambda*x^4", &params).unwrap();
        assert!((e.eval(1.0, 0.0).unwrap() - 1.1).abs() < 1e-15);
        assert!(e.to_string().contains("0.1"));
    }

    #[test]
    fn errors_report_offsets() {
        match parse("x + y") {
            Err(Error::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "y");
                assert_eq!(offset, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse(""), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse("(x + 1"), Err(Error::Syntax { offset: 6, .. })));
        assert!(matches!(parse("x + 1)"), Err(Error::Syntax { offset: 5, .. })));
        assert!(matches!(parse("exp x"), Err(Error::Syntax { .. })));
        assert!(matches!(parse("2 * * x"), Err(Error::Syntax { offset: 4, .. })));
    }

    fn leaf() -> impl Strategy<Value = String> {
        prop_oneof![
            Just("x".to_string()),
            Just("xi".to_string()),
            (-5.0f64..5.0).prop_map(|v| format!("{v}")),
            (1u32..4).prop_map(|v| v.to_string()),
        ]
    }

    fn expression() -> impl Strategy<Value = String> {
        leaf().prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                (
                    inner.clone(),
                    inner.clone(),
                    prop::sample::select(vec!["+", "-", "*", "/"])
                )
                    .prop_map(|(a, b, op)| format!("({a}) {op} ({b})")),
                (inner.clone(), 0u32..4).prop_map(|(a, n)| format!("({a})^{n}")),
                inner.clone().prop_map(|a| format!("-({a})")),
                (inner, prop::sample::select(vec!["sin", "cos", "tanh", "exp"])).prop_map(|(a, f)| format!("{f}({a})")),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_reparse_is_equivalent(src in expression(), x in -1.5f64..1.5, xi in -1.5f64..1.5) {
            let e = parse(&src).unwrap();
            let printed = e.to_string();
            let again = parse(&printed).unwrap();
            match (e.eval(x, xi), again.eval(x, xi)) {
                (Ok(a), Ok(b)) => prop_assert!(a == b || (a - b).abs() <= 1e-12 * (1.0 + a.abs()),
                    "{src} -> {printed}: {a} vs {b}"),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{src} -> {printed}: {a:?} vs {b:?}"),
            }
        }
    }
}
