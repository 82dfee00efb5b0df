//! Expression language for phase-space symbols in the variables `x` and `xi`.
//!
//! Expressions are parsed once into an [`Expr`] tree and then evaluated many
//! times: plainly ([`Expr::eval`]), with a first-order gradient
//! ([`Expr::eval_grad`]) for flow integration, or as a truncated bivariate
//! Taylor jet ([`Expr::jet`]) when higher partial derivatives are needed.
//!
//! ```
//! use semiclassical::exprjet::parse;
//!
//! let p0 = parse("xi^2 + x^4").unwrap();
//! assert_eq!(p0.eval(0.0, -1.0).unwrap(), 1.0);
//! let jet = p0.jet(1.0, 0.0).unwrap();
//! assert_eq!(jet.partial(4, 0), 24.0);
//! ```

mod jet;
mod parse;

use std::fmt;

pub use jet::{Jet2, JET_DEGREE, JET_LEN};
pub use parse::{parse, parse_with};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tanh,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
        }
    }

    fn apply(self, v: f64) -> std::result::Result<f64, &'static str> {
        match self {
            Func::Exp => Ok(v.exp()),
            Func::Log if v > 0.0 => Ok(v.ln()),
            Func::Log => Err("log of a non-positive value"),
            Func::Sqrt if v >= 0.0 => Ok(v.sqrt()),
            Func::Sqrt => Err("sqrt of a negative value"),
            Func::Sin => Ok(v.sin()),
            Func::Cos => Ok(v.cos()),
            Func::Tanh => Ok(v.tanh()),
        }
    }

    /// Value and first four derivatives at `v`, as needed for jet composition.
    fn derivatives(self, v: f64) -> std::result::Result<[f64; 5], &'static str> {
        Ok(match self {
            Func::Exp => {
                let e = v.exp();
                [e; 5]
            }
            Func::Log => {
                if v <= 0.0 {
                    return Err("log of a non-positive value");
                }
                let r = 1.0 / v;
                [v.ln(), r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]
            }
            Func::Sqrt => {
                if v <= 0.0 {
                    return Err("sqrt is not differentiable at non-positive values");
                }
                let s = v.sqrt();
                let r = 1.0 / v;
                [
                    s,
                    0.5 * s * r,
                    -0.25 * s * r * r,
                    0.375 * s * r * r * r,
                    -0.9375 * s * r * r * r * r,
                ]
            }
            Func::Sin => {
                let (s, c) = v.sin_cos();
                [s, c, -s, -c, s]
            }
            Func::Cos => {
                let (s, c) = v.sin_cos();
                [c, -s, -c, s, c]
            }
            Func::Tanh => {
                let t = v.tanh();
                let s = 1.0 - t * t;
                [
                    t,
                    s,
                    -2.0 * t * s,
                    s * (6.0 * t * t - 2.0),
                    t * s * (16.0 - 24.0 * t * t),
                ]
            }
        })
    }
}

/// Abstract syntax tree of a symbol expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Xi,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Value and first partials of an expression at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grad {
    pub value: f64,
    pub dx: f64,
    pub dxi: f64,
}

impl Grad {
    fn constant(value: f64) -> Self {
        Grad {
            value,
            dx: 0.0,
            dxi: 0.0,
        }
    }

    fn chain(self, value: f64, slope: f64) -> Self {
        Grad {
            value,
            dx: slope * self.dx,
            dxi: slope * self.dxi,
        }
    }
}

/// How an exponent is treated during evaluation.
enum Exponent {
    Int(i32),
    Real(f64),
    Variable,
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Num(0.0)
    }

    /// True when the tree is the literal `0`.
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    /// True when the tree references neither `x` nor `xi`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::X | Expr::Xi => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    /// True when the tree does not reference `xi`.
    pub fn is_xi_free(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::X => true,
            Expr::Xi => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_xi_free(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.is_xi_free() && b.is_xi_free()
            }
        }
    }

    fn domain(&self, reason: &str) -> Error {
        Error::Domain {
            expr: self.to_string(),
            reason: reason.to_string(),
        }
    }

    fn finite(&self, v: f64) -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.domain("non-finite value"))
        }
    }

    fn exponent(&self) -> Result<Exponent> {
        if !self.is_constant() {
            return Ok(Exponent::Variable);
        }
        let p = self.eval(0.0, 0.0)?;
        if p.fract() == 0.0 && p.abs() <= 64.0 {
            Ok(Exponent::Int(p as i32))
        } else {
            Ok(Exponent::Real(p))
        }
    }

    pub fn eval(&self, x: f64, xi: f64) -> Result<f64> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Xi => xi,
            Expr::Neg(a) => -a.eval(x, xi)?,
            Expr::Add(a, b) => a.eval(x, xi)? + b.eval(x, xi)?,
            Expr::Sub(a, b) => a.eval(x, xi)? - b.eval(x, xi)?,
            Expr::Mul(a, b) => a.eval(x, xi)? * b.eval(x, xi)?,
            Expr::Div(a, b) => {
                let d = b.eval(x, xi)?;
                if d == 0.0 {
                    return Err(self.domain("division by zero"));
                }
                a.eval(x, xi)? / d
            }
            Expr::Pow(a, b) => {
                let base = a.eval(x, xi)?;
                match b.exponent()? {
                    Exponent::Int(n) => {
                        if base == 0.0 && n < 0 {
                            return Err(self.domain("zero raised to a negative power"));
                        }
                        base.powi(n)
                    }
                    Exponent::Real(p) => {
                        if base < 0.0 || (base == 0.0 && p < 0.0) {
                            return Err(self.domain("non-integer power of a non-positive base"));
                        }
                        base.powf(p)
                    }
                    Exponent::Variable => {
                        if base <= 0.0 {
                            return Err(self.domain("variable power of a non-positive base"));
                        }
                        base.powf(b.eval(x, xi)?)
                    }
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x, xi)?).map_err(|r| self.domain(r))?,
        };
        self.finite(v)
    }

    /// Value with first partial derivatives (forward-mode dual numbers).
    pub fn eval_grad(&self, x: f64, xi: f64) -> Result<Grad> {
        let g = match self {
            Expr::Num(v) => Grad::constant(*v),
            Expr::X => Grad {
                value: x,
                dx: 1.0,
                dxi: 0.0,
            },
            Expr::Xi => Grad {
                value: xi,
                dx: 0.0,
                dxi: 1.0,
            },
            Expr::Neg(a) => {
                let a = a.eval_grad(x, xi)?;
                Grad {
                    value: -a.value,
                    dx: -a.dx,
                    dxi: -a.dxi,
                }
            }
            Expr::Add(a, b) => {
                let (a, b) = (a.eval_grad(x, xi)?, b.eval_grad(x, xi)?);
                Grad {
                    value: a.value + b.value,
                    dx: a.dx + b.dx,
                    dxi: a.dxi + b.dxi,
                }
            }
            Expr::Sub(a, b) => {
                let (a, b) = (a.eval_grad(x, xi)?, b.eval_grad(x, xi)?);
                Grad {
                    value: a.value - b.value,
                    dx: a.dx - b.dx,
                    dxi: a.dxi - b.dxi,
                }
            }
            Expr::Mul(a, b) => {
                let (a, b) = (a.eval_grad(x, xi)?, b.eval_grad(x, xi)?);
                Grad {
                    value: a.value * b.value,
                    dx: a.dx * b.value + a.value * b.dx,
                    dxi: a.dxi * b.value + a.value * b.dxi,
                }
            }
            Expr::Div(a, b) => {
                let (a, b) = (a.eval_grad(x, xi)?, b.eval_grad(x, xi)?);
                if b.value == 0.0 {
                    return Err(self.domain("division by zero"));
                }
                let q = a.value / b.value;
                Grad {
                    value: q,
                    dx: (a.dx - q * b.dx) / b.value,
                    dxi: (a.dxi - q * b.dxi) / b.value,
                }
            }
            Expr::Pow(a, b) => {
                let base = a.eval_grad(x, xi)?;
                match b.exponent()? {
                    Exponent::Int(0) => Grad::constant(1.0),
                    Exponent::Int(n) => {
                        if base.value == 0.0 && n < 1 {
                            return Err(self.domain("zero raised to a negative power"));
                        }
                        let lower = base.value.powi(n - 1);
                        base.chain(lower * base.value, n as f64 * lower)
                    }
                    Exponent::Real(p) => {
                        if base.value <= 0.0 {
                            return Err(self.domain("non-integer power of a non-positive base"));
                        }
                        let v = base.value.powf(p);
                        base.chain(v, p * v / base.value)
                    }
                    Exponent::Variable => {
                        if base.value <= 0.0 {
                            return Err(self.domain("variable power of a non-positive base"));
                        }
                        let e = b.eval_grad(x, xi)?;
                        let ln = base.value.ln();
                        let v = base.value.powf(e.value);
                        Grad {
                            value: v,
                            dx: v * (e.dx * ln + e.value * base.dx / base.value),
                            dxi: v * (e.dxi * ln + e.value * base.dxi / base.value),
                        }
                    }
                }
            }
            Expr::Call(f, a) => {
                let a = a.eval_grad(x, xi)?;
                let d = f.derivatives(a.value).map_err(|r| self.domain(r))?;
                a.chain(d[0], d[1])
            }
        };
        self.finite(g.value)?;
        Ok(g)
    }

    /// Truncated Taylor jet (total degree 4) of the expression at `(x, xi)`.
    pub fn jet(&self, x: f64, xi: f64) -> Result<Jet2> {
        let j = match self {
            Expr::Num(v) => Jet2::constant(x, xi, *v),
            Expr::X => Jet2::var_x(x, xi),
            Expr::Xi => Jet2::var_xi(x, xi),
            Expr::Neg(a) => -a.jet(x, xi)?,
            Expr::Add(a, b) => &a.jet(x, xi)? + &b.jet(x, xi)?,
            Expr::Sub(a, b) => &a.jet(x, xi)? - &b.jet(x, xi)?,
            Expr::Mul(a, b) => &a.jet(x, xi)? * &b.jet(x, xi)?,
            Expr::Div(a, b) => {
                let d = b.jet(x, xi)?;
                let r = d
                    .recip()
                    .ok_or_else(|| self.domain("division by a jet with zero constant term"))?;
                &a.jet(x, xi)? * &r
            }
            Expr::Pow(a, b) => {
                let base = a.jet(x, xi)?;
                match b.exponent()? {
                    Exponent::Int(n) => base
                        .powi(n)
                        .ok_or_else(|| self.domain("zero raised to a negative power"))?,
                    Exponent::Real(p) => base
                        .powf(p)
                        .ok_or_else(|| self.domain("non-integer power of a non-positive base"))?,
                    Exponent::Variable => {
                        let c = base.value();
                        if c <= 0.0 {
                            return Err(self.domain("variable power of a non-positive base"));
                        }
                        let ln = base.compose(&Func::Log.derivatives(c).map_err(|r| self.domain(r))?);
                        let prod = &b.jet(x, xi)? * &ln;
                        let e = Func::Exp.derivatives(prod.value()).map_err(|r| self.domain(r))?;
                        prod.compose(&e)
                    }
                }
            }
            Expr::Call(f, a) => {
                let inner = a.jet(x, xi)?;
                let d = f.derivatives(inner.value()).map_err(|r| self.domain(r))?;
                inner.compose(&d)
            }
        };
        if j.coefficients().iter().all(|c| c.is_finite()) {
            Ok(j)
        } else {
            Err(self.domain("non-finite jet coefficient"))
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(v) if *v < 0.0 => 3,
            _ => 5,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Parenthesize a child whose precedence is below `min`.
        let child = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::X => f.write_str("x"),
            Expr::Xi => f.write_str("xi"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                child(f, a, 4)
            }
            Expr::Add(a, b) => {
                child(f, a, 1)?;
                f.write_str(" + ")?;
                child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                child(f, a, 1)?;
                f.write_str(" - ")?;
                child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                child(f, a, 2)?;
                f.write_str("*")?;
                child(f, b, 3)
            }
            Expr::Div(a, b) => {
                child(f, a, 2)?;
                f.write_str("/")?;
                child(f, b, 3)
            }
            Expr::Pow(a, b) => {
                child(f, a, 5)?;
                f.write_str("^")?;
                child(f, b, 4)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_evaluations() {
        assert_eq!(parse("xi^2 + x^2").unwrap().eval(1.0, 2.0).unwrap(), 5.0);
        assert_eq!(parse("xi^2 + x^4").unwrap().eval(0.0, -1.0).unwrap(), 1.0);
        let e = parse("exp(x)*xi").unwrap();
        assert!((e.eval(1.0, 1.0).unwrap() - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn jet_examples() {
        let j = parse("x*xi").unwrap().jet(1.0, 2.0).unwrap();
        assert_eq!(j.coeff(1, 1), 1.0);
        assert_eq!(j.coeff(2, 0), 0.0);

        let j = parse("exp(x)").unwrap().jet(0.0, 0.0).unwrap();
        assert!((j.coeff(4, 0) - 1.0 / 24.0).abs() < 1e-16);
        assert!((j.partial(4, 0) - 1.0).abs() < 1e-14);

        let j = parse("xi^2 + x^4").unwrap().jet(1.0, 0.0).unwrap();
        assert_eq!(j.partial(4, 0), 24.0);
        assert_eq!(j.partial(0, 2), 2.0);
        assert_eq!(j.partial(1, 1), 0.0);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let e = parse("1 + log(x - 2)").unwrap();
        match e.eval(1.0, 0.0) {
            Err(Error::Domain { expr, .. }) => assert_eq!(expr, "log(x - 2)"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(e.jet(1.0, 0.0), Err(Error::Domain { .. })));
        assert!(matches!(parse("1/x").unwrap().jet(0.0, 1.0), Err(Error::Domain { .. })));
        assert!(matches!(
            parse("sqrt(x)").unwrap().eval(-1.0, 0.0),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn gradient_matches_jet() {
        let e = parse("tanh(x*xi) + sqrt(2 + x^2)*cos(xi) - x^xi/3").unwrap();
        let (x, xi) = (0.7, 1.3);
        let g = e.eval_grad(x, xi).unwrap();
        let j = e.jet(x, xi).unwrap();
        assert!((g.value - j.value()).abs() < 1e-14);
        assert!((g.dx - j.partial(1, 0)).abs() < 1e-13);
        assert!((g.dxi - j.partial(0, 1)).abs() < 1e-13);
    }

    #[test]
    fn negative_base_integer_powers() {
        let e = parse("x^3 - x^-2").unwrap();
        assert_eq!(e.eval(-2.0, 0.0).unwrap(), -8.0 - 0.25);
        let j = e.jet(-2.0, 0.0).unwrap();
        // d/dx (x^3 - x^-2) = 3x^2 + 2x^-3
        assert!((j.partial(1, 0) - (12.0 - 0.25)).abs() < 1e-13);
        assert!(matches!(
            parse("x^0.5").unwrap().eval(-1.0, 0.0),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn display_is_readable() {
        let e = parse("-x^2 + (xi - 1)*(xi + 1)/2^-1").unwrap();
        assert_eq!(e.to_string(), "-x^2 + (xi - 1)*(xi + 1)/2^(-1)");
        assert_eq!(parse("2^3^2").unwrap().eval(0.0, 0.0).unwrap(), 512.0);
        assert_eq!(parse("(2^3)^2").unwrap().to_string(), "(2^3)^2");
    }

    #[test]
    fn xi_free_detection() {
        assert!(parse("x^2 + exp(-x)").unwrap().is_xi_free());
        assert!(!parse("x*xi").unwrap().is_xi_free());
        assert!(parse("3*2").unwrap().is_constant());
    }
}
