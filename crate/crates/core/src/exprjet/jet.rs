use std::ops::{Add, Mul, Neg, Sub};

/// Maximum total degree carried by a [`Jet2`].
pub const JET_DEGREE: usize = 4;
/// Number of stored coefficients, one per monomial `x^i xi^j` with `i + j <= 4`.
pub const JET_LEN: usize = 15;

const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];

#[inline]
fn idx(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

/// Truncated bivariate Taylor polynomial of total degree 4 around `(x, xi)`.
///
/// Coefficient `(i, j)` stores `d^i/dx^i d^j/dxi^j f / (i! j!)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    x: f64,
    xi: f64,
    c: [f64; JET_LEN],
}

impl Jet2 {
    pub fn constant(x: f64, xi: f64, v: f64) -> Self {
        let mut c = [0.0; JET_LEN];
        c[0] = v;
        Jet2 { x, xi, c }
    }

    pub fn var_x(x: f64, xi: f64) -> Self {
        let mut j = Jet2::constant(x, xi, x);
        j.c[idx(1, 0)] = 1.0;
        j
    }

    pub fn var_xi(x: f64, xi: f64) -> Self {
        let mut j = Jet2::constant(x, xi, xi);
        j.c[idx(0, 1)] = 1.0;
        j
    }

    /// Builds a jet directly from its scaled coefficients, indexed by total degree then by `j`.
    pub fn from_coefficients(x: f64, xi: f64, c: [f64; JET_LEN]) -> Self {
        Jet2 { x, xi, c }
    }

    pub fn point(&self) -> (f64, f64) {
        (self.x, self.xi)
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coefficients(&self) -> &[f64; JET_LEN] {
        &self.c
    }

    /// Scaled coefficient of `x^i xi^j`; zero beyond the truncation degree.
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > JET_DEGREE {
            0.0
        } else {
            self.c[idx(i, j)]
        }
    }

    /// The partial derivative `d^i/dx^i d^j/dxi^j f` at the expansion point.
    ///
    /// # Panics
    /// If `i + j` exceeds the truncation degree.
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        assert!(i + j <= JET_DEGREE, "partial of order {} beyond jet degree", i + j);
        self.c[idx(i, j)] * FACT[i] * FACT[j]
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.c.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    /// Evaluates `g(self)` given `g` and its first four derivatives at `self.value()`.
    pub fn compose(&self, derivs: &[f64; 5]) -> Self {
        let mut d = self.clone();
        d.c[0] = 0.0;
        let mut out = Jet2::constant(self.x, self.xi, derivs[0]);
        let mut power = d.clone();
        for (k, dk) in derivs.iter().enumerate().skip(1) {
            let w = dk / FACT[k];
            for (o, p) in out.c.iter_mut().zip(power.c.iter()) {
                *o += w * p;
            }
            if k < JET_DEGREE {
                power = &power * &d;
            }
        }
        out
    }

    /// `1/self`, or `None` when the constant term vanishes.
    pub fn recip(&self) -> Option<Self> {
        let v = self.value();
        if v == 0.0 {
            return None;
        }
        let r = 1.0 / v;
        let r2 = r * r;
        Some(self.compose(&[r, -r2, 2.0 * r2 * r, -6.0 * r2 * r2, 24.0 * r2 * r2 * r]))
    }

    /// Integer power by repeated multiplication, valid for any sign of the base.
    pub fn powi(&self, n: i32) -> Option<Self> {
        let base = if n < 0 { self.recip()? } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = Jet2::constant(self.x, self.xi, 1.0);
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &sq;
            }
            e >>= 1;
            if e > 0 {
                sq = &sq * &sq;
            }
        }
        Some(acc)
    }

    /// Real power; requires a positive constant term.
    pub fn powf(&self, p: f64) -> Option<Self> {
        let v = self.value();
        if v <= 0.0 {
            return None;
        }
        let mut d = [0.0; 5];
        let mut coef = 1.0;
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = coef * v.powf(p - k as f64);
            coef *= p - k as f64;
        }
        Some(self.compose(&d))
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.map(|v| -v)
    }
}

impl Add for &Jet2 {
    type Output = Jet2;
    fn add(self, rhs: &Jet2) -> Jet2 {
        let mut out = self.clone();
        out.c.iter_mut().zip(rhs.c.iter()).for_each(|(a, b)| *a += b);
        out
    }
}

impl Sub for &Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: &Jet2) -> Jet2 {
        let mut out = self.clone();
        out.c.iter_mut().zip(rhs.c.iter()).for_each(|(a, b)| *a -= b);
        out
    }
}

impl Mul for &Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: &Jet2) -> Jet2 {
        let mut c = [0.0; JET_LEN];
        for d1 in 0..=JET_DEGREE {
            for j1 in 0..=d1 {
                let a = self.c[idx(d1 - j1, j1)];
                if a == 0.0 {
                    continue;
                }
                for d2 in 0..=JET_DEGREE - d1 {
                    for j2 in 0..=d2 {
                        c[idx(d1 - j1 + d2 - j2, j1 + j2)] += a * rhs.c[idx(d2 - j2, j2)];
                    }
                }
            }
        }
        Jet2 {
            x: self.x,
            xi: self.xi,
            c,
        }
    }
}

impl Mul<f64> for &Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: f64) -> Jet2 {
        self.map(|v| v * rhs)
    }
}
