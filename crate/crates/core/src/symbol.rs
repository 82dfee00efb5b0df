//! Hamiltonian symbols `p0 + h p1 + h^2 p2` and validation of the single-well
//! hypotheses.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::exprjet::{parse_with, Expr, Jet2};
use crate::numeric::roots::{brent, golden_min};

const SLOPE_TOL: f64 = 1e-8;
const WELL_SAMPLES: usize = 4001;
const WINDOW_PROBES: usize = 9;

/// The symbol triple together with the potential when `p0 = xi^2 + V(x)`.
#[derive(Debug, Clone)]
pub struct HamiltonianSymbol {
    p0: Expr,
    p1: Expr,
    p2: Expr,
    potential: Option<Expr>,
    center: OnceLock<Result<(f64, f64)>>,
}

/// A compact energy interval `[e_min, e_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWindow {
    pub e_min: f64,
    pub e_max: f64,
}

impl EnergyWindow {
    pub fn new(e_min: f64, e_max: f64) -> Result<Self> {
        if !(e_min.is_finite() && e_max.is_finite() && e_min < e_max) {
            return Err(Error::InvalidInput(format!(
                "energy window [{e_min}, {e_max}] must be finite with e_min < e_max"
            )));
        }
        Ok(EnergyWindow { e_min, e_max })
    }

    /// `n >= 2` equally spaced energies including both endpoints.
    pub fn samples(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let n = n.max(2);
        (0..n).map(move |k| self.e_min + (self.e_max - self.e_min) * k as f64 / (n - 1) as f64)
    }
}

/// Outcome of [`validate_well`].
#[derive(Debug, Clone, PartialEq)]
pub struct WellReport {
    /// Location and value of the well bottom.
    pub x_min: f64,
    pub v_min: f64,
    /// Turning points at the window endpoints (Schrödinger symbols only).
    pub turning_at_min: Option<(f64, f64)>,
    pub turning_at_max: Option<(f64, f64)>,
    /// Smallest `|V'|` seen at any probed turning point.
    pub slope_margin: Option<f64>,
    pub warnings: Vec<String>,
}

impl HamiltonianSymbol {
    /// `p0 = xi^2 + V(x)` with vanishing lower-order symbols.
    pub fn schrodinger(v: Expr) -> Result<Self> {
        if !v.is_xi_free() {
            return Err(Error::InvalidInput(format!("potential `{v}` must not depend on xi")));
        }
        let p0 = Expr::Add(
            Box::new(Expr::Pow(Box::new(Expr::Xi), Box::new(Expr::Num(2.0)))),
            Box::new(v.clone()),
        );
        Ok(HamiltonianSymbol {
            p0,
            p1: Expr::zero(),
            p2: Expr::zero(),
            potential: Some(v),
            center: OnceLock::new(),
        })
    }

    /// An arbitrary principal symbol; well hypotheses are then not verified.
    pub fn general(p0: Expr) -> Self {
        HamiltonianSymbol {
            p0,
            p1: Expr::zero(),
            p2: Expr::zero(),
            potential: None,
            center: OnceLock::new(),
        }
    }

    /// A Schrödinger symbol from a potential expression in `x`.
    pub fn custom(potential: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        HamiltonianSymbol::schrodinger(parse_with(potential, params)?)
    }

    /// Named potentials: `harmonic`, `quartic`, `anharmonic` (needs `lambda`),
    /// `morse` (needs `D` and `a`). `custom` needs an expression and is served
    /// by [`HamiltonianSymbol::custom`].
    pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str| {
            params
                .get(key)
                .copied()
                .ok_or_else(|| Error::MissingParameter(key.to_string()))
        };
        let text = match name {
            "harmonic" => "x^2".to_string(),
            "quartic" => "x^4".to_string(),
            "anharmonic" => format!("x^2 + ({})*x^4", get("lambda")?),
            "morse" => format!("({})*(1 - exp(-({})*x))^2", get("D")?, get("a")?),
            "custom" => return Err(Error::MissingParameter("potential".into())),
            other => return Err(Error::UnknownPotential(other.to_string())),
        };
        HamiltonianSymbol::custom(&text, params)
    }

    pub fn with_p1(mut self, p1: Expr) -> Self {
        self.p1 = p1;
        self
    }

    pub fn with_p2(mut self, p2: Expr) -> Self {
        self.p2 = p2;
        self
    }

    pub fn p0(&self) -> &Expr {
        &self.p0
    }

    pub fn p1(&self) -> &Expr {
        &self.p1
    }

    pub fn p2(&self) -> &Expr {
        &self.p2
    }

    pub fn potential(&self) -> Option<&Expr> {
        self.potential.as_ref()
    }

    pub fn is_schrodinger(&self) -> bool {
        self.potential.is_some()
    }

    pub(crate) fn require_potential(&self) -> Result<&Expr> {
        self.potential.as_ref().ok_or(Error::NotSchrodinger)
    }

    pub fn jet0(&self, x: f64, xi: f64) -> Result<Jet2> {
        self.p0.jet(x, xi)
    }

    /// Hamilton vector field `(dp0/dxi, -dp0/dx)`.
    pub fn flow(&self, x: f64, xi: f64) -> Result<[f64; 2]> {
        match &self.potential {
            Some(v) => Ok([2.0 * xi, -v.eval_grad(x, 0.0)?.dx]),
            None => {
                let g = self.p0.eval_grad(x, xi)?;
                Ok([g.dxi, -g.dx])
            }
        }
    }

    /// Bottom of the well: the minimum of `V` for Schrödinger symbols, a
    /// critical point of `p0` otherwise. Computed once and cached.
    pub fn center(&self) -> Result<(f64, f64)> {
        self.center
            .get_or_init(|| match &self.potential {
                Some(v) => potential_minimum(v).map(|(x, _)| (x, 0.0)),
                None => critical_point(&self.p0),
            })
            .clone()
    }

    /// The sublevel interval `{V <= e}` around the well bottom, with turning
    /// points refined to near machine precision.
    pub fn sublevel_interval(&self, e: f64) -> Result<(f64, f64)> {
        let v = self.require_potential()?;
        let (x0, _) = self.center()?;
        if v.eval(x0, 0.0)? >= e {
            return Err(Error::Bracket(format!("energy {e} lies below the well bottom")));
        }
        let g = |x: f64| v.eval(x, 0.0).map(|val| val - e);
        let side = |dir: f64| -> Result<f64> {
            let mut step = 0.5;
            let mut inner = x0;
            for _ in 0..60 {
                let outer = x0 + dir * step;
                if g(outer)? > 0.0 {
                    let (a, b) = if dir < 0.0 { (outer, inner) } else { (inner, outer) };
                    return brent(g, a, b, 1e-15 * (1.0 + x0.abs() + step));
                }
                inner = outer;
                step *= 2.0;
            }
            Err(Error::BarrierExceeded { energy: e })
        };
        Ok((side(-1.0)?, side(1.0)?))
    }
}

fn potential_minimum(v: &Expr) -> Result<(f64, f64)> {
    let mut r = 1.0;
    for _ in 0..14 {
        let (xs, vs) = sample(v, -r, r, WELL_SAMPLES)?;
        let i = argmin(&vs);
        if i > 0 && i + 1 < xs.len() {
            let (x, fx) = golden_min(|x| v.eval(x, 0.0), xs[i - 1], xs[i + 1], 1e-12)?;
            return Ok((x, fx));
        }
        r *= 2.0;
    }
    Err(Error::InvalidInput(
        "potential has no interior minimum within |x| <= 8192".into(),
    ))
}

fn critical_point(p0: &Expr) -> Result<(f64, f64)> {
    let (mut x, mut xi) = (0.0, 0.0);
    for _ in 0..100 {
        let j = p0.jet(x, xi)?;
        let (gx, gxi) = (j.partial(1, 0), j.partial(0, 1));
        let (hxx, hxy, hyy) = (j.partial(2, 0), j.partial(1, 1), j.partial(0, 2));
        let det = hxx * hyy - hxy * hxy;
        if det <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "p0 is not locally convex near ({x}, {xi})"
            )));
        }
        let dx = (hyy * gx - hxy * gxi) / det;
        let dxi = (hxx * gxi - hxy * gx) / det;
        x -= dx;
        xi -= dxi;
        if dx.abs() + dxi.abs() < 1e-14 * (1.0 + x.abs() + xi.abs()) {
            return Ok((x, xi));
        }
    }
    Err(Error::no_convergence("critical point of p0 not found"))
}

fn sample(v: &Expr, a: f64, b: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let xs: Vec<f64> = (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect();
    let vs = xs.iter().map(|&x| v.eval(x, 0.0)).collect::<Result<Vec<_>>>()?;
    Ok((xs, vs))
}

fn argmin(vs: &[f64]) -> usize {
    vs.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Checks that the symbol describes a single simple well over the window.
pub fn validate_well(s: &HamiltonianSymbol, w: &EnergyWindow) -> Result<WellReport> {
    let Some(v) = s.potential() else {
        let (x, xi) = s.center()?;
        return Ok(WellReport {
            x_min: x,
            v_min: s.p0().eval(x, xi)?,
            turning_at_min: None,
            turning_at_max: None,
            slope_margin: None,
            warnings: vec!["general p0: the ring hypothesis is not verified for non-Schrödinger symbols".to_string()],
        });
    };

    let mut r = 1.0;
    let mut enclosed = false;
    let above = |x: f64| v.eval(x, 0.0).map_or(true, |val| val > w.e_max);
    for _ in 0..20 {
        if above(-r) && above(r) {
            enclosed = true;
            break;
        }
        r *= 2.0;
    }
    if !enclosed {
        return Err(Error::BarrierExceeded { energy: w.e_max });
    }

    let (xs, vs) = sample(v, -r, r, WELL_SAMPLES)?;
    let minima: Vec<f64> = (1..xs.len() - 1)
        .filter(|&i| vs[i] < vs[i - 1] && vs[i] <= vs[i + 1] && vs[i] < w.e_max)
        .map(|i| xs[i])
        .collect();
    if minima.len() > 1 {
        let list: Vec<String> = minima.iter().map(|x| format!("{x:.4}")).collect();
        return Err(Error::MultipleWells(format!(
            "{} local minima below E = {} near x = {}",
            minima.len(),
            w.e_max,
            list.join(", ")
        )));
    }

    let (x0, _) = s.center()?;
    let v_min = v.eval(x0, 0.0)?;
    if v_min >= w.e_min {
        return Err(Error::WindowBelowMinimum { e_min: w.e_min, v_min });
    }

    let mut margin = f64::INFINITY;
    let mut ends = Vec::new();
    for e in w.samples(WINDOW_PROBES) {
        let crossings = vs
            .windows(2)
            .filter(|p| (p[0] - e).signum() != (p[1] - e).signum())
            .count();
        if crossings != 2 {
            return Err(Error::BarrierExceeded { energy: e });
        }
        let (xl, xr) = s.sublevel_interval(e)?;
        for (x, outward) in [(xl, -1.0), (xr, 1.0)] {
            let j = v.jet(x, 0.0)?;
            let (d1, d2) = (j.partial(1, 0), j.partial(2, 0));
            if d1 * outward <= 0.0 || d1.abs() < SLOPE_TOL * (1.0 + d2.abs()) {
                return Err(Error::DegenerateTurningPoint { x, slope: d1.abs() });
            }
            margin = margin.min(d1.abs());
        }
        ends.push((xl, xr));
    }

    Ok(WellReport {
        x_min: x0,
        v_min,
        turning_at_min: ends.first().copied(),
        turning_at_max: ends.last().copied(),
        slope_margin: Some(margin),
        warnings: Vec::new(),
    })
}
