//! Periodic orbits of the Hamilton flow of `p0`, their periods and orbit integrals.

use crate::error::{Error, Result};
use crate::exprjet::Jet2;
use crate::numeric::ode::{hermite, integrate_fixed, Controller};
use crate::numeric::roots::brent;
use crate::symbol::HamiltonianSymbol;

const MIN_SAMPLES: usize = 4096;
const BASE_PANELS: usize = 64;
const MAX_DOUBLINGS: usize = 6;
const DRIFT_TOL: f64 = 1e-9;
const CLOSURE_TOL: f64 = 1e-8;
const ALPHA_TOL: f64 = 1e-6;

/// Integration settings for [`trace_orbit_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitOptions {
    /// Relative tolerance of the adaptive pass that detects the period.
    pub rtol: f64,
    /// Lower bound on the number of uniform time steps per period.
    pub min_samples: usize,
    /// Relative agreement required between successive trapezoid refinements
    /// of orbit integrals.
    pub quad_tol: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions {
            rtol: 1e-10,
            min_samples: MIN_SAMPLES,
            quad_tol: 1e-10,
        }
    }
}

/// One period of the trajectory on `{p0 = E}`, sampled uniformly in time.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub energy: f64,
    /// The left and right focal points, where the orbit is vertical.
    pub x_left: f64,
    pub x_right: f64,
    /// Fibre coordinates of the focal points (zero for Schrödinger symbols).
    pub xi_left: f64,
    pub xi_right: f64,
    pub period: f64,
    states: Vec<[f64; 2]>,
    xdot: Vec<f64>,
    potential_branches: Option<crate::exprjet::Expr>,
    p0: crate::exprjet::Expr,
    quad_tol: f64,
}

impl Orbit {
    /// Number of uniform time steps per period.
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.period / self.steps() as f64
    }

    /// `(t, x, xi)` for every sample, including the closing one at `t = T`.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let dt = self.dt();
        self.states
            .iter()
            .enumerate()
            .map(move |(k, s)| (k as f64 * dt, s[0], s[1]))
    }

    /// Largest `|p0 - E|` over the samples.
    pub fn energy_drift(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for s in &self.states {
            worst = worst.max((self.p0.eval(s[0], s[1])? - self.energy).abs());
        }
        Ok(worst)
    }

    /// Distance between the initial and final sample.
    pub fn closure(&self) -> f64 {
        let (a, b) = (self.states[0], self.states[self.steps()]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    /// `∮ f(x(t), xi(t)) dt` by the periodic trapezoid rule, doubling the number
    /// of panels from 64 until successive values agree.
    pub fn integral<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(f64, f64) -> Result<f64>,
    {
        self.periodic_sum(|_, s| f(s[0], s[1]))
    }

    /// `∮ xi dx = ∮ xi(t) x'(t) dt`, the enclosed phase-space area.
    pub fn action_s0(&self) -> Result<f64> {
        let xdot = &self.xdot;
        self.periodic_sum(|k, s| Ok(s[1] * xdot[k]))
    }

    fn periodic_sum<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(usize, &[f64; 2]) -> Result<f64>,
    {
        let n = self.steps();
        let mut m = BASE_PANELS.min(n);
        let mut stride = n / m;
        let mut sum = Neumaier::default();
        let mut abs_sum = 0.0;
        for k in (0..n).step_by(stride) {
            let v = f(k, &self.states[k])?;
            sum.add(v);
            abs_sum += v.abs();
        }
        let mut prev = sum.value() * self.period / m as f64;
        for _ in 0..MAX_DOUBLINGS {
            if stride < 2 {
                break;
            }
            let half = stride / 2;
            for k in (half..n).step_by(stride) {
                let v = f(k, &self.states[k])?;
                sum.add(v);
                abs_sum += v.abs();
            }
            stride = half;
            m *= 2;
            let cur = sum.value() * self.period / m as f64;
            let scale = cur.abs().max(abs_sum * self.period / m as f64);
            if (cur - prev).abs() <= self.quad_tol * scale || scale == 0.0 {
                return Ok(cur);
            }
            prev = cur;
        }
        Err(Error::no_convergence(format!(
            "orbit integral at E = {} did not settle with {m} panels",
            self.energy
        )))
    }

    /// Upper and lower branches `xi_±(x)` on `[x_left, x_right]`.
    pub fn branch(&self, x: f64, upper: bool) -> Result<f64> {
        if let Some(v) = &self.potential_branches {
            let r = (self.energy - v.eval(x, 0.0)?).max(0.0).sqrt();
            return Ok(if upper { r } else { -r });
        }
        let sign = if upper { 1.0 } else { -1.0 };
        // Minimize p0 in xi, then walk outward to the level set.
        let mut xi = 0.5 * (self.xi_left + self.xi_right);
        for _ in 0..60 {
            let j = self.p0.jet(x, xi)?;
            let step = j.partial(0, 1) / j.partial(0, 2);
            xi -= step;
            if step.abs() < 1e-14 * (1.0 + xi.abs()) {
                break;
            }
        }
        let g = |q: f64| self.p0.eval(x, q).map(|v| v - self.energy);
        if g(xi)? >= 0.0 {
            return Ok(xi);
        }
        let mut step = 0.5;
        for _ in 0..60 {
            let outer = xi + sign * step;
            if g(outer)? > 0.0 {
                let (a, b) = if upper { (xi, outer) } else { (outer, xi) };
                return brent(g, a, b, 1e-15 * (1.0 + outer.abs()));
            }
            step *= 2.0;
        }
        Err(Error::Bracket(format!("no branch point above x = {x}")))
    }
}

/// Compensated running sum.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    carry: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Turning points `{V <= E} = [x_left, x_right]` of a Schrödinger symbol.
pub fn turning_points(s: &HamiltonianSymbol, e: f64) -> Result<(f64, f64)> {
    s.sublevel_interval(e)
}

/// The two focal points `(x, xi)` of `{p0 = E}`, left then right.
pub fn focal_points(s: &HamiltonianSymbol, e: f64) -> Result<[(f64, f64); 2]> {
    if s.is_schrodinger() {
        let (l, r) = s.sublevel_interval(e)?;
        return Ok([(l, 0.0), (r, 0.0)]);
    }
    let (xc, xic) = s.center()?;
    let p0 = s.p0();
    if p0.eval(xc, xic)? >= e {
        return Err(Error::Bracket(format!("energy {e} lies below the well bottom")));
    }
    let locate = |dir: f64| -> Result<(f64, f64)> {
        let g = |x: f64| p0.eval(x, xic).map(|v| v - e);
        let mut step = 0.5;
        let mut inner = xc;
        let mut x = None;
        for _ in 0..60 {
            let outer = xc + dir * step;
            if g(outer)? > 0.0 {
                let (a, b) = if dir < 0.0 { (outer, inner) } else { (inner, outer) };
                x = Some(brent(g, a, b, 1e-14)?);
                break;
            }
            inner = outer;
            step *= 2.0;
        }
        let (mut x, mut xi) = (x.ok_or(Error::BarrierExceeded { energy: e })?, xic);
        for _ in 0..60 {
            let j = p0.jet(x, xi)?;
            let (f1, f2) = (j.value() - e, j.partial(0, 1));
            let (a, b, c, d) = (j.partial(1, 0), j.partial(0, 1), j.partial(1, 1), j.partial(0, 2));
            let det = a * d - b * c;
            if det == 0.0 {
                break;
            }
            let dx = (d * f1 - b * f2) / det;
            let dxi = (a * f2 - c * f1) / det;
            x -= dx;
            xi -= dxi;
            if dx.abs() + dxi.abs() < 1e-15 * (1.0 + x.abs() + xi.abs()) {
                return Ok((x, xi));
            }
        }
        Err(Error::no_convergence(format!("focal point at E = {e} not resolved")))
    };
    Ok([locate(-1.0)?, locate(1.0)?])
}

pub fn trace_orbit(s: &HamiltonianSymbol, e: f64) -> Result<Orbit> {
    trace_orbit_with(s, e, &OrbitOptions::default())
}

/// Traces one period of the flow starting from the right focal point.
pub fn trace_orbit_with(s: &HamiltonianSymbol, e: f64, opts: &OrbitOptions) -> Result<Orbit> {
    let [(xl, xil), (xr, xir)] = focal_points(s, e)?;
    let mut rhs = |_t: f64, y: &[f64; 2]| s.flow(y[0], y[1]);
    let y0 = [xr, xir];

    let (xc, _) = s.center()?;
    let top_speed = {
        let xi_top = if let Some(v) = s.potential() {
            (e - v.eval(xc, 0.0)?).sqrt()
        } else {
            0.5 * (xil + xir) + (e - s.p0().eval(xc, 0.5 * (xil + xir))?).max(0.0).sqrt()
        };
        s.flow(xc, xi_top)?[0].abs()
    };
    let t_crude = std::f64::consts::PI * (xr - xl) / top_speed.max(f64::MIN_POSITIVE);
    let limit = 10.0 * t_crude;

    // Adaptive pass: the second downward crossing of xi = xi_right (the first
    // being the start itself) closes the orbit.
    let ctl = Controller {
        rtol: opts.rtol,
        atol: opts.rtol * (1.0 + xr.abs().max(xl.abs())),
        h_min: 1e-14 * t_crude,
    };
    let (mut t, mut y) = (0.0, y0);
    let mut f = rhs(t, &y)?;
    let mut h = 0.01 * t_crude;
    let mut accepted = 0usize;
    let mut prev_g = 0.0;
    let period_guess = loop {
        if t > limit {
            return Err(Error::OrbitNotClosed { energy: e, limit });
        }
        let (step, used, next) = ctl.advance(&mut rhs, t, &y, &f, h)?;
        accepted += 1;
        let g = step.y[1] - xir;
        if prev_g > 0.0 && g <= 0.0 && step.y[0] > xc {
            let (ya, fa, yb, fb) = (y, f, step.y, step.f);
            let theta = brent(|th| Ok(hermite(&ya, &fa, &yb, &fb, used, th)[1] - xir), 0.0, 1.0, 1e-14)?;
            break t + theta * used;
        }
        prev_g = g;
        t += used;
        y = step.y;
        f = step.f;
        h = next;
    };

    let n = (4 * accepted).max(opts.min_samples).next_power_of_two();
    let mut period = period_guess;
    for _ in 0..12 {
        let end = integrate_fixed(&mut rhs, 0.0, &y0, period / n as f64, n)?[n];
        let g = end[1] - xir;
        let gdot = rhs(period, &end)?[1];
        let dt = -g / gdot;
        period += dt;
        if dt.abs() <= 1e-13 * period {
            break;
        }
    }
    let states = integrate_fixed(&mut rhs, 0.0, &y0, period / n as f64, n)?;

    let xdot = states
        .iter()
        .map(|st| rhs(0.0, st).map(|d| d[0]))
        .collect::<Result<Vec<_>>>()?;
    let speed = xdot.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let signs: Vec<bool> = xdot[..n]
        .iter()
        .filter(|v| v.abs() > 1e-9 * speed)
        .map(|v| *v > 0.0)
        .collect();
    let focal_count = signs.windows(2).filter(|w| w[0] != w[1]).count() + usize::from(signs.first() != signs.last());
    if focal_count != 2 {
        return Err(Error::FocalPoints {
            energy: e,
            count: focal_count,
        });
    }

    let orbit = Orbit {
        energy: e,
        x_left: xl,
        x_right: xr,
        xi_left: xil,
        xi_right: xir,
        period,
        states,
        xdot,
        potential_branches: s.potential().cloned(),
        p0: s.p0().clone(),
        quad_tol: opts.quad_tol,
    };
    let drift = orbit.energy_drift()?;
    if drift > DRIFT_TOL * (1.0 + e.abs()) {
        return Err(Error::EnergyDrift { energy: e, drift });
    }
    let gap = orbit.closure();
    if gap > CLOSURE_TOL {
        return Err(Error::OrbitNotClosed { energy: e, limit });
    }
    Ok(orbit)
}

/// Local geometry of the curve `{p0 = E}` near a focal point, parametrized by
/// the fibre variable `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalFrame {
    pub energy: f64,
    pub x_focal: f64,
    pub xi_focal: f64,
}

/// Curve data at one point of a near-focal arc.
#[derive(Debug, Clone)]
pub struct FramePoint {
    pub x: f64,
    pub xi: f64,
    /// `dp0/dx` on the curve.
    pub alpha: f64,
    /// `(dp0/dxi) / (dp0/dx)`, the second derivative of the Fourier-side phase.
    pub psi2: f64,
    /// Derivative of `alpha` along the curve with respect to `xi`.
    pub alpha_prime: f64,
    pub jet: Jet2,
}

impl FocalFrame {
    /// Frame at the right focal point `(x_E, xi_E)` of energy `e`.
    pub fn right(s: &HamiltonianSymbol, e: f64) -> Result<Self> {
        let [_, (x, xi)] = focal_points(s, e)?;
        Ok(FocalFrame {
            energy: e,
            x_focal: x,
            xi_focal: xi,
        })
    }

    /// Frame at the left focal point `(x'_E, xi'_E)`.
    pub fn left(s: &HamiltonianSymbol, e: f64) -> Result<Self> {
        let [(x, xi), _] = focal_points(s, e)?;
        Ok(FocalFrame {
            energy: e,
            x_focal: x,
            xi_focal: xi,
        })
    }

    /// Solves `p0(x, xi) = E` for `x` near the focal point and evaluates the
    /// frame quantities there.
    pub fn point(&self, s: &HamiltonianSymbol, xi: f64) -> Result<FramePoint> {
        let mut x = self.x_focal;
        let mut converged = false;
        for _ in 0..60 {
            let g = s.p0().eval_grad(x, xi)?;
            if g.dx.abs() < ALPHA_TOL {
                return Err(Error::AlphaTooSmall(g.dx.abs()));
            }
            let step = (g.value - self.energy) / g.dx;
            x -= step;
            if step.abs() <= 1e-15 * (1.0 + x.abs()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::no_convergence(format!("curve point at xi = {xi} not resolved")));
        }
        let jet = s.p0().jet(x, xi)?;
        let alpha = jet.partial(1, 0);
        if alpha.abs() < ALPHA_TOL {
            return Err(Error::AlphaTooSmall(alpha.abs()));
        }
        let psi2 = jet.partial(0, 1) / alpha;
        let alpha_prime = -jet.partial(2, 0) * psi2 + jet.partial(1, 1);
        Ok(FramePoint {
            x,
            xi,
            alpha,
            psi2,
            alpha_prime,
            jet,
        })
    }
}
