//! Reference eigenvalues of `-h^2 d^2/dx^2 + V` from Numerov shooting with
//! Sturm node counting and Richardson-extrapolated grid refinement.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::exprjet::Expr;
use crate::numeric::quad::integrate;
use crate::numeric::roots::brent;
use crate::symbol::{validate_well, EnergyWindow, HamiltonianSymbol};

const RESCALE: f64 = 1e100;
const MAX_POINTS: usize = 1 << 23;
/// Target `dx * xi_max / h` in the classically allowed region.
const ALLOWED_STEP: f64 = 0.05;
/// Target `dx * kappa / h` in the forbidden region.
const FORBIDDEN_STEP: f64 = 0.5;
/// Least `∫ sqrt(V - e_max) dx / h` between each turning point at `e_max` and
/// the box wall.
const MIN_DECAY: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Explicit box half-width; `None` derives it from `halfwidth_factor`.
    pub half_width: Option<f64>,
    /// Box half-width as a multiple of the largest turning-point modulus at `e_max`.
    pub halfwidth_factor: f64,
    /// Minimum number of intervals on the coarsest grid.
    pub base_points: usize,
    /// Shooting root tolerance relative to `1 + |E|`.
    pub shoot_tol: f64,
    /// Grid agreement after extrapolation, relative to `1 + |E|`.
    pub grid_tol: f64,
    pub max_levels: usize,
    pub max_refinements: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            half_width: None,
            halfwidth_factor: 2.0,
            base_points: 1000,
            shoot_tol: 1e-10,
            grid_tol: 1e-9,
            max_levels: 10_000,
            max_refinements: 4,
        }
    }
}

/// The potential sampled on a uniform grid of `[-L, L]` with Dirichlet ends.
#[derive(Debug, Clone)]
pub struct NumerovGrid {
    half_width: f64,
    dx: f64,
    h: f64,
    v: Vec<f64>,
    match_index: usize,
}

impl NumerovGrid {
    /// `intervals` uniform cells on `[-half_width, half_width]`, matching the
    /// two shots at the node nearest `x_match`.
    pub fn new(v: &Expr, h: f64, half_width: f64, intervals: usize, x_match: f64) -> Result<Self> {
        if intervals < 8 {
            return Err(Error::Grid(format!("at least 8 intervals, got {intervals}")));
        }
        if !(half_width > 0.0 && h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "half-width {half_width} and h {h} must be positive"
            )));
        }
        let dx = 2.0 * half_width / intervals as f64;
        let v = (0..=intervals)
            .map(|j| v.eval(-half_width + j as f64 * dx, 0.0))
            .collect::<Result<Vec<_>>>()?;
        let m = ((x_match + half_width) / dx).round();
        let match_index = (m.max(1.0) as usize).min(intervals - 2);
        Ok(NumerovGrid {
            half_width,
            dx,
            h,
            v,
            match_index,
        })
    }

    pub fn intervals(&self) -> usize {
        self.v.len() - 1
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx
    }

    fn coefficient(&self, e: f64) -> impl Fn(usize) -> f64 + '_ {
        let c = self.dx * self.dx / (12.0 * self.h * self.h);
        move |j| 1.0 - c * (self.v[j] - e)
    }

    /// Number of eigenvalues strictly below `e`: the sign changes of the shot
    /// from the left wall, including the value at the right wall.
    pub fn count_below(&self, e: f64) -> usize {
        let f = self.coefficient(e);
        let n = self.intervals();
        let (mut prev, mut cur) = (0.0, 1.0);
        let (mut f_prev, mut f_cur) = (f(0), f(1));
        let mut changes = 0;
        for j in 1..n {
            let f_next = f(j + 1);
            let mut next = ((12.0 - 10.0 * f_cur) * cur - f_prev * prev) / f_next;
            if next != 0.0 && cur != 0.0 && (next < 0.0) != (cur < 0.0) {
                changes += 1;
            }
            if next.abs() > RESCALE {
                cur /= RESCALE;
                next /= RESCALE;
            }
            prev = cur;
            cur = next;
            f_prev = f_cur;
            f_cur = f_next;
        }
        changes
    }

    fn shot_left(&self, e: f64, end: usize) -> (f64, f64) {
        let f = self.coefficient(e);
        let (mut prev, mut cur) = (0.0, 1.0);
        for j in 1..end {
            let mut next = ((12.0 - 10.0 * f(j)) * cur - f(j - 1) * prev) / f(j + 1);
            if next.abs() > RESCALE {
                cur /= RESCALE;
                next /= RESCALE;
            }
            prev = cur;
            cur = next;
        }
        (prev, cur)
    }

    fn shot_right(&self, e: f64, end: usize) -> (f64, f64) {
        let f = self.coefficient(e);
        let n = self.intervals();
        let (mut prev, mut cur) = (0.0, 1.0);
        for j in (end + 1..n).rev() {
            let mut next = ((12.0 - 10.0 * f(j)) * cur - f(j + 1) * prev) / f(j - 1);
            if next.abs() > RESCALE {
                cur /= RESCALE;
                next /= RESCALE;
            }
            prev = cur;
            cur = next;
        }
        (cur, prev)
    }

    /// Normalized discrete Wronskian of the two shots at the match point; it
    /// vanishes exactly at the discrete eigenvalues.
    pub fn mismatch(&self, e: f64) -> f64 {
        let m = self.match_index;
        let (l0, l1) = self.shot_left(e, m + 1);
        let (r0, r1) = self.shot_right(e, m);
        let w = l0 * r1 - l1 * r0;
        w / (l0.hypot(l1) * r0.hypot(r1))
    }

    /// Discrete eigenvalues in `[lo, hi]` indexed by node count.
    pub fn eigenvalues(&self, lo: f64, hi: f64, tol: f64, max_levels: usize) -> Result<BTreeMap<usize, f64>> {
        let (c_lo, c_hi) = (self.count_below(lo), self.count_below(hi));
        if c_hi - c_lo > max_levels {
            return Err(Error::InvalidInput(format!(
                "{} eigenvalues in [{lo}, {hi}] exceed the limit {max_levels}",
                c_hi - c_lo
            )));
        }
        let mut out = BTreeMap::new();
        let mut stack = vec![(lo, c_lo, hi, c_hi)];
        while let Some((a, ca, b, cb)) = stack.pop() {
            if cb == ca {
                continue;
            }
            if cb == ca + 1 {
                let (da, db) = (self.mismatch(a), self.mismatch(b));
                if da * db > 0.0 {
                    return Err(Error::Bracket(format!(
                        "shooting defect has no sign change on [{a}, {b}]"
                    )));
                }
                let xtol = 1e-2 * tol * (1.0 + b.abs());
                let e = brent(|e| Ok(self.mismatch(e)), a, b, xtol)?;
                out.insert(ca, e);
                continue;
            }
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                return Err(Error::no_convergence(format!(
                    "eigenvalues near {a} could not be separated"
                )));
            }
            let cm = self.count_below(mid);
            stack.push((a, ca, mid, cm));
            stack.push((mid, cm, b, cb));
        }
        Ok(out)
    }

    /// Discrete eigenfunction at an eigenvalue, glued from the two shots and
    /// scaled to unit maximum.
    pub fn eigenfunction(&self, e: f64) -> Vec<f64> {
        let f = self.coefficient(e);
        let n = self.intervals();
        let m = self.match_index;
        let mut psi = vec![0.0; n + 1];
        psi[1] = 1.0;
        for j in 1..=m {
            psi[j + 1] = ((12.0 - 10.0 * f(j)) * psi[j] - f(j - 1) * psi[j - 1]) / f(j + 1);
            if psi[j + 1].abs() > RESCALE {
                psi[..=j + 1].iter_mut().for_each(|p| *p /= RESCALE);
            }
        }
        let mut right = vec![0.0; n + 1];
        right[n - 1] = 1.0;
        for j in (m + 1..n).rev() {
            right[j - 1] = ((12.0 - 10.0 * f(j)) * right[j] - f(j + 1) * right[j + 1]) / f(j - 1);
            if right[j - 1].abs() > RESCALE {
                right[j - 1..].iter_mut().for_each(|p| *p /= RESCALE);
            }
        }
        let (a, b) = if psi[m].abs() >= psi[m + 1].abs() {
            (psi[m], right[m])
        } else {
            (psi[m + 1], right[m + 1])
        };
        let scale = a / b;
        for j in m + 1..=n {
            psi[j] = right[j] * scale;
        }
        let peak = psi.iter().fold(0.0_f64, |acc, p| acc.max(p.abs()));
        psi.iter().map(|p| p / peak).collect()
    }
}

/// Box half-width and grid spacing chosen for a potential, `h` and window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleDomain {
    pub half_width: f64,
    pub intervals: usize,
    pub x_min: f64,
}

pub fn oracle_domain(v: &Expr, h: f64, w: &EnergyWindow, cfg: &OracleConfig) -> Result<OracleDomain> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("h = {h} must be positive")));
    }
    if cfg.halfwidth_factor < 1.5 {
        return Err(Error::InvalidInput(format!(
            "halfwidth_factor {} must be at least 1.5",
            cfg.halfwidth_factor
        )));
    }
    let symbol = HamiltonianSymbol::schrodinger(v.clone())?;
    let report = validate_well(&symbol, w)?;
    let (xl, xr) = report
        .turning_at_max
        .ok_or_else(|| Error::InvalidInput("turning points at e_max unavailable".into()))?;
    let half_width = cfg.half_width.unwrap_or(cfg.halfwidth_factor * xl.abs().max(xr.abs()));
    let kappa_at = |x: f64| v.eval(x, 0.0).map(|vx| (vx - w.e_max).max(0.0).sqrt());
    let decay = if half_width > xr && -half_width < xl {
        let left = integrate(kappa_at, -half_width, xl, 1e-8, 1e-12)?;
        let right = integrate(kappa_at, xr, half_width, 1e-8, 1e-12)?;
        left.min(right) / h
    } else {
        0.0
    };
    if !(decay >= MIN_DECAY) {
        return Err(Error::DomainMargin {
            half_width,
            decay,
            required: MIN_DECAY,
        });
    }
    let samples = 2001;
    let mut v_max = f64::NEG_INFINITY;
    for k in 0..samples {
        let x = -half_width + 2.0 * half_width * k as f64 / (samples - 1) as f64;
        v_max = v_max.max(v.eval(x, 0.0)?);
    }
    let xi_max = (w.e_max - report.v_min).sqrt();
    let kappa = (v_max - w.e_min).max(0.0).sqrt();
    let dx = (ALLOWED_STEP * h / xi_max).min(FORBIDDEN_STEP * h / kappa.max(f64::MIN_POSITIVE));
    let intervals = ((2.0 * half_width / dx).ceil() as usize).max(cfg.base_points);
    if intervals > MAX_POINTS {
        return Err(Error::Grid(format!(
            "a resolution of {intervals} intervals, above the limit {MAX_POINTS}"
        )));
    }
    Ok(OracleDomain {
        half_width,
        intervals,
        x_min: report.x_min,
    })
}

/// Eigenvalues in the window as `(n, E)` with `n` the node count.
pub fn oracle_spectrum(v: &Expr, h: f64, w: &EnergyWindow, cfg: &OracleConfig) -> Result<Vec<(usize, f64)>> {
    let dom = oracle_domain(v, h, w, cfg)?;
    let pad = 0.02 * (w.e_max - w.e_min);
    let (lo, hi) = (w.e_min - pad, w.e_max + pad);
    let solve = |intervals: usize| -> Result<BTreeMap<usize, f64>> {
        if intervals > MAX_POINTS {
            return Err(Error::no_convergence(format!(
                "grid refinement exceeded {MAX_POINTS} intervals"
            )));
        }
        NumerovGrid::new(v, h, dom.half_width, intervals, dom.x_min)?.eigenvalues(lo, hi, cfg.shoot_tol, cfg.max_levels)
    };
    let extrapolate = |coarse: &BTreeMap<usize, f64>, fine: &BTreeMap<usize, f64>| {
        fine.iter()
            .filter_map(|(n, ef)| coarse.get(n).map(|ec| (*n, (16.0 * ef - ec) / 15.0)))
            .collect::<BTreeMap<_, _>>()
    };
    let inside = |r: &BTreeMap<usize, f64>| {
        r.iter()
            .filter(|(_, e)| **e >= w.e_min && **e <= w.e_max)
            .map(|(n, e)| (*n, *e))
            .collect::<Vec<_>>()
    };

    let mut intervals = dom.intervals;
    let mut coarse = solve(intervals)?;
    intervals *= 2;
    let mut fine = solve(intervals)?;
    let mut previous = extrapolate(&coarse, &fine);
    let mut worst = f64::INFINITY;
    for _ in 0..=cfg.max_refinements {
        intervals *= 2;
        coarse = fine;
        fine = solve(intervals)?;
        let current = extrapolate(&coarse, &fine);
        let (a, b) = (inside(&previous), inside(&current));
        let same_levels = a.len() == b.len() && a.iter().zip(&b).all(|(p, q)| p.0 == q.0);
        worst = a
            .iter()
            .zip(&b)
            .map(|(p, q)| (p.1 - q.1).abs() / (cfg.grid_tol * (1.0 + q.1.abs())))
            .fold(0.0, f64::max);
        if same_levels && worst <= 1.0 {
            return Ok(b);
        }
        previous = current;
    }
    Err(Error::no_convergence(format!(
        "oracle grids disagree by {worst:.2} times the tolerance after refinement"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprjet::parse;
    use crate::numeric::fit::linear_fit;

    fn levels(v: &str, h: f64, lo: f64, hi: f64) -> Vec<(usize, f64)> {
        let w = EnergyWindow::new(lo, hi).unwrap();
        oracle_spectrum(&parse(v).unwrap(), h, &w, &OracleConfig::default()).unwrap()
    }

    #[test]
    fn harmonic_levels() {
        let got = levels("x^2", 0.1, 0.05, 1.0);
        assert_eq!(got.len(), 5);
        for (n, e) in got {
            let exact = 0.1 * (2 * n + 1) as f64;
            assert!((e - exact).abs() < 1e-8, "n = {n}: {e}");
        }
    }

    #[test]
    fn constant_shift_moves_every_level() {
        let h = 0.1;
        let c = 0.07 * h;
        let base = levels("x^4", h, 0.3, 2.0);
        let shifted = levels("x^4 + 0.007", h, 0.3 + c, 2.0 + c);
        assert_eq!(base.len(), shifted.len());
        for (a, b) in base.iter().zip(&shifted) {
            assert_eq!(a.0, b.0);
            assert!((b.1 - a.1 - c).abs() < 1e-9, "{a:?} {b:?}");
        }
    }

    #[test]
    fn quartic_levels_increase() {
        let got = levels("x^4", 0.05, 1.0, 3.0);
        assert!(got.windows(2).all(|p| p[1].1 > p[0].1 && p[1].0 == p[0].0 + 1));
        assert!(!got.is_empty());
    }

    #[test]
    fn eigenfunctions_have_n_nodes() {
        let v = parse("x^4 + 0.3*x").unwrap();
        let w = EnergyWindow::new(0.0, 2.0).unwrap();
        let dom = oracle_domain(&v, 0.1, &w, &OracleConfig::default()).unwrap();
        let grid = NumerovGrid::new(&v, 0.1, dom.half_width, dom.intervals, dom.x_min).unwrap();
        let found = grid.eigenvalues(w.e_min, w.e_max, 1e-10, 100).unwrap();
        assert!(found.len() >= 4);
        for (n, e) in found {
            let psi = grid.eigenfunction(e);
            let significant: Vec<f64> = psi.into_iter().filter(|p| p.abs() > 1e-6).collect();
            let nodes = significant.windows(2).filter(|p| p[0] * p[1] < 0.0).count();
            assert_eq!(nodes, n, "E = {e}");
            assert_eq!(grid.count_below(e - 1e-6), n);
            assert_eq!(grid.count_below(e + 1e-6), n + 1);
        }
    }

    #[test]
    fn numerov_converges_at_fourth_order() {
        let v = parse("x^2").unwrap();
        let (mut hs, mut errs) = (Vec::new(), Vec::new());
        for intervals in [100, 200, 400, 800] {
            let grid = NumerovGrid::new(&v, 0.1, 2.0, intervals, 0.0).unwrap();
            let got = grid.eigenvalues(0.05, 1.0, 1e-12, 100).unwrap();
            let err = got
                .iter()
                .map(|(n, e)| (e - 0.1 * (2 * n + 1) as f64).abs())
                .fold(0.0, f64::max);
            hs.push((4.0 / intervals as f64).ln());
            errs.push(err.ln());
        }
        let fit = linear_fit(&hs, &errs).unwrap();
        assert!(fit.slope >= 3.9, "slope {}", fit.slope);
    }

    #[test]
    fn enlarging_the_box_changes_nothing() {
        let v = parse("x^4").unwrap();
        let w = EnergyWindow::new(0.5, 2.0).unwrap();
        let h = 0.05;
        let cfg = OracleConfig::default();
        let dom = oracle_domain(&v, h, &w, &cfg).unwrap();
        let a = oracle_spectrum(&v, h, &w, &cfg).unwrap();
        let wide = OracleConfig {
            half_width: Some(1.25 * dom.half_width),
            ..cfg
        };
        let b = oracle_spectrum(&v, h, &w, &wide).unwrap();
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            assert!(((p.1 - q.1) / p.1).abs() < 1e-10, "{p:?} {q:?}");
        }
    }

    #[test]
    fn narrow_box_is_rejected() {
        let v = parse("x^2").unwrap();
        let w = EnergyWindow::new(0.05, 1.0).unwrap();
        let cfg = OracleConfig {
            half_width: Some(1.05),
            ..OracleConfig::default()
        };
        assert!(matches!(
            oracle_spectrum(&v, 0.1, &w, &cfg),
            Err(Error::DomainMargin { .. })
        ));
    }
}
