//! Bohr–Sommerfeld spectra at orders 0, 1 and 2 and the analytic Gram
//! determinant whose zeros reproduce them.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::actions::{action_series_with, leading_actions, ActionOptions};
use crate::error::{Error, Result};
use crate::numeric::fit::{linear_fit, LineFit};
use crate::numeric::roots::{brent, golden_min};
use crate::symbol::{EnergyWindow, HamiltonianSymbol};

const GRID_POINTS: usize = 9;
const DENSE_POINTS: usize = 65;
const ZERO_ACCEPT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizeOptions {
    /// Energy step for the derivatives inside `S2`; `None` selects
    /// `1e-3 * (e_max - e_min)`.
    pub eta: Option<f64>,
    /// Roots are refined to `root_tol * (1 + |E|)`.
    pub root_tol: f64,
    pub actions: ActionOptions,
}

impl Default for QuantizeOptions {
    fn default() -> Self {
        QuantizeOptions {
            eta: None,
            root_tol: 1e-10,
            actions: ActionOptions::default(),
        }
    }
}

impl QuantizeOptions {
    fn eta_for(&self, w: &EnergyWindow) -> f64 {
        self.eta.unwrap_or(1e-3 * (w.e_max - w.e_min))
    }
}

/// One quantum number with its eigenvalue estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub n: usize,
    pub e_order0: Option<f64>,
    pub e_order1: Option<f64>,
    pub e_order2: Option<f64>,
    pub e_oracle: Option<f64>,
    pub err0: Option<f64>,
    pub err2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub h: f64,
    pub order: u8,
    pub rows: Vec<SpectrumRow>,
    /// Set when `S_h` was not monotone on the window and roots came from a
    /// dense scan instead of bracketing.
    pub non_monotone: bool,
    /// Set when any second-order derivative estimate failed its consistency check.
    pub derivative_warning: bool,
}

impl SpectrumTable {
    /// Fills the reference column from `(n, E)` pairs and the error columns
    /// from it.
    pub fn attach_oracle(&mut self, levels: &[(usize, f64)]) {
        let lookup: BTreeMap<usize, f64> = levels.iter().copied().collect();
        for row in &mut self.rows {
            row.e_oracle = lookup.get(&row.n).copied();
            row.err0 = row.e_oracle.zip(row.e_order0).map(|(o, e)| (e - o).abs());
            row.err2 = row.e_oracle.zip(row.e_order2).map(|(o, e)| (e - o).abs());
        }
    }

    /// Eigenvalues of one order, in level order.
    pub fn energies(&self, order: u8) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| match order {
                0 => r.e_order0,
                1 => r.e_order1,
                _ => r.e_order2,
            })
            .collect()
    }
}

/// Evaluates the truncated quantization function; the full series is only
/// built when the second-order term is requested.
struct Quantizer<'a> {
    s: &'a HamiltonianSymbol,
    eta: f64,
    opts: QuantizeOptions,
    warned: bool,
}

struct Sample {
    value: f64,
    slope: f64,
}

impl Quantizer<'_> {
    fn eval(&mut self, e: f64, h: f64, order: u8) -> Result<Sample> {
        if order < 2 {
            let (orbit, s0, sub) = leading_actions(self.s, e, &self.opts.actions.orbit)?;
            let value = if order == 1 { s0 - h * sub } else { s0 };
            return Ok(Sample {
                value,
                slope: orbit.period,
            });
        }
        let a = action_series_with(self.s, e, self.eta, &self.opts.actions)?;
        self.warned |= !a.consistent;
        Ok(Sample {
            value: a.quantization_function(h, 2),
            slope: a.period,
        })
    }
}

fn target(h: f64, k: usize) -> f64 {
    2.0 * PI * h * (k as f64 + 0.5)
}

fn level_range(lo: f64, hi: f64, h: f64) -> std::ops::RangeInclusive<usize> {
    let first = (lo / (2.0 * PI * h) - 0.5).ceil().max(0.0) as usize;
    let last = (hi / (2.0 * PI * h) - 0.5).floor();
    if last < 0.0 || (last as usize) < first {
        // An empty range.
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    first..=last as usize
}

/// Roots of one order: a map from quantum number to energy.
fn solve_order(
    q: &mut Quantizer<'_>,
    h: f64,
    w: &EnergyWindow,
    order: u8,
    seeds: &BTreeMap<usize, f64>,
    non_monotone: &mut bool,
) -> Result<BTreeMap<usize, f64>> {
    let tol = q.opts.root_tol;
    let grid: Vec<f64> = w.samples(GRID_POINTS).collect();
    let mut vals = Vec::with_capacity(grid.len());
    for &e in &grid {
        vals.push(q.eval(e, h, order)?.value);
    }
    let monotone = vals.windows(2).all(|p| p[1] > p[0]);
    let mut roots = BTreeMap::new();

    if !monotone {
        *non_monotone = true;
        let dense: Vec<f64> = w.samples(DENSE_POINTS).collect();
        let mut dv = Vec::with_capacity(dense.len());
        for &e in &dense {
            dv.push(q.eval(e, h, order)?.value);
        }
        let (lo, hi) = dv
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        for k in level_range(lo, hi, h) {
            let t = target(h, k);
            for i in 0..dense.len() - 1 {
                if (dv[i] - t) * (dv[i + 1] - t) <= 0.0 {
                    let e = brent(
                        |e| Ok(q.eval(e, h, order)?.value - t),
                        dense[i],
                        dense[i + 1],
                        0.25 * tol * (1.0 + dense[i].abs()),
                    )?;
                    roots.entry(k).or_insert(e);
                    break;
                }
            }
        }
        return Ok(roots);
    }

    for k in level_range(vals[0], vals[GRID_POINTS - 1], h) {
        let t = target(h, k);
        let cell = vals
            .windows(2)
            .position(|p| p[0] <= t && t <= p[1])
            .ok_or_else(|| Error::Bracket(format!("level {k} not bracketed on the energy grid")))?;
        let (lo, hi) = (grid[cell], grid[cell + 1]);
        let xtol = 0.25 * tol * (1.0 + hi.abs());
        let e = if order < 2 {
            brent(|e| Ok(q.eval(e, h, order)?.value - t), lo, hi, xtol)?
        } else {
            let seed = seeds.get(&k).copied().unwrap_or(0.5 * (lo + hi));
            newton_in_cell(q, h, t, lo, hi, seed, xtol, vals[cell] - t, vals[cell + 1] - t)?
        };
        roots.insert(k, e);
    }
    Ok(roots)
}

/// Newton iteration with the period as slope, confined to a bracketing cell.
#[allow(clippy::too_many_arguments)]
fn newton_in_cell(
    q: &mut Quantizer<'_>,
    h: f64,
    t: f64,
    mut lo: f64,
    mut hi: f64,
    seed: f64,
    xtol: f64,
    f_lo: f64,
    f_hi: f64,
) -> Result<f64> {
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    let mut x = if seed > lo && seed < hi { seed } else { 0.5 * (lo + hi) };
    for _ in 0..100 {
        let s = q.eval(x, h, 2)?;
        let f = s.value - t;
        if f == 0.0 {
            return Ok(x);
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - f / s.slope;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if step <= xtol || hi - lo <= xtol {
            return Ok(x);
        }
    }
    Err(Error::no_convergence(format!(
        "second-order root near {x} did not settle"
    )))
}

pub fn bs_solve(s: &HamiltonianSymbol, h: f64, w: &EnergyWindow, order: u8) -> Result<SpectrumTable> {
    bs_solve_with(s, h, w, order, &QuantizeOptions::default())
}

/// Solves `S0 - h ∮p1 dt + s2_sign h^2 S2 = 2πh(k + 1/2)` for every level in
/// the window, at each order up to `order`.
pub fn bs_solve_with(
    s: &HamiltonianSymbol,
    h: f64,
    w: &EnergyWindow,
    order: u8,
    opts: &QuantizeOptions,
) -> Result<SpectrumTable> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("h = {h} must be positive")));
    }
    if order > 2 {
        return Err(Error::InvalidInput(format!("order {order} must be 0, 1 or 2")));
    }
    let mut q = Quantizer {
        s,
        eta: opts.eta_for(w),
        opts: *opts,
        warned: false,
    };
    let mut non_monotone = false;
    let mut per_order: Vec<BTreeMap<usize, f64>> = Vec::new();
    for o in 0..=order {
        let seeds = per_order.last().cloned().unwrap_or_default();
        let roots = if o == 1 && s.p1().is_zero() {
            per_order[0].clone()
        } else {
            solve_order(&mut q, h, w, o, &seeds, &mut non_monotone)?
        };
        per_order.push(roots);
    }
    let mut levels: Vec<usize> = per_order.iter().flat_map(|m| m.keys().copied()).collect();
    levels.sort_unstable();
    levels.dedup();
    if levels.is_empty() {
        return Err(Error::NoRoots {
            e_min: w.e_min,
            e_max: w.e_max,
        });
    }
    let pick = |o: usize, n: usize| per_order.get(o).and_then(|m| m.get(&n).copied());
    let rows = levels
        .into_iter()
        .map(|n| SpectrumRow {
            n,
            e_order0: pick(0, n),
            e_order1: pick(1, n),
            e_order2: pick(2, n),
            e_oracle: None,
            err0: None,
            err2: None,
        })
        .collect();
    Ok(SpectrumTable {
        h,
        order,
        rows,
        non_monotone,
        derivative_warning: q.warned,
    })
}

/// Analytic Gram determinant at one energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramEval {
    pub energy: f64,
    pub h: f64,
    /// Difference of the two branch actions, including the `hπ` focal phase.
    pub action_diff: f64,
    pub maslov_phase: f64,
    /// `-cos^2(action_diff / 2h + maslov_phase)`.
    pub det: f64,
}

pub fn gram_det(s: &HamiltonianSymbol, e: f64, h: f64, order: u8) -> Result<GramEval> {
    gram_det_with(s, e, h, order, &QuantizeOptions::default(), None)
}

/// Gram determinant using `eta` for the second-order derivatives (falls back
/// to a step of `1e-3` when neither `eta` nor the options supply one).
pub fn gram_det_with(
    s: &HamiltonianSymbol,
    e: f64,
    h: f64,
    order: u8,
    opts: &QuantizeOptions,
    eta: Option<f64>,
) -> Result<GramEval> {
    let mut q = Quantizer {
        s,
        eta: eta.or(opts.eta).unwrap_or(1e-3),
        opts: *opts,
        warned: false,
    };
    let action_diff = q.eval(e, h, order)?.value + h * PI;
    let phase = action_diff / (2.0 * h) + FRAC_PI_2;
    Ok(GramEval {
        energy: e,
        h,
        action_diff,
        maslov_phase: FRAC_PI_2,
        det: -phase.cos().powi(2),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramScan {
    pub evals: Vec<GramEval>,
    pub zeros: Vec<f64>,
}

pub fn gram_scan(s: &HamiltonianSymbol, w: &EnergyWindow, h: f64, steps: usize, order: u8) -> Result<GramScan> {
    gram_scan_with(s, w, h, steps, order, &QuantizeOptions::default())
}

/// Scans `det` on a uniform grid and refines each local minimum of `|det|` by
/// golden-section search; minima below `1e-6` are reported as zeros.
pub fn gram_scan_with(
    s: &HamiltonianSymbol,
    w: &EnergyWindow,
    h: f64,
    steps: usize,
    order: u8,
    opts: &QuantizeOptions,
) -> Result<GramScan> {
    if steps < 2 {
        return Err(Error::InvalidInput("gram scan needs at least two steps".into()));
    }
    let eta = Some(opts.eta_for(w));
    let det_at = |e: f64| gram_det_with(s, e, h, order, opts, eta);
    let evals = w.samples(steps + 1).map(det_at).collect::<Result<Vec<_>>>()?;
    let mag: Vec<f64> = evals.iter().map(|g| g.det.abs()).collect();
    let mut zeros = Vec::new();
    for i in 0..mag.len() {
        let left = if i == 0 { f64::INFINITY } else { mag[i - 1] };
        let right = if i + 1 == mag.len() { f64::INFINITY } else { mag[i + 1] };
        if !(mag[i] <= left && mag[i] < right) {
            continue;
        }
        let a = evals[i.saturating_sub(1)].energy;
        let b = evals[(i + 1).min(mag.len() - 1)].energy;
        let xtol = 1e-12 * (1.0 + b.abs());
        let (e, v) = golden_min(|e| det_at(e).map(|g| g.det.abs().sqrt()), a, b, xtol)?;
        if v * v < ZERO_ACCEPT {
            zeros.push(e);
        }
    }
    Ok(GramScan { evals, zeros })
}

/// Least-squares line through `(log h, log err)`.
pub fn convergence_fit(errs: &[(f64, f64)]) -> Result<LineFit> {
    if errs.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "convergence fit needs at least 3 points, got {}",
            errs.len()
        )));
    }
    if let Some((h, e)) = errs.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "convergence fit needs positive data, got ({h}, {e})"
        )));
    }
    let xs: Vec<f64> = errs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|p| p.1.ln()).collect();
    linear_fit(&xs, &ys)
}
