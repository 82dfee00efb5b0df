//! Grid realization of microlocal Wronskians: WKB branches, cutoff
//! commutators, flux normalization, cutoff independence and the Gram matrix.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};
use std::io::{self, Write};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::actions::{leading_actions, normalization_c1};
use crate::error::{Error, Result};
use crate::exprjet::Expr;
use crate::numeric::ode::integrate_fixed;
use crate::numeric::quad::{gk15, integrate};
use crate::orbit::{turning_points, FocalFrame, OrbitOptions};
use crate::symbol::HamiltonianSymbol;

/// Width of the Airy zone excluded around each turning point, in units of
/// `(h^2 / |V'|)^(1/3)`.
pub const AIRY_FACTOR: f64 = 5.0;
/// Grid points required between a cutoff transition and the grid edge.
pub const EDGE_MARGIN: usize = 8;
/// Constant `C` in the cutoff-independence bound `max(1e-6, C h^2)`.
pub const CHI_CONSTANT: f64 = 1.0;
/// Bounds `C_k` on `|d^k/du^k|` of the unit-width cutoff profile, `k = 0..=4`.
pub const PROFILE_DERIVATIVE_BOUNDS: [f64; 5] = [1.0, 1.66, 7.2, 140.0, 6720.0];

const PROFILE_TABLE: usize = 256;

/// Which turning point a WKB branch is anchored at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basepoint {
    /// The right turning point `a`.
    Right,
    /// The left turning point `a'`.
    Left,
}

impl Basepoint {
    /// `+1` at `a`, `-1` at `a'`.
    pub fn sign(self) -> f64 {
        match self {
            Basepoint::Right => 1.0,
            Basepoint::Left => -1.0,
        }
    }
}

/// Sign of the fibre variable on a WKB branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Uniform grid `x0 + j dx`, `j < len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x0: f64,
    pub dx: f64,
    pub len: usize,
}

impl GridSpec {
    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    pub fn end(&self) -> f64 {
        self.x(self.len - 1)
    }
}

/// Complex samples on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub x0: f64,
    pub dx: f64,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: &GridSpec, values: Vec<Complex64>) -> Self {
        GridFunction {
            x0: grid.x0,
            dx: grid.dx,
            values,
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            x0: self.x0,
            dx: self.dx,
            len: self.values.len(),
        }
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.values.len() != other.values.len() || self.x0 != other.x0 || self.dx != other.dx {
            return Err(Error::Grid("pairing of functions on different grids".into()));
        }
        Ok(())
    }

    /// Trapezoid approximation of `∫ u conj(v) dx`.
    pub fn inner(&self, other: &GridFunction) -> Result<Complex64> {
        self.same_grid(other)?;
        let n = self.values.len();
        let mut sum = Complex64::new(0.0, 0.0);
        for (j, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            let w = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
            sum += a * b.conj() * w;
        }
        Ok(sum * self.dx)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).map(|z| z.re.sqrt()).unwrap_or(0.0)
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &GridFunction, sign: f64) -> Result<GridFunction> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b * sign)
            .collect();
        Ok(GridFunction {
            x0: self.x0,
            dx: self.dx,
            values,
        })
    }

    /// Writes `x,re,im` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,re,im")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{},{}", self.x(j), v.re, v.im)?;
        }
        Ok(())
    }
}

fn beta(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

fn beta_prime(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let q = 1.0 - s * s;
        beta(s) * (-2.0 * s / (q * q))
    }
}

/// Cumulative integrals of `β(2t - 1)` on a uniform table over `[0, 1]`.
fn profile_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut f = |t: f64| Ok(beta(2.0 * t - 1.0));
        let mut acc = vec![0.0; PROFILE_TABLE + 1];
        for k in 0..PROFILE_TABLE {
            let (a, b) = (k as f64 / PROFILE_TABLE as f64, (k + 1) as f64 / PROFILE_TABLE as f64);
            let (v, _) = gk15(&mut f, a, b).expect("profile integrand is total");
            acc[k + 1] = acc[k] + v;
        }
        acc
    })
}

/// Smooth step: `1` for `u <= 0`, `0` for `u >= 1`, with derivatives.
fn smooth_step(u: f64) -> [f64; 3] {
    if u <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    if u >= 1.0 {
        return [0.0, 0.0, 0.0];
    }
    let table = profile_table();
    let z = table[PROFILE_TABLE];
    let k = ((u * PROFILE_TABLE as f64) as usize).min(PROFILE_TABLE - 1);
    let a = k as f64 / PROFILE_TABLE as f64;
    let mut f = |t: f64| Ok(beta(2.0 * t - 1.0));
    let (tail, _) = gk15(&mut f, a, u).expect("profile integrand is total");
    let s = 2.0 * u - 1.0;
    [1.0 - (table[k] + tail) / z, -beta(s) / z, -2.0 * beta_prime(s) / z]
}

/// Radial cutoff equal to 1 within `r1` of `center` and 0 beyond `r2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    pub center: f64,
    pub r1: f64,
    pub r2: f64,
}

impl CutoffSpec {
    pub fn new(center: f64, r1: f64, r2: f64) -> Result<Self> {
        if !(center.is_finite() && r1 >= 0.0 && r2 > r1 && r2.is_finite()) {
            return Err(Error::Cutoff(format!(
                "0 <= r1 < r2 with finite center, got center {center}, r1 {r1}, r2 {r2}"
            )));
        }
        Ok(CutoffSpec { center, r1, r2 })
    }

    /// `χ`, `χ'`, `χ''` at `x`.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        let d = x - self.center;
        let w = self.r2 - self.r1;
        let [t, t1, t2] = smooth_step((d.abs() - self.r1) / w);
        [t, t1 * d.signum() / w, t2 / (w * w)]
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x)[0]
    }

    /// Upper bound on `|χ^(k)|`, `k <= 4`.
    pub fn derivative_bound(&self, k: usize) -> f64 {
        PROFILE_DERIVATIVE_BOUNDS[k] * (self.r2 - self.r1).powi(-(k as i32))
    }

    fn is_flat(&self, x: f64) -> bool {
        let d = (x - self.center).abs();
        d <= self.r1 || d >= self.r2
    }
}

/// Parameters shared by the grid experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WronOptions {
    /// Order of the WKB phase: 0, or 1 to include the subprincipal term.
    pub order: u8,
    pub points_per_oscillation: usize,
    /// Cutoff radii `(r1, r2)`; `None` picks fractions of the grid length.
    pub cutoff_radii: Option<(f64, f64)>,
}

impl Default for WronOptions {
    fn default() -> Self {
        WronOptions {
            order: 0,
            points_per_oscillation: 1000,
            cutoff_radii: None,
        }
    }
}

struct Geometry {
    v: Expr,
    left: f64,
    right: f64,
    delta_left: f64,
    delta_right: f64,
    xi_max: f64,
}

fn geometry(s: &HamiltonianSymbol, e: f64, h: f64) -> Result<Geometry> {
    let v = s.potential().ok_or(Error::NotSchrodinger)?.clone();
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("h = {h} must be positive")));
    }
    let (left, right) = turning_points(s, e)?;
    let zone = |x: f64| -> Result<f64> {
        let slope = v.eval_grad(x, 0.0)?.dx.abs();
        Ok(AIRY_FACTOR * (h * h).cbrt() * slope.cbrt().recip())
    };
    let (_, v_min) = s.center()?;
    Ok(Geometry {
        left,
        right,
        delta_left: zone(left)?,
        delta_right: zone(right)?,
        xi_max: (e - v_min).sqrt(),
        v,
    })
}

/// Uniform grid over the allowed region with both Airy zones removed.
pub fn wkb_grid(s: &HamiltonianSymbol, e: f64, h: f64, points_per_oscillation: usize) -> Result<GridSpec> {
    let g = geometry(s, e, h)?;
    let (a, b) = (g.left + g.delta_left, g.right - g.delta_right);
    if b <= a {
        return Err(Error::Grid(format!(
            "the Airy-zone exclusion: the zones cover the allowed region [{}, {}] at h = {h}",
            g.left, g.right
        )));
    }
    let ppo = points_per_oscillation.max(1) as f64;
    let dx = (h / (10.0 * g.xi_max)).min(2.0 * PI * h / (ppo * g.xi_max));
    let len = ((b - a) / dx).floor() as usize + 1;
    if len < 2 * EDGE_MARGIN + 5 {
        return Err(Error::Grid(format!("only {len} points between the Airy zones")));
    }
    Ok(GridSpec { x0: a, dx, len })
}

/// Cutoff centred on the grid end next to `basepoint`; radii default to
/// `0.15` and `0.7` of the grid length.
pub fn default_cutoff(grid: &GridSpec, basepoint: Basepoint, radii: Option<(f64, f64)>) -> Result<CutoffSpec> {
    let length = grid.end() - grid.x0;
    let (r1, r2) = radii.unwrap_or((0.15 * length, 0.7 * length));
    let center = match basepoint {
        Basepoint::Right => grid.end(),
        Basepoint::Left => grid.x0,
    };
    CutoffSpec::new(center, r1, r2)
}

/// `(1/2) e^{iσρπ/4} (E - V)^{-1/4} exp(i S_ρ / h)` on `grid`, with `σ = ±1`
/// for `a` and `a'` and `S_ρ` the phase integral from the basepoint.
pub fn build_wkb(
    s: &HamiltonianSymbol,
    e: f64,
    h: f64,
    basepoint: Basepoint,
    branch: Branch,
    order: u8,
    grid: &GridSpec,
) -> Result<GridFunction> {
    if order > 1 {
        return Err(Error::InvalidInput(format!("WKB order {order} must be 0 or 1")));
    }
    let g = geometry(s, e, h)?;
    let slack = 1e-12 * (1.0 + g.right.abs().max(g.left.abs()));
    if grid.len < 2 || grid.x0 < g.left + g.delta_left - slack || grid.end() > g.right - g.delta_right + slack {
        return Err(Error::Grid(format!(
            "the Airy-zone exclusion [{}, {}]",
            g.left + g.delta_left,
            g.right - g.delta_right
        )));
    }
    if grid.dx > h / (10.0 * g.xi_max) * (1.0 + 1e-12) {
        return Err(Error::Grid(format!(
            "the sampling bound dx <= {} (got {})",
            h / (10.0 * g.xi_max),
            grid.dx
        )));
    }
    let rho = branch.sign();
    let p1 = s.p1();
    let with_p1 = order == 1 && !p1.is_zero();
    let v = &g.v;
    let integrand = |y: f64| -> Result<f64> {
        let xi = (e - v.eval(y, 0.0)?).max(0.0).sqrt() * rho;
        let mut val = xi;
        if with_p1 {
            val -= h * p1.eval(y, xi)? / (2.0 * xi);
        }
        Ok(val)
    };

    let n = grid.len;
    let mut phase = vec![0.0; n];
    let (tp, anchor, dir) = match basepoint {
        Basepoint::Right => (g.right, n - 1, -1.0),
        Basepoint::Left => (g.left, 0, 1.0),
    };
    let reach = (dir * (grid.x(anchor) - tp)).max(0.0).sqrt();
    let start = integrate(
        |w| Ok(integrand(tp + dir * w * w)? * 2.0 * w * dir),
        0.0,
        reach,
        1e-13,
        1e-15,
    )?;
    phase[anchor] = start;
    let (mut sum, mut comp) = (start, 0.0);
    let mut f = |y: f64| integrand(y);
    let accumulate = |sum: &mut f64, comp: &mut f64, piece: f64| {
        let t = *sum + piece;
        if sum.abs() >= piece.abs() {
            *comp += (*sum - t) + piece;
        } else {
            *comp += (piece - t) + *sum;
        }
        *sum = t;
    };
    match basepoint {
        Basepoint::Left => {
            for j in 1..n {
                let (piece, _) = gk15(&mut f, grid.x(j - 1), grid.x(j))?;
                accumulate(&mut sum, &mut comp, piece);
                phase[j] = sum + comp;
            }
        }
        Basepoint::Right => {
            for j in (0..n - 1).rev() {
                let (piece, _) = gk15(&mut f, grid.x(j + 1), grid.x(j))?;
                accumulate(&mut sum, &mut comp, piece);
                phase[j] = sum + comp;
            }
        }
    }

    let maslov = Complex64::from_polar(0.5, basepoint.sign() * rho * FRAC_PI_4);
    let values = (0..n)
        .map(|j| {
            let amp = (e - v.eval(grid.x(j), 0.0)?).powf(-0.25);
            Ok(maslov * amp * Complex64::from_polar(1.0, phase[j] / h))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridFunction::new(grid, values))
}

fn second_difference(f: &[Complex64], j: usize, dx: f64) -> Complex64 {
    (-f[j + 2] + f[j + 1] * 16.0 - f[j] * 30.0 + f[j - 1] * 16.0 - f[j - 2]) / (12.0 * dx * dx)
}

fn first_difference(f: &[Complex64], j: usize, dx: f64) -> Complex64 {
    (-f[j + 2] + f[j + 1] * 8.0 - f[j - 1] * 8.0 + f[j - 2]) / (12.0 * dx)
}

/// Commutator samples with the discrepancy between its two discretizations.
#[derive(Debug, Clone, PartialEq)]
pub struct Commutator {
    pub values: GridFunction,
    /// Grid norm of the difference between `P(χu) - χPu` and
    /// `-h^2 (χ''u + 2χ'u')`, both times `i/h`.
    pub discrepancy: f64,
    /// `1e-8 ‖u‖`.
    pub bound: f64,
}

impl Commutator {
    pub fn consistent(&self) -> bool {
        self.discrepancy <= self.bound
    }
}

/// `(i/h)(P(χu) - χPu)` with `P = -h^2 d^2/dx^2 + V` by fourth-order
/// central differences.
pub fn apply_commutator(v: &Expr, h: f64, chi: &CutoffSpec, u: &GridFunction) -> Result<Commutator> {
    let n = u.values.len();
    let grid = u.grid();
    if n < 2 * EDGE_MARGIN + 1 {
        return Err(Error::Grid(format!(
            "commutator needs more than {} points",
            2 * EDGE_MARGIN
        )));
    }
    for j in (0..EDGE_MARGIN).chain(n - EDGE_MARGIN..n) {
        if !chi.is_flat(grid.x(j)) {
            return Err(Error::Cutoff(format!(
                "a transition within {EDGE_MARGIN} points of the grid edge at x = {}",
                grid.x(j)
            )));
        }
    }
    let dx = u.dx;
    let chis: Vec<[f64; 3]> = (0..n).map(|j| chi.eval(grid.x(j))).collect();
    let pot = (0..n).map(|j| v.eval(grid.x(j), 0.0)).collect::<Result<Vec<_>>>()?;
    let cu: Vec<Complex64> = u.values.iter().zip(&chis).map(|(a, c)| a * c[0]).collect();
    let i_over_h = Complex64::new(0.0, 1.0 / h);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let mut diff = vec![Complex64::new(0.0, 0.0); n];
    for j in 2..n - 2 {
        let p_cu = -h * h * second_difference(&cu, j, dx) + cu[j] * pot[j];
        let p_u = -h * h * second_difference(&u.values, j, dx) + u.values[j] * pot[j];
        let fd = i_over_h * (p_cu - p_u * chis[j][0]);
        let analytic =
            i_over_h * (-h * h) * (u.values[j] * chis[j][2] + first_difference(&u.values, j, dx) * (2.0 * chis[j][1]));
        out[j] = fd;
        diff[j] = fd - analytic;
    }
    let diff = GridFunction::new(&grid, diff);
    Ok(Commutator {
        values: GridFunction::new(&grid, out),
        discrepancy: diff.norm(),
        bound: 1e-8 * u.norm(),
    })
}

fn check_cutoff(chi: &CutoffSpec, grid: &GridSpec, basepoint: Basepoint) -> Result<()> {
    let (near, far) = match basepoint {
        Basepoint::Right => (grid.end(), grid.x0),
        Basepoint::Left => (grid.x0, grid.end()),
    };
    if chi.value(near) != 1.0 {
        return Err(Error::Cutoff(format!(
            "χ = 1 near the basepoint (χ({near}) = {})",
            chi.value(near)
        )));
    }
    if chi.value(far) != 0.0 {
        return Err(Error::Cutoff(format!(
            "χ = 0 before the opposite turning point (χ({far}) = {})",
            chi.value(far)
        )));
    }
    Ok(())
}

/// The two WKB branches at a basepoint and their cutoff commutators.
struct Fluxes {
    plus: GridFunction,
    minus: GridFunction,
    f_plus: Commutator,
    f_minus: Commutator,
}

impl Fluxes {
    fn new(
        s: &HamiltonianSymbol,
        e: f64,
        h: f64,
        basepoint: Basepoint,
        chi: &CutoffSpec,
        order: u8,
        grid: &GridSpec,
    ) -> Result<Self> {
        check_cutoff(chi, grid, basepoint)?;
        let v = s.potential().ok_or(Error::NotSchrodinger)?;
        let plus = build_wkb(s, e, h, basepoint, Branch::Plus, order, grid)?;
        let minus = build_wkb(s, e, h, basepoint, Branch::Minus, order, grid)?;
        let f_plus = apply_commutator(v, h, chi, &plus)?;
        let f_minus = apply_commutator(v, h, chi, &minus)?;
        Ok(Fluxes {
            plus,
            minus,
            f_plus,
            f_minus,
        })
    }

    fn solution(&self) -> Result<GridFunction> {
        self.plus.add(&self.minus)
    }

    fn flux(&self) -> Result<GridFunction> {
        self.f_plus.values.sub(&self.f_minus.values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxReport {
    /// `⟨u | F_+ - F_-⟩`.
    pub w: Complex64,
    /// Distance of `w` from `+1` at `a` or `-1` at `a'`.
    pub w_error: f64,
    /// `|⟨u_+ | F_-⟩|` and `|⟨u_- | F_+⟩|`.
    pub mixed_plus: f64,
    pub mixed_minus: f64,
    pub norm_sq: f64,
    /// Largest commutator discretization discrepancy relative to its bound.
    pub commutator_ratio: f64,
    /// First-order normalization constant and the distance of `w` from the
    /// value it predicts, for order 1 with a nonzero `p1`.
    pub c1: Option<f64>,
    pub corrected_residual: Option<f64>,
}

pub fn flux_norm_check(
    s: &HamiltonianSymbol,
    e: f64,
    h: f64,
    basepoint: Basepoint,
    chi: &CutoffSpec,
    opts: &WronOptions,
) -> Result<FluxReport> {
    let grid = wkb_grid(s, e, h, opts.points_per_oscillation)?;
    let fl = Fluxes::new(s, e, h, basepoint, chi, opts.order, &grid)?;
    let u = fl.solution()?;
    let w = u.inner(&fl.flux()?)?;
    let sigma = basepoint.sign();
    let (c1, corrected_residual) = if opts.order == 1 && !s.p1().is_zero() {
        let frame = match basepoint {
            Basepoint::Right => FocalFrame::right(s, e)?,
            Basepoint::Left => FocalFrame::left(s, e)?,
        };
        let c1 = normalization_c1(s, &frame)?;
        let predicted = sigma * (1.0 + 2.0 * SQRT_2 * h * c1);
        (Some(c1), Some((w - predicted).norm()))
    } else {
        (None, None)
    };
    Ok(FluxReport {
        w,
        w_error: (w - sigma).norm(),
        mixed_plus: fl.plus.inner(&fl.f_minus.values)?.norm(),
        mixed_minus: fl.minus.inner(&fl.f_plus.values)?.norm(),
        norm_sq: u.norm().powi(2),
        commutator_ratio: (fl.f_plus.discrepancy / fl.f_plus.bound).max(fl.f_minus.discrepancy / fl.f_minus.bound),
        c1,
        corrected_residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiReport {
    pub w1: Complex64,
    pub w2: Complex64,
    pub difference: f64,
    /// `max(1e-6, C h^2) (1 + ‖u‖^2)`.
    pub bound: f64,
    pub pass: bool,
    /// `|⟨(i/h)[P, χ1] u | u⟩|` for the full solution `u`.
    pub sum_identity: f64,
    pub norm_sq: f64,
}

pub fn chi_independence_check(
    s: &HamiltonianSymbol,
    e: f64,
    h: f64,
    basepoint: Basepoint,
    chi1: &CutoffSpec,
    chi2: &CutoffSpec,
    opts: &WronOptions,
) -> Result<ChiReport> {
    let grid = wkb_grid(s, e, h, opts.points_per_oscillation)?;
    let a = Fluxes::new(s, e, h, basepoint, chi1, opts.order, &grid)?;
    let b = Fluxes::new(s, e, h, basepoint, chi2, opts.order, &grid)?;
    let u = a.solution()?;
    let w1 = u.inner(&a.flux()?)?;
    let w2 = u.inner(&b.flux()?)?;
    let norm_sq = u.norm().powi(2);
    let difference = (w1 - w2).norm();
    let bound = 1e-6_f64.max(CHI_CONSTANT * h * h) * (1.0 + norm_sq);
    let full = a.f_plus.values.add(&a.f_minus.values)?;
    Ok(ChiReport {
        w1,
        w2,
        difference,
        bound,
        pass: difference <= bound,
        sum_identity: full.inner(&u)?.norm(),
        norm_sq,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramNumeric {
    /// Rows are the fluxes at `a` and `a'`, columns the solutions from `a`
    /// and `a'`.
    pub matrix: [[Complex64; 2]; 2],
    pub det: Complex64,
    pub analytic_det: f64,
    /// `-sin(S(a', a)/h)`, the analytic lower-left entry.
    pub analytic_off_diagonal: f64,
}

pub fn gram_numeric(s: &HamiltonianSymbol, e: f64, h: f64, opts: &WronOptions) -> Result<GramNumeric> {
    let grid = wkb_grid(s, e, h, opts.points_per_oscillation)?;
    let chi_a = default_cutoff(&grid, Basepoint::Right, opts.cutoff_radii)?;
    let chi_b = default_cutoff(&grid, Basepoint::Left, opts.cutoff_radii)?;
    gram_numeric_with(s, e, h, opts.order, &grid, &chi_a, &chi_b)
}

pub fn gram_numeric_with(
    s: &HamiltonianSymbol,
    e: f64,
    h: f64,
    order: u8,
    grid: &GridSpec,
    chi_a: &CutoffSpec,
    chi_b: &CutoffSpec,
) -> Result<GramNumeric> {
    let fa = Fluxes::new(s, e, h, Basepoint::Right, chi_a, order, grid)?;
    let fb = Fluxes::new(s, e, h, Basepoint::Left, chi_b, order, grid)?;
    let (u1, u2) = (fa.solution()?, fb.solution()?);
    let (ga, gb) = (fa.flux()?, fb.flux()?);
    let matrix = [[u1.inner(&ga)?, u2.inner(&ga)?], [u1.inner(&gb)?, u2.inner(&gb)?]];
    let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
    let (_, s0, sub) = leading_actions(s, e, &OrbitOptions::default())?;
    let action = if order >= 1 { s0 - h * sub } else { s0 };
    let theta = action / (2.0 * h);
    Ok(GramNumeric {
        matrix,
        det,
        analytic_det: -theta.cos().powi(2),
        analytic_off_diagonal: -theta.sin(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
    /// `|lhs - rhs| / |rhs|`.
    pub residual: f64,
}

/// Checks `⟨(i/h)[P, χ] u | v⟩ = -ih (u' v̄ - u v̄')(χ(end) - χ(start))` for
/// two numerically exact solutions of `(P - E)u = 0` on `grid`.
pub fn wronskian_identity(v: &Expr, e: f64, h: f64, grid: &GridSpec, chi: &CutoffSpec) -> Result<IdentityReport> {
    let pot = v.clone();
    let mut rhs_fn = |x: f64, y: &[f64; 4]| -> Result<[f64; 4]> {
        let k = (pot.eval(x, 0.0)? - e) / (h * h);
        Ok([y[1], k * y[0], y[3], k * y[2]])
    };
    let k0 = ((e - v.eval(grid.x0, 0.0)?).abs().sqrt() / h).max(1.0);
    let states = integrate_fixed(&mut rhs_fn, grid.x0, &[1.0, 0.0, 0.0, k0], grid.dx, grid.len - 1)?;
    let u: Vec<Complex64> = states.iter().map(|y| Complex64::new(y[0], y[2])).collect();
    let w: Vec<Complex64> = states
        .iter()
        .map(|y| Complex64::new(y[0] + 0.3 * y[2], -0.7 * y[0]))
        .collect();
    let up = |y: &[f64; 4]| Complex64::new(y[1], y[3]);
    let wp = |y: &[f64; 4]| Complex64::new(y[1] + 0.3 * y[3], -0.7 * y[1]);
    let mid = grid.len / 2;
    let ym = &states[mid];
    let wronskian = up(ym) * w[mid].conj() - u[mid] * wp(ym).conj();
    let jump = chi.value(grid.end()) - chi.value(grid.x0);
    let rhs = Complex64::new(0.0, -h) * wronskian * jump;
    let uf = GridFunction::new(grid, u);
    let wf = GridFunction::new(grid, w);
    let lhs = apply_commutator(v, h, chi, &uf)?.values.inner(&wf)?;
    let residual = (lhs - rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    Ok(IdentityReport { lhs, rhs, residual })
}
