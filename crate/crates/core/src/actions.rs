//! The action series `S0 + h S1 + h^2 S2` and the pointwise near-focal
//! quantities entering the second-order correction.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::numeric::diff::{d1, d2, richardson};
use crate::orbit::{trace_orbit_with, FocalFrame, Orbit, OrbitOptions};
use crate::symbol::HamiltonianSymbol;

/// Sign with which `S2` enters the quantization function by default; the
/// choice that reduces quartic-oscillator errors against the reference solver.
pub const DEFAULT_S2_SIGN: f64 = -1.0;

const CONSISTENCY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionOptions {
    pub s2_sign: f64,
    pub orbit: OrbitOptions,
}

impl Default for ActionOptions {
    fn default() -> Self {
        ActionOptions {
            s2_sign: DEFAULT_S2_SIGN,
            orbit: OrbitOptions::default(),
        }
    }
}

/// Action coefficients at one energy.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSeries {
    pub energy: f64,
    pub period: f64,
    /// `∮ xi dx`.
    pub s0: f64,
    /// Focal-point phase, `π` for the two turning points of a single well.
    pub maslov: f64,
    /// `∮ p1 dt`.
    pub sub_principal: f64,
    pub s1: f64,
    /// `∮ Γ dt` and its second energy derivative.
    pub gamma_int: f64,
    pub gamma_dd: f64,
    /// `∮ p2 dt`.
    pub p2_int: f64,
    /// Energy derivative of `∮ p1^2 dt`.
    pub p1sq_d: f64,
    pub s2: f64,
    pub s2_sign: f64,
    /// False when the derivative estimates at steps `η` and `η/2` disagree
    /// beyond `1e-6` relative.
    pub consistent: bool,
}

impl ActionSeries {
    /// `S0 - h ∮p1 dt + s2_sign h^2 S2`, truncated after `order`.
    pub fn quantization_function(&self, h: f64, order: u8) -> f64 {
        let mut v = self.s0;
        if order >= 1 {
            v -= h * self.sub_principal;
        }
        if order >= 2 {
            v += self.s2_sign * h * h * self.s2;
        }
        v
    }
}

/// Restriction of the 1-form `ω0` to the Hamilton flow:
/// `p0_xx p0_ξ^2 - 2 p0_xξ p0_x p0_ξ + p0_ξξ p0_x^2`.
pub fn gamma_value(s: &HamiltonianSymbol, x: f64, xi: f64) -> Result<f64> {
    if let Some(v) = s.potential() {
        let j = v.jet(x, 0.0)?;
        let (v1, v2) = (j.partial(1, 0), j.partial(2, 0));
        return Ok(4.0 * xi * xi * v2 + 2.0 * v1 * v1);
    }
    let j = s.jet0(x, xi)?;
    let (px, pxi) = (j.partial(1, 0), j.partial(0, 1));
    Ok(j.partial(2, 0) * pxi * pxi - 2.0 * j.partial(1, 1) * px * pxi + j.partial(0, 2) * px * px)
}

/// `S0`, the period and `∮ p1 dt` from a single orbit: everything the order 0
/// and order 1 rules need.
pub fn leading_actions(s: &HamiltonianSymbol, e: f64, opts: &OrbitOptions) -> Result<(Orbit, f64, f64)> {
    let orbit = trace_orbit_with(s, e, opts)?;
    let s0 = orbit.action_s0()?;
    let sub = if s.p1().is_zero() {
        0.0
    } else {
        orbit.integral(|x, xi| s.p1().eval(x, xi))?
    };
    Ok((orbit, s0, sub))
}

pub fn action_series(s: &HamiltonianSymbol, e: f64, eta: f64) -> Result<ActionSeries> {
    action_series_with(s, e, eta, &ActionOptions::default())
}

/// Full series at `e`; energy derivatives come from 4th-order central
/// differences at steps `eta` and `eta/2` combined by Richardson extrapolation.
pub fn action_series_with(s: &HamiltonianSymbol, e: f64, eta: f64, opts: &ActionOptions) -> Result<ActionSeries> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidInput(format!("derivative step {eta} must be positive")));
    }
    let (orbit, s0, sub) = leading_actions(s, e, &opts.orbit)?;
    let has_p1 = !s.p1().is_zero();
    let p2_int = if s.p2().is_zero() {
        0.0
    } else {
        orbit.integral(|x, xi| s.p2().eval(x, xi))?
    };

    // Γ and p1^2 integrals at offsets -2η, -η, -η/2, 0, η/2, η, 2η.
    let offsets = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
    let mut gam = [0.0; 7];
    let mut p1sq = [0.0; 7];
    for (k, off) in offsets.iter().enumerate() {
        let o = if *off == 0.0 {
            orbit.clone()
        } else {
            trace_orbit_with(s, e + off * eta, &opts.orbit)?
        };
        gam[k] = o.integral(|x, xi| gamma_value(s, x, xi))?;
        if has_p1 {
            p1sq[k] = o.integral(|x, xi| s.p1().eval(x, xi).map(|p| p * p))?;
        }
    }
    let second = |f: &[f64; 7]| {
        let coarse = d2([f[0], f[1], f[3], f[5], f[6]], eta);
        let fine = d2([f[1], f[2], f[3], f[4], f[5]], 0.5 * eta);
        (richardson(coarse, fine, 4), (coarse - fine).abs())
    };
    let first = |f: &[f64; 7]| {
        let coarse = d1([f[0], f[1], f[5], f[6]], eta);
        let fine = d1([f[1], f[2], f[4], f[5]], 0.5 * eta);
        (richardson(coarse, fine, 4), (coarse - fine).abs())
    };
    let (gamma_dd, gap_g) = second(&gam);
    let (p1sq_d, gap_p) = if has_p1 { first(&p1sq) } else { (0.0, 0.0) };
    let consistent =
        gap_g <= CONSISTENCY_TOL * (1.0 + gamma_dd.abs()) && gap_p <= CONSISTENCY_TOL * (1.0 + p1sq_d.abs());

    let s2 = gamma_dd / 48.0 - p2_int - 0.5 * p1sq_d;
    if !s2.is_finite() {
        return Err(Error::no_convergence(format!(
            "second-order action at E = {e} is not finite"
        )));
    }
    Ok(ActionSeries {
        energy: e,
        period: orbit.period,
        s0,
        maslov: PI,
        sub_principal: sub,
        s1: PI - sub,
        gamma_int: gam[3],
        gamma_dd,
        p2_int,
        p1sq_d,
        s2,
        s2_sign: opts.s2_sign,
        consistent,
    })
}

/// The integrand `T1` of the second-order Fourier-side phase on the arc
/// through `frame`, at fibre coordinate `xi`.
pub fn t1_value(s: &HamiltonianSymbol, frame: &FocalFrame, xi: f64) -> Result<f64> {
    let pt = frame.point(s, xi)?;
    let j = &pt.jet;
    let (a, psi, ap) = (pt.alpha, pt.psi2, pt.alpha_prime);
    let p1 = s.p1().eval_grad(pt.x, xi)?;
    let p2 = s.p2().eval(pt.x, xi)?;
    let pxx = j.partial(2, 0);
    let pxxx = j.partial(3, 0);
    let bracket = p2 - j.partial(2, 2) / 8.0 + psi / 12.0 * j.partial(3, 1) + psi * psi / 24.0 * j.partial(4, 0);
    Ok(
        bracket / a + ap * ap / (8.0 * a.powi(3)) * pxx + psi * ap / (6.0 * a * a) * pxxx
            - p1.value / (a * a) * (p1.dx - p1.value / (2.0 * a) * pxx),
    )
}

/// Boundary terms of the first-order Fourier-side amplitude at `xi`:
/// the real part `-(1/2) ∂x(p1/∂x p0)` and the imaginary bracket
/// `ψ''/(6α) ∂x³p0 + (1/4) α' ∂x²p0`.
pub fn d1_brackets(s: &HamiltonianSymbol, frame: &FocalFrame, xi: f64) -> Result<(f64, f64)> {
    let pt = frame.point(s, xi)?;
    let j = &pt.jet;
    let p1 = s.p1().eval_grad(pt.x, xi)?;
    let (px, pxx) = (j.partial(1, 0), j.partial(2, 0));
    let re = -0.5 * (p1.dx * px - p1.value * pxx) / (px * px);
    let im = pt.psi2 / (6.0 * pt.alpha) * j.partial(3, 0) + 0.25 * pt.alpha_prime * pxx;
    Ok((re, im))
}

/// First-order normalization constant `C1 = -(1/2) C0 ∂x(p1/∂x p0)` at the
/// focal point, with `C0 = 1/√2`.
pub fn normalization_c1(s: &HamiltonianSymbol, frame: &FocalFrame) -> Result<f64> {
    let (re, _) = d1_brackets(s, frame, frame.xi_focal)?;
    Ok(FRAC_1_SQRT_2 * re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprjet::parse;
    use crate::numeric::ode::integrate_fixed;
    use crate::numeric::quad::integrate;
    use std::collections::BTreeMap;

    fn harmonic() -> HamiltonianSymbol {
        HamiltonianSymbol::builtin("harmonic", &BTreeMap::new()).unwrap()
    }

    #[test]
    fn gamma_examples() {
        let h = harmonic();
        for &(x, xi) in &[(1.0, 0.0), (0.6, 0.8), (0.0, -1.0)] {
            assert!((gamma_value(&h, x, xi).unwrap() - 8.0).abs() < 1e-13);
        }
        let q = HamiltonianSymbol::builtin("quartic", &BTreeMap::new()).unwrap();
        assert!((gamma_value(&q, 1.0, 0.0).unwrap() - 32.0).abs() < 1e-12);
        // Schrödinger shortcut agrees with the general formula.
        let g = HamiltonianSymbol::general(parse("xi^2 + x^4").unwrap());
        for &(x, xi) in &[(0.3, 0.7), (-1.1, 0.2)] {
            let a = gamma_value(&q, x, xi).unwrap();
            let b = gamma_value(&g, x, xi).unwrap();
            let expect = 4.0 * xi * xi * 12.0 * x * x + 2.0 * (4.0 * x * x * x).powi(2);
            assert!((a - expect).abs() < 1e-12 && (b - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_gamma_integral_is_linear() {
        let h = harmonic();
        let o = crate::orbit::trace_orbit(&h, 1.0).unwrap();
        let g = o.integral(|x, xi| gamma_value(&h, x, xi)).unwrap();
        assert!((g - 8.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn harmonic_series() {
        let a = action_series(&harmonic(), 1.0, 1e-3).unwrap();
        assert!((a.s0 - PI).abs() < 1e-10);
        assert!((a.s1 - PI).abs() < 1e-15);
        assert!(a.s2.abs() < 1e-8 * 2.0, "S2 = {}", a.s2);
        assert!(a.consistent);
    }

    #[test]
    fn constant_lower_order_symbols() {
        let c = 0.7;
        let s = harmonic().with_p2(parse("0.7").unwrap());
        let a = action_series(&s, 1.0, 1e-3).unwrap();
        assert!((a.s2 + c * PI).abs() < 1e-8);
        let s = harmonic().with_p1(parse("0.7").unwrap());
        let a = action_series(&s, 1.0, 1e-3).unwrap();
        assert!((a.sub_principal - c * PI).abs() < 1e-10);
        assert!((a.s1 - (PI - c * PI)).abs() < 1e-10);
        assert!(a.p1sq_d.abs() < 1e-7);
    }

    #[test]
    fn derivative_step_robustness() {
        for (name, e) in [("quartic", 1.0), ("harmonic", 0.8)] {
            let s = HamiltonianSymbol::builtin(name, &BTreeMap::new()).unwrap();
            let a = action_series(&s, e, 2e-3).unwrap();
            let b = action_series(&s, e, 1e-3).unwrap();
            assert!(
                (a.s2 - b.s2).abs() <= 1e-6 * (1.0 + a.s2.abs()),
                "{name}: {} vs {}",
                a.s2,
                b.s2
            );
        }
        let m = HamiltonianSymbol::builtin("morse", &[("D".to_string(), 1.0), ("a".to_string(), 1.0)].into()).unwrap();
        let a = action_series(&m, 0.5, 2e-3).unwrap();
        let b = action_series(&m, 0.5, 1e-3).unwrap();
        assert!((a.s2 - b.s2).abs() <= 1e-6 * (1.0 + a.s2.abs()));
    }

    #[test]
    fn quartic_s2_matches_scaling_law() {
        // ∮Γ dt scales as E^(5/4) for x^4, so S2 = (5/16)/48 ∮Γ dt / E^2.
        let q = HamiltonianSymbol::builtin("quartic", &BTreeMap::new()).unwrap();
        let a = action_series(&q, 1.5, 1e-2).unwrap();
        let expect = 5.0 / 16.0 / 48.0 * a.gamma_int / (1.5 * 1.5);
        assert!((a.s2 - expect).abs() < 1e-8, "{} vs {expect}", a.s2);
    }

    #[test]
    fn quantization_function_truncates() {
        let s = harmonic().with_p1(parse("0.5").unwrap()).with_p2(parse("1").unwrap());
        let a = action_series(&s, 1.0, 1e-3).unwrap();
        let h = 0.1;
        assert!((a.quantization_function(h, 0) - a.s0).abs() < 1e-15);
        assert!((a.quantization_function(h, 1) - (a.s0 - h * a.sub_principal)).abs() < 1e-15);
        let full = a.s0 - h * a.sub_principal + DEFAULT_S2_SIGN * h * h * a.s2;
        assert!((a.quantization_function(h, 2) - full).abs() < 1e-15);
    }

    #[test]
    fn t1_examples() {
        let h = harmonic();
        let frame = FocalFrame::right(&h, 1.0).unwrap();
        let xi = 0.4;
        let x = (1.0f64 - xi * xi).sqrt();
        let t1 = t1_value(&h, &frame, xi).unwrap();
        assert!((t1 - xi * xi / (8.0 * x.powi(5))).abs() < 1e-13);
        assert!(t1_value(&h, &frame, 0.0).unwrap().abs() < 1e-15);
        let c = 0.3;
        let s = harmonic().with_p2(parse("0.3").unwrap());
        let e = 2.0;
        let frame = FocalFrame::right(&s, e).unwrap();
        assert!((t1_value(&s, &frame, 0.0).unwrap() - c / (2.0 * e.sqrt())).abs() < 1e-13);
    }

    #[test]
    fn t1_rejects_points_far_from_focus() {
        let h = harmonic();
        let frame = FocalFrame::right(&h, 1.0).unwrap();
        assert!(matches!(t1_value(&h, &frame, 1.0), Err(Error::AlphaTooSmall(_))));
    }

    #[test]
    fn bracket_examples() {
        let h = harmonic();
        let frame = FocalFrame::right(&h, 1.0).unwrap();
        let xi = 0.35;
        let x = (1.0f64 - xi * xi).sqrt();
        let (re, im) = d1_brackets(&h, &frame, xi).unwrap();
        assert_eq!(re, 0.0);
        assert!((im + xi / x).abs() < 1e-13);
        assert_eq!(d1_brackets(&h, &frame, 0.0).unwrap().1, 0.0);
    }

    #[test]
    fn c1_examples() {
        let e = 1.7;
        let frame = FocalFrame::right(&harmonic(), e).unwrap();
        assert_eq!(normalization_c1(&harmonic(), &frame).unwrap(), 0.0);
        let s = harmonic().with_p1(parse("x").unwrap());
        assert!(normalization_c1(&s, &frame).unwrap().abs() < 1e-15);
        let s = harmonic().with_p1(parse("x^2").unwrap());
        let c1 = normalization_c1(&s, &frame).unwrap();
        assert!((c1 + 1.0 / (4.0 * 2f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn subprincipal_form_representations_agree() {
        // Follow the flow from the right focal point for a short time: ξ runs
        // from 0 down to ξ(t1) while x stays near x_E.
        let s = HamiltonianSymbol::builtin("quartic", &BTreeMap::new())
            .unwrap()
            .with_p1(parse("x^2 + 0.3*xi + 1").unwrap());
        let e = 1.2;
        let frame = FocalFrame::right(&s, e).unwrap();
        let steps = 4000;
        let t1 = 0.2;
        let dt = t1 / steps as f64;
        let ys = integrate_fixed(
            &mut |_t, y: &[f64; 2]| s.flow(y[0], y[1]),
            0.0,
            &[frame.x_focal, 0.0],
            dt,
            steps,
        )
        .unwrap();
        let p1 = |y: &[f64; 2]| s.p1().eval(y[0], y[1]).unwrap();
        let simpson: f64 = (0..steps / 2)
            .map(|k| (p1(&ys[2 * k]) + 4.0 * p1(&ys[2 * k + 1]) + p1(&ys[2 * k + 2])) * dt / 3.0)
            .sum();
        let xi_end = ys[steps][1];
        let fourier = integrate(
            |xi| {
                let pt = frame.point(&s, xi)?;
                Ok(s.p1().eval(pt.x, xi)? / pt.alpha)
            },
            0.0,
            xi_end,
            1e-13,
            0.0,
        )
        .unwrap();
        assert!(
            (fourier + simpson).abs() < 1e-8 * simpson.abs(),
            "{fourier} vs {simpson}"
        );

        // Spatial form on an arc of the upper branch away from both focal points.
        let o = crate::orbit::trace_orbit(&s, e).unwrap();
        let samples: Vec<_> = o.samples().collect();
        let n = o.steps();
        let (ia, ib) = (n * 5 / 8, n * 7 / 8);
        assert!(samples[ia].2 > 0.0 && samples[ib].2 > 0.0);
        let p1t = |k: usize| s.p1().eval(samples[k].1, samples[k].2).unwrap();
        let timed: f64 = (0..(ib - ia) / 2)
            .map(|m| {
                let k = ia + 2 * m;
                (p1t(k) + 4.0 * p1t(k + 1) + p1t(k + 2)) * o.dt() / 3.0
            })
            .sum();
        let spatial = integrate(
            |x| {
                let xi = o.branch(x, true)?;
                Ok(s.p1().eval(x, xi)? / (2.0 * xi))
            },
            samples[ia].1,
            samples[ib].1,
            1e-13,
            0.0,
        )
        .unwrap();
        assert!((spatial - timed).abs() < 1e-8 * timed.abs(), "{spatial} vs {timed}");
    }

    #[test]
    fn near_focal_quantities_are_smooth() {
        let s = HamiltonianSymbol::builtin("quartic", &BTreeMap::new())
            .unwrap()
            .with_p1(parse("x^2").unwrap())
            .with_p2(parse("0.2*x").unwrap());
        let frame = FocalFrame::right(&s, 1.0).unwrap();
        let f = |xi: f64| t1_value(&s, &frame, xi).unwrap();
        let g = |xi: f64| d1_brackets(&s, &frame, xi).unwrap().1;
        let step = 0.01;
        for k in -10..10 {
            let xi = (k as f64 + 0.5) * step;
            for func in [&f as &dyn Fn(f64) -> f64, &g] {
                let nodes = [-1.5, -0.5, 0.5, 1.5].map(|m| func(xi + m * step));
                let interp = (-nodes[0] + 9.0 * nodes[1] + 9.0 * nodes[2] - nodes[3]) / 16.0;
                let direct = func(xi);
                assert!((interp - direct).abs() <= 1e-6 * (1.0 + direct.abs()));
            }
        }
    }
}
