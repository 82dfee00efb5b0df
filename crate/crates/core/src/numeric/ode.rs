//! Dormand–Prince 5(4) integration with cubic Hermite dense output.

use crate::error::{Error, Result};

const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const B_STAR: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Result of one Dormand–Prince step.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    /// Fifth-order solution at `t + h`.
    pub y: [f64; N],
    /// Right-hand side at the new point (reused as the next first stage).
    pub f: [f64; N],
    /// Difference between the fifth- and fourth-order solutions.
    pub err: [f64; N],
    /// The increment `y - y0`, unrounded by the addition to `y0`.
    pub delta: [f64; N],
}

fn combine<const N: usize>(y: &[f64; N], h: f64, coef: &[f64], k: &[[f64; N]]) -> [f64; N] {
    let mut out = *y;
    for (c, ki) in coef.iter().zip(k) {
        if *c != 0.0 {
            for n in 0..N {
                out[n] += h * c * ki[n];
            }
        }
    }
    out
}

/// Advances `y` from `t` by `h`, given the right-hand side `f0` at `(t, y)`.
pub fn dp5_step<F, const N: usize>(rhs: &mut F, t: f64, y: &[f64; N], f0: &[f64; N], h: f64) -> Result<Step<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut k = [[0.0; N]; 7];
    k[0] = *f0;
    k[1] = rhs(t + C[0] * h, &combine(y, h, &A2, &k[..1]))?;
    k[2] = rhs(t + C[1] * h, &combine(y, h, &A3, &k[..2]))?;
    k[3] = rhs(t + C[2] * h, &combine(y, h, &A4, &k[..3]))?;
    k[4] = rhs(t + C[3] * h, &combine(y, h, &A5, &k[..4]))?;
    k[5] = rhs(t + C[4] * h, &combine(y, h, &A6, &k[..5]))?;
    let delta = combine(&[0.0; N], h, &B, &k[..6]);
    let mut y1 = *y;
    for n in 0..N {
        y1[n] += delta[n];
    }
    k[6] = rhs(t + h, &y1)?;
    let mut err = [0.0; N];
    for (i, ki) in k.iter().enumerate() {
        let w = h * (B.get(i).copied().unwrap_or(0.0) - B_STAR[i]);
        for n in 0..N {
            err[n] += w * ki[n];
        }
    }
    Ok(Step {
        y: y1,
        f: k[6],
        err,
        delta,
    })
}

/// Cubic Hermite interpolant between `(y0, f0)` and `(y1, f1)` a step `h` apart,
/// evaluated at fraction `theta` of the step.
pub fn hermite<const N: usize>(
    y0: &[f64; N],
    f0: &[f64; N],
    y1: &[f64; N],
    f1: &[f64; N],
    h: f64,
    theta: f64,
) -> [f64; N] {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let mut out = [0.0; N];
    for n in 0..N {
        out[n] = h00 * y0[n] + h10 * h * f0[n] + h01 * y1[n] + h11 * h * f1[n];
    }
    out
}

/// Error-controlled step size selection for [`dp5_step`].
#[derive(Debug, Clone, Copy)]
pub struct Controller {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
}

impl Controller {
    fn error_norm<const N: usize>(&self, y0: &[f64; N], s: &Step<N>) -> f64 {
        let mut acc = 0.0;
        for n in 0..N {
            let scale = self.atol + self.rtol * y0[n].abs().max(s.y[n].abs());
            acc += (s.err[n] / scale).powi(2);
        }
        (acc / N as f64).sqrt()
    }

    /// Attempts steps from `(t, y)` starting with size `h`, shrinking until the
    /// local error is acceptable. Returns the accepted step, the size used, and
    /// a proposal for the next step.
    pub fn advance<F, const N: usize>(
        &self,
        rhs: &mut F,
        t: f64,
        y: &[f64; N],
        f0: &[f64; N],
        mut h: f64,
    ) -> Result<(Step<N>, f64, f64)>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        loop {
            let s = dp5_step(rhs, t, y, f0, h)?;
            let norm = self.error_norm(y, &s);
            let factor = if norm == 0.0 {
                5.0
            } else {
                (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            if norm <= 1.0 {
                return Ok((s, h, h * factor));
            }
            h *= factor;
            if h.abs() < self.h_min {
                return Err(Error::no_convergence(format!("step size underflow at t = {t}")));
            }
        }
    }
}

/// Fixed-step integration over `steps` steps of size `h`, returning every state
/// including the initial one. State updates use compensated summation.
pub fn integrate_fixed<F, const N: usize>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64; N],
    h: f64,
    steps: usize,
) -> Result<Vec<[f64; N]>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = *y0;
    let mut carry = [0.0; N];
    let mut f = rhs(t0, &y)?;
    out.push(y);
    for i in 0..steps {
        let s = dp5_step(rhs, t0 + i as f64 * h, &y, &f, h)?;
        for n in 0..N {
            let inc = s.delta[n] + carry[n];
            let next = y[n] + inc;
            carry[n] = inc - (next - y[n]);
            y[n] = next;
        }
        f = s.f;
        out.push(y);
    }
    Ok(out)
}
